#pragma once

// Result files:
//   rounds.csv   long format, header `t,metric,mean,stderr`, one row per
//                (metric, t); LF line endings, shortest round-trip floats
//   config.echo  resolved configuration (see echo_config)
//   regret.svg   cumulative regret mean with a +-stderr band (optional)

#include "thlasso/error.hpp"
#include "thlasso/harness/config.hpp"
#include "thlasso/harness/runner.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

namespace thlasso::harness {

inline constexpr std::string_view kRoundsHeader = "t,metric,mean,stderr";

inline std::string rounds_csv(const AggregateSeries& series) {
  std::string out(kRoundsHeader);
  out += '\n';
  for (const auto& m : series.metrics)
    for (std::size_t i = 0; i < series.t.size(); ++i) {
      out += std::to_string(series.t[i]);
      out += ',';
      out += m.name;
      out += ',';
      out += format_double(m.mean[i]);
      out += ',';
      out += format_double(m.std_error[i]);
      out += '\n';
    }
  return out;
}

/// Inverse of rounds_csv. The replication count is not part of the file and
/// is left at 0.
inline AggregateSeries parse_rounds_csv(std::string_view text) {
  AggregateSeries out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  auto next_line = [&](std::string_view& line) {
    if (pos >= text.size()) return false;
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    return true;
  };
  auto bad = [&](const std::string& why) {
    return LengthMismatch("rounds.csv line " + std::to_string(line_no) + ": " + why);
  };

  std::string_view line;
  if (!next_line(line) || line != kRoundsHeader) throw bad("missing header");
  while (next_line(line)) {
    if (line.empty()) continue;
    std::string_view fields[4];
    std::size_t start = 0;
    for (int f = 0; f < 4; ++f) {
      const auto comma = f < 3 ? line.find(',', start) : line.size();
      if (comma == std::string_view::npos) throw bad("expected 4 fields");
      fields[f] = line.substr(start, comma - start);
      start = comma + 1;
    }
    Index t = 0;
    {
      auto [p, ec] = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), t);
      if (ec != std::errc{} || p != fields[0].data() + fields[0].size()) throw bad("bad t");
    }
    double values[2];
    for (int k = 0; k < 2; ++k) {
      const std::string_view s = fields[2 + k];
      if (s == "inf" || s == "-inf" || s == "nan") {
        values[k] = s == "inf"   ? std::numeric_limits<double>::infinity()
                    : s == "nan" ? std::numeric_limits<double>::quiet_NaN()
                                 : -std::numeric_limits<double>::infinity();
        continue;
      }
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), values[k]);
      if (ec != std::errc{} || p != s.data() + s.size()) throw bad("bad number");
    }
    const std::string name(fields[1]);
    if (out.metrics.empty() || out.metrics.back().name != name) {
      for (const auto& m : out.metrics)
        if (m.name == name) throw bad("metric '" + name + "' is not contiguous");
      out.metrics.push_back({name, {}, {}});
    }
    MetricSeries& m = out.metrics.back();
    const std::size_t i = m.mean.size();
    if (out.metrics.size() == 1)
      out.t.push_back(t);
    else if (i >= out.t.size() || out.t[i] != t)
      throw bad("rounds of metric '" + name + "' differ from the first metric");
    m.mean.push_back(values[0]);
    m.std_error.push_back(values[1]);
  }
  for (const auto& m : out.metrics)
    if (m.mean.size() != out.t.size()) throw bad("metric '" + m.name + "' is truncated");
  return out;
}

/// Line chart of one metric's mean with a +-stderr band.
inline std::string render_svg(const AggregateSeries& series, const std::string& metric_name,
                              const std::string& title) {
  constexpr double W = 640, H = 400, L = 70, R = 20, Top = 40, B = 50;
  const MetricSeries& m = series.metric(metric_name);
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       "font-size=\"15\">"
    << title << "</text>\n";
  if (series.t.empty()) {
    o << "</svg>\n";
    return o.str();
  }
  double x_lo = static_cast<double>(series.t.front());
  double x_hi = static_cast<double>(series.t.back());
  if (x_hi <= x_lo) x_hi = x_lo + 1;
  double y_lo = 0, y_hi = 0;
  for (std::size_t i = 0; i < series.t.size(); ++i) {
    y_lo = std::min(y_lo, m.mean[i] - m.std_error[i]);
    y_hi = std::max(y_hi, m.mean[i] + m.std_error[i]);
  }
  if (y_hi <= y_lo) y_hi = y_lo + 1;
  auto px = [&](double x) { return L + (x - x_lo) / (x_hi - x_lo) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y_lo) / (y_hi - y_lo) * (H - Top - B); };

  o << "<polygon fill=\"#1f77b4\" fill-opacity=\"0.25\" stroke=\"none\" points=\"";
  for (std::size_t i = 0; i < series.t.size(); ++i)
    o << px(static_cast<double>(series.t[i])) << ',' << py(m.mean[i] + m.std_error[i]) << ' ';
  for (std::size_t i = series.t.size(); i-- > 0;)
    o << px(static_cast<double>(series.t[i])) << ',' << py(m.mean[i] - m.std_error[i]) << ' ';
  o << "\"/>\n<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < series.t.size(); ++i)
    o << px(static_cast<double>(series.t[i])) << ',' << py(m.mean[i]) << ' ';
  o << "\"/>\n";
  // axes
  o << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n"
    << "<line x1=\"" << L << "\" y1=\"" << Top << "\" x2=\"" << L << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n";
  auto label = [&](double x, double y, const std::string& s, const char* anchor) {
    o << "<text x=\"" << x << "\" y=\"" << y << "\" text-anchor=\"" << anchor
      << "\" font-family=\"sans-serif\" font-size=\"12\">" << s << "</text>\n";
  };
  label(L, H - B + 18, format_double(x_lo), "middle");
  label(W - R, H - B + 18, format_double(x_hi), "middle");
  label(L - 6, H - B, format_double(y_lo), "end");
  label(L - 6, Top + 4, format_double(y_hi), "end");
  label((L + W - R) / 2, H - 12, "t", "middle");
  label(16, (Top + H - B) / 2, metric_name, "start");
  o << "</svg>\n";
  return o.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) throw IoError("failed writing '" + path.string() + "'");
}

inline void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw IoError("cannot create output directory '" + dir.string() + "'" +
                  (ec ? ": " + ec.message() : std::string{}));
}

/// Writes rounds.csv, config.echo and, with `plot`, regret.svg into
/// cfg.output_dir.
inline void emit_outputs(const AggregateSeries& series, const ExperimentConfig& cfg,
                         bool plot = false) {
  const std::filesystem::path dir(cfg.output_dir);
  ensure_directory(dir);
  write_file(dir / "rounds.csv", rounds_csv(series));
  write_file(dir / "config.echo", echo_config(cfg));
  if (plot)
    write_file(dir / "regret.svg",
               render_svg(series, "cum_regret",
                          "Cumulative regret, " + std::string(policy_name(cfg.policy)) + " (" +
                              std::to_string(series.replications) + " replications)"));
}

}  // namespace thlasso::harness
