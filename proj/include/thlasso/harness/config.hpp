#pragma once

// Experiment configuration: a flat, typed key-value text format with
// sections.
//
//   # comment
//   [experiment]
//   policy = "th_lasso"        # th_lasso | sa_lasso | oracle | random
//   horizon = 1000
//   replications = 20
//   base_seed = 1
//   output_dir = "out/fig2"
//   log_every = 1
//   workers = 1
//
//   [environment]
//   K = 2
//   d = 1000
//   s0 = 5
//   sA = 10                    # inf disables clipping
//   rho2 = 0.7
//   sigma = 1
//   clip_mode = "ball"         # ball | sphere
//   support = "random"         # random | prefix
//
//   [policy]
//   lambda0 = 0.03             # default depends on the policy
//   lambda0_ratio = 1          # multiplies lambda0
//   tol = 1e-7
//   max_iter = 10000
//
//   [sweep]                    # only read by the sweep command
//   environment.sA = 2.5, 5, 10, 20, 40, inf
//
// Strings are double-quoted; numbers accept `inf`. echo_config() writes the
// fully resolved configuration back in the same format with shortest
// round-trip number formatting, so parse(echo(c)) == c.

#include "thlasso/environment.hpp"
#include "thlasso/error.hpp"
#include "thlasso/policies.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace thlasso::harness {

struct ExperimentConfig {
  EnvironmentSpec environment;
  PolicyKind policy = PolicyKind::kThLasso;
  // NaN selects default_lambda0(policy).
  double lambda0 = std::numeric_limits<double>::quiet_NaN();
  double lambda0_ratio = 1.0;
  LassoOptions lasso;
  Index horizon = 1000;
  Index replications = 20;
  std::uint64_t base_seed = 1;
  std::string output_dir = "out";
  Index log_every = 1;
  int workers = 1;

  double effective_lambda0() const {
    const double base = std::isnan(lambda0) ? default_lambda0(policy) : lambda0;
    return base * lambda0_ratio;
  }

  PolicyParams policy_params() const { return {policy, effective_lambda0(), lasso}; }
};

// One axis of a cartesian sweep: a dotted key and its raw values.
struct SweepAxis {
  std::string key;
  std::vector<std::string> values;
};

struct ParsedConfig {
  ExperimentConfig config;
  std::vector<SweepAxis> sweep;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Drops a trailing comment that is not inside a quoted string.
inline std::string_view strip_comment(std::string_view s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  bool quoted = false;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i < s.size() && s[i] == '"') quoted = !quoted;
    if (i == s.size() || (s[i] == ',' && !quoted)) {
      out.emplace_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

class ValueReader {
 public:
  ValueReader(std::string key, std::string_view raw) : key_(std::move(key)), raw_(trim(raw)) {}

  double real() const {
    if (raw_ == "inf" || raw_ == "+inf") return std::numeric_limits<double>::infinity();
    if (raw_ == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(raw_.data(), raw_.data() + raw_.size(), v);
    if (ec != std::errc{} || ptr != raw_.data() + raw_.size()) fail("a number");
    return v;
  }

  template <typename Int>
  Int integer() const {
    Int v{};
    auto [ptr, ec] = std::from_chars(raw_.data(), raw_.data() + raw_.size(), v);
    if (ec != std::errc{} || ptr != raw_.data() + raw_.size()) fail("an integer");
    return v;
  }

  std::string string() const {
    if (raw_.size() < 2 || raw_.front() != '"' || raw_.back() != '"')
      fail("a double-quoted string");
    return std::string(raw_.substr(1, raw_.size() - 2));
  }

 private:
  [[noreturn]] void fail(const char* what) const {
    throw ConfigError("key '" + key_ + "' expects " + what + ", got '" + std::string(raw_) + "'");
  }
  std::string key_;
  std::string_view raw_;
};

}  // namespace detail

/// Sets one dotted key ("section.name") from its raw text.
inline void apply_setting(ExperimentConfig& cfg, const std::string& key, std::string_view raw) {
  const detail::ValueReader v(key, raw);
  EnvironmentSpec& env = cfg.environment;
  if (key == "experiment.policy") {
    const std::string name = v.string();
    auto kind = parse_policy_kind(name);
    if (!kind) throw ConfigError("unknown policy '" + name + "'");
    cfg.policy = *kind;
  } else if (key == "experiment.horizon") {
    cfg.horizon = v.integer<Index>();
  } else if (key == "experiment.replications") {
    cfg.replications = v.integer<Index>();
  } else if (key == "experiment.base_seed") {
    cfg.base_seed = v.integer<std::uint64_t>();
  } else if (key == "experiment.output_dir") {
    cfg.output_dir = v.string();
  } else if (key == "experiment.log_every") {
    cfg.log_every = v.integer<Index>();
  } else if (key == "experiment.workers") {
    cfg.workers = v.integer<int>();
  } else if (key == "environment.K") {
    env.K = v.integer<Index>();
  } else if (key == "environment.d") {
    env.d = v.integer<Index>();
  } else if (key == "environment.s0") {
    env.s0 = v.integer<Index>();
  } else if (key == "environment.sA") {
    env.sA = v.real();
  } else if (key == "environment.rho2") {
    env.rho2 = v.real();
  } else if (key == "environment.sigma") {
    env.sigma = v.real();
  } else if (key == "environment.clip_mode") {
    const std::string m = v.string();
    if (m == "ball")
      env.clip_mode = ClipMode::kBall;
    else if (m == "sphere")
      env.clip_mode = ClipMode::kSphere;
    else
      throw ConfigError("clip_mode must be \"ball\" or \"sphere\", got '" + m + "'");
  } else if (key == "environment.support") {
    const std::string m = v.string();
    if (m == "random")
      env.support = SupportPlacement::kRandom;
    else if (m == "prefix")
      env.support = SupportPlacement::kPrefix;
    else
      throw ConfigError("support must be \"random\" or \"prefix\", got '" + m + "'");
  } else if (key == "policy.lambda0") {
    cfg.lambda0 = v.real();
  } else if (key == "policy.lambda0_ratio") {
    cfg.lambda0_ratio = v.real();
  } else if (key == "policy.tol") {
    cfg.lasso.tol = v.real();
  } else if (key == "policy.max_iter") {
    cfg.lasso.max_iter = v.integer<int>();
  } else {
    throw ConfigError("unknown key '" + key + "'");
  }
}

inline void validate(const ExperimentConfig& cfg) {
  if (cfg.horizon < 1) throw ConfigError("horizon must be >= 1");
  if (cfg.replications < 1) throw ConfigError("replications must be >= 1");
  if (cfg.log_every < 1) throw ConfigError("log_every must be >= 1");
  if (cfg.workers < 1) throw ConfigError("workers must be >= 1");
  if (!(cfg.lasso.tol > 0.0)) throw ConfigError("policy.tol must be > 0");
  if (cfg.lasso.max_iter < 1) throw ConfigError("policy.max_iter must be >= 1");
  if (!(cfg.lambda0_ratio >= 0.0)) throw ConfigError("policy.lambda0_ratio must be >= 0");
  const double l0 = cfg.effective_lambda0();
  if ((cfg.policy == PolicyKind::kThLasso && !(l0 > 0.0)) ||
      (cfg.policy == PolicyKind::kSaLasso && !(l0 >= 0.0)))
    throw ConfigError("lambda0 out of range for policy " + std::string(policy_name(cfg.policy)));
  if ((cfg.policy == PolicyKind::kThLasso || cfg.policy == PolicyKind::kSaLasso) &&
      cfg.environment.d < 2)
    throw ConfigError("LASSO policies need d >= 2");
  try {
    validate(cfg.environment);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

inline ParsedConfig parse_config(std::string_view text) {
  ParsedConfig out;
  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string_view raw_line =
        text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const std::string_view line = detail::trim(detail::strip_comment(raw_line));
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "malformed section header");
      section = std::string(detail::trim(line.substr(1, line.size() - 2)));
      if (section != "experiment" && section != "environment" && section != "policy" &&
          section != "sweep")
        throw ConfigError(where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected key = value");
    const std::string name(detail::trim(line.substr(0, eq)));
    const std::string_view value = detail::trim(line.substr(eq + 1));
    if (section.empty()) throw ConfigError(where + "key '" + name + "' outside a section");
    try {
      if (section == "sweep") {
        SweepAxis axis{name, detail::split_list(value)};
        // Check every value against the target key now.
        for (const auto& v : axis.values) {
          ExperimentConfig scratch;
          apply_setting(scratch, axis.key, v);
        }
        out.sweep.push_back(std::move(axis));
      } else {
        apply_setting(out.config, section + "." + name, value);
      }
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  validate(out.config);
  return out;
}

inline ParsedConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

/// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::string echo_config(const ExperimentConfig& cfg) {
  const EnvironmentSpec& env = cfg.environment;
  std::ostringstream o;
  auto q = [](const std::string& s) { return "\"" + s + "\""; };
  o << "[experiment]\n"
    << "policy = " << q(std::string(policy_name(cfg.policy))) << "\n"
    << "horizon = " << cfg.horizon << "\n"
    << "replications = " << cfg.replications << "\n"
    << "base_seed = " << cfg.base_seed << "\n"
    << "output_dir = " << q(cfg.output_dir) << "\n"
    << "log_every = " << cfg.log_every << "\n"
    << "workers = " << cfg.workers << "\n"
    << "\n[environment]\n"
    << "K = " << env.K << "\n"
    << "d = " << env.d << "\n"
    << "s0 = " << env.s0 << "\n"
    << "sA = " << format_double(env.sA) << "\n"
    << "rho2 = " << format_double(env.rho2) << "\n"
    << "sigma = " << format_double(env.sigma) << "\n"
    << "clip_mode = " << q(env.clip_mode == ClipMode::kBall ? "ball" : "sphere") << "\n"
    << "support = " << q(env.support == SupportPlacement::kRandom ? "random" : "prefix") << "\n"
    << "\n[policy]\n"
    << "lambda0 = " << format_double(cfg.effective_lambda0()) << "\n"
    << "lambda0_ratio = 1\n"
    << "tol = " << format_double(cfg.lasso.tol) << "\n"
    << "max_iter = " << cfg.lasso.max_iter << "\n";
  return o.str();
}

}  // namespace thlasso::harness
