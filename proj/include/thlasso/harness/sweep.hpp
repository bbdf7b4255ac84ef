#pragma once

// Cartesian parameter sweeps. Every grid point is a full experiment written
// to its own subdirectory; summary.csv collects the final-round means.

#include "thlasso/error.hpp"
#include "thlasso/harness/config.hpp"
#include "thlasso/harness/output.hpp"
#include "thlasso/harness/runner.hpp"

#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace thlasso::harness {

struct SweepPoint {
  ExperimentConfig config;
  std::vector<std::pair<std::string, std::string>> assignment;
};

/// Expands the axes into grid points, last axis varying fastest. Point i
/// writes to <output_dir>/pNNN.
inline std::vector<SweepPoint> expand_sweep(const ExperimentConfig& base,
                                            const std::vector<SweepAxis>& axes) {
  for (const auto& a : axes)
    if (a.values.empty()) throw ConfigError("sweep axis '" + a.key + "' has no values");
  std::vector<SweepPoint> points;
  std::vector<std::size_t> idx(axes.size(), 0);
  for (;;) {
    SweepPoint p{base, {}};
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const std::string& v = axes[a].values[idx[a]];
      apply_setting(p.config, axes[a].key, v);
      p.assignment.emplace_back(axes[a].key, v);
    }
    char name[16];
    std::snprintf(name, sizeof name, "p%03zu", points.size());
    p.config.output_dir = (std::filesystem::path(base.output_dir) / name).string();
    validate(p.config);
    points.push_back(std::move(p));

    std::size_t a = axes.size();
    while (a > 0 && ++idx[a - 1] == axes[a - 1].values.size()) idx[--a] = 0;
    if (a == 0) break;
  }
  return points;
}

struct SweepResult {
  SweepPoint point;
  AggregateSeries series;
};

/// Runs every grid point and writes its outputs plus <output_dir>/summary.csv.
/// `progress`, if set, is told about each finished point.
inline std::vector<SweepResult> run_sweep(
    const ExperimentConfig& base, const std::vector<SweepAxis>& axes, bool plot = false,
    const std::function<void(const SweepResult&)>& progress = {}) {
  std::vector<SweepResult> results;
  for (auto& p : expand_sweep(base, axes)) {
    AggregateSeries series = aggregate(run_experiment(p.config), p.config.log_every);
    emit_outputs(series, p.config, plot);
    results.push_back({std::move(p), std::move(series)});
    if (progress) progress(results.back());
  }

  std::string csv = "point";
  for (const auto& a : axes) csv += "," + a.key;
  csv += ",t,cum_regret_mean,cum_regret_stderr,fp_mean,fn_mean,l2_err_mean\n";
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    csv += std::filesystem::path(r.point.config.output_dir).filename().string();
    for (const auto& kv : r.point.assignment) csv += "," + kv.second;
    const auto& s = r.series;
    if (s.t.empty()) {
      csv += ",,,,,,\n";
      continue;
    }
    const std::size_t last = s.t.size() - 1;
    csv += "," + std::to_string(s.t[last]) + "," + format_double(s.metric("cum_regret").mean[last]) +
           "," + format_double(s.metric("cum_regret").std_error[last]) + "," +
           format_double(s.metric("fp").mean[last]) + "," +
           format_double(s.metric("fn").mean[last]) + "," +
           format_double(s.metric("l2_err").mean[last]) + "\n";
  }
  ensure_directory(base.output_dir);
  write_file(std::filesystem::path(base.output_dir) / "summary.csv", csv);
  return results;
}

}  // namespace thlasso::harness
