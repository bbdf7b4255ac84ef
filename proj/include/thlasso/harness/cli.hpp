#pragma once

// Command-line front end: run | sweep | diagnose | bound.
//
// Exit codes: 0 success, 1 configuration / runtime error, 2 usage error.

#include "thlasso/diagnostics.hpp"
#include "thlasso/error.hpp"
#include "thlasso/harness/config.hpp"
#include "thlasso/harness/output.hpp"
#include "thlasso/harness/runner.hpp"
#include "thlasso/harness/sweep.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace thlasso::harness {

namespace detail {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<Index> replications;
  std::optional<int> workers;
  std::optional<std::string> out;
  bool plot = false;
};

inline void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "experiment config file")->required();
  cmd->add_option("--seed", f.seed, "base seed (overrides the config)");
  cmd->add_option("--replications", f.replications, "replication count");
  cmd->add_option("--workers", f.workers, "worker threads");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_flag("--plot", f.plot, "also write regret.svg");
}

inline ParsedConfig resolve(const CommonFlags& f) {
  ParsedConfig pc = load_config(f.config);
  ExperimentConfig& c = pc.config;
  if (f.seed) c.base_seed = *f.seed;
  if (f.replications) c.replications = *f.replications;
  if (f.workers) c.workers = *f.workers;
  if (f.out) c.output_dir = *f.out;
  validate(c);
  return pc;
}

using Report = std::vector<std::pair<std::string, std::string>>;

inline void print_report(const Report& report, bool csv, std::ostream& out) {
  if (csv) out << "key,value\n";
  for (const auto& [k, v] : report) out << k << (csv ? "," : " = ") << v << "\n";
}

inline void summarize(const AggregateSeries& s, std::ostream& out) {
  if (s.t.empty()) return;
  const Index T = s.t.back();
  out << "t = " << T << ": cum_regret " << format_double(s.mean_at("cum_regret", T)) << " (se "
      << format_double(s.metric("cum_regret").std_error.back()) << "), fp "
      << format_double(s.mean_at("fp", T)) << ", fn " << format_double(s.mean_at("fn", T))
      << ", l2_err " << format_double(s.mean_at("l2_err", T)) << "\n";
}

}  // namespace detail

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Thresholded LASSO bandit simulator"};
  app.require_subcommand(1);

  detail::CommonFlags run_flags;
  std::optional<std::string> run_policy;
  auto* run = app.add_subcommand("run", "run one experiment");
  detail::add_common(run, run_flags);
  run->add_option("--policy", run_policy, "policy (overrides the config)");

  detail::CommonFlags sweep_flags;
  std::vector<std::string> sweep_sets;
  auto* sweep = app.add_subcommand("sweep", "run a cartesian parameter grid");
  detail::add_common(sweep, sweep_flags);
  sweep->add_option("--set", sweep_sets, "axis as section.key=v1,v2,... (repeatable)");

  detail::CommonFlags diag_flags;
  std::optional<Index> diag_rounds;
  Index diag_samples = 2000;
  std::vector<double> kappas = {0.05, 0.1, 0.2, 0.5, 1.0};
  int grid_resolution = 4;
  Index compat_max_dim = 12;
  std::string format = "text";
  auto* diag = app.add_subcommand("diagnose", "probe the problem conditions on one replication");
  detail::add_common(diag, diag_flags);
  diag->add_option("--rounds", diag_rounds, "rounds to simulate (default: horizon)");
  diag->add_option("--samples", diag_samples, "Monte-Carlo samples for the margin probe");
  diag->add_option("--kappa", kappas, "margin probe grid")->delimiter(',');
  diag->add_option("--grid", grid_resolution, "lattice resolution of the compatibility search");
  diag->add_option("--compat-max-dim", compat_max_dim,
                   "largest d for which the compatibility constant is estimated");
  diag->add_option("--format", format, "text or csv")->check(CLI::IsMember({"text", "csv"}));

  Index bound_T = 0;
  bool margin = true;
  std::optional<std::string> bound_config;
  EnvironmentSpec bound_env;
  double phi0_sq = 1.0, alpha = 1.0, cm = 1.0;
  std::optional<double> sigma, s2;
  auto* bound = app.add_subcommand("bound", "evaluate the regret upper bound");
  bound->add_option("--T", bound_T, "horizon")->required();
  bound->add_flag("--margin,!--no-margin", margin, "margin-condition bound (default) or not");
  bound->add_option("--config", bound_config, "take K, d, s0, sA, sigma from a config");
  auto* opt_K = bound->add_option("--K", bound_env.K, "arms");
  auto* opt_d = bound->add_option("--d", bound_env.d, "dimension");
  auto* opt_s0 = bound->add_option("--s0", bound_env.s0, "sparsity");
  auto* opt_sA = bound->add_option("--sA", bound_env.sA, "context norm bound");
  bound->add_option("--sigma", sigma, "noise scale");
  bound->add_option("--phi0-sq", phi0_sq, "compatibility constant (illustrative default 1)");
  bound->add_option("--alpha", alpha, "covariate diversity constant (illustrative default 1)");
  bound->add_option("--cm", cm, "margin constant (illustrative default 1)");
  bound->add_option("--s2", s2, "bound on ||theta||_2 (default 2 sqrt(s0))");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*run) {
      ParsedConfig pc = detail::resolve(run_flags);
      ExperimentConfig& cfg = pc.config;
      if (run_policy) {
        apply_setting(cfg, "experiment.policy", "\"" + *run_policy + "\"");
        validate(cfg);
      }
      const AggregateSeries series = aggregate(run_experiment(cfg), cfg.log_every);
      emit_outputs(series, cfg, run_flags.plot);
      out << policy_name(cfg.policy) << ", " << cfg.replications << " replications -> "
          << cfg.output_dir << "\n";
      detail::summarize(series, out);
      return 0;
    }

    if (*sweep) {
      ParsedConfig pc = detail::resolve(sweep_flags);
      for (const auto& s : sweep_sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=v1,v2,..., got '" + s + "'");
        SweepAxis axis{s.substr(0, eq), detail::split_list(s.substr(eq + 1))};
        std::erase_if(pc.sweep, [&](const SweepAxis& a) { return a.key == axis.key; });
        pc.sweep.push_back(std::move(axis));
      }
      if (pc.sweep.empty()) throw ConfigError("sweep needs at least one axis ([sweep] or --set)");
      run_sweep(pc.config, pc.sweep, sweep_flags.plot, [&](const SweepResult& r) {
        out << r.point.config.output_dir << ":";
        for (const auto& [k, v] : r.point.assignment) out << " " << k << "=" << v;
        out << "\n  ";
        detail::summarize(r.series, out);
      });
      out << "summary -> " << (std::filesystem::path(pc.config.output_dir) / "summary.csv").string()
          << "\n";
      return 0;
    }

    if (*diag) {
      ParsedConfig pc = detail::resolve(diag_flags);
      ExperimentConfig cfg = pc.config;
      if (diag_rounds) cfg.horizon = *diag_rounds;
      validate(cfg);
      DesignMatrix history;
      IndexSet estimated;
      Replication rep = run_replication(cfg, 0, [&](const Policy& p, const RoundRecord& r) {
        if (r.t == cfg.horizon) {
          history = p.history_A();
          estimated = p.estimated_support();
        }
      });
      const GroundTruth& truth = rep.truth;
      const EnvironmentSpec env = replication_environment(cfg, 0);

      detail::Report rpt;
      auto put = [&](std::string k, std::string v) { rpt.emplace_back(std::move(k), std::move(v)); };
      put("policy", std::string(policy_name(cfg.policy)));
      put("rounds", std::to_string(cfg.horizon));
      put("d", std::to_string(env.d));
      put("s0", std::to_string(env.s0));
      put("theta_min", format_double(truth.theta_min));
      put("theta_l2", format_double(truth.theta.norm()));
      put("cum_regret", format_double(rep.rounds.back().cum_regret));
      put("fp", std::to_string(rep.rounds.back().fp));
      put("fn", std::to_string(rep.rounds.back().fn));
      put("restricted_min_eig_true_support",
          format_double(restricted_min_eigenvalue(history, truth.support)));
      put("restricted_min_eig_estimated_support",
          estimated.empty() ? "n/a" : format_double(restricted_min_eigenvalue(history, estimated)));
      if (env.d <= compat_max_dim) {
        const Eigen::MatrixXd gram =
            (history.transpose() * history) / static_cast<double>(history.rows());
        const CompatibilityEstimate est =
            compatibility_constant({gram, truth.support}, grid_resolution);
        put("compatibility_phi2_true_support", format_double(est.value));
        put("compatibility_mode", est.exhaustive ? "lattice" : "sampled_upper_bound");
      } else {
        put("compatibility_phi2_true_support", "skipped (d > compat-max-dim)");
      }
      for (const MarginPoint& mp :
           margin_probe(env, truth, kappas, diag_samples, 0x6d617267ULL, cfg.workers)) {
        put("margin_prob[kappa=" + format_double(mp.kappa) + "]", format_double(mp.probability));
        put("margin_ratio[kappa=" + format_double(mp.kappa) + "]",
            format_double(mp.probability / mp.kappa));
      }
      std::ostringstream text;
      detail::print_report(rpt, format == "csv", text);
      out << text.str();
      if (diag_flags.out) {
        ensure_directory(*diag_flags.out);
        write_file(std::filesystem::path(*diag_flags.out) /
                       (format == "csv" ? "diagnose.csv" : "diagnose.txt"),
                   text.str());
      }
      return 0;
    }

    if (*bound) {
      if (bound_config) {
        const ParsedConfig pc = load_config(*bound_config);
        const EnvironmentSpec& e = pc.config.environment;
        if (opt_K->count() == 0) bound_env.K = e.K;
        if (opt_d->count() == 0) bound_env.d = e.d;
        if (opt_s0->count() == 0) bound_env.s0 = e.s0;
        if (opt_sA->count() == 0) bound_env.sA = e.sA;
        if (!sigma) sigma = e.sigma;
      }
      const double sig = sigma.value_or(1.0);
      const TheoryConstants c = derive_theory_constants(phi0_sq, alpha, cm, sig, bound_env.s0,
                                                        bound_env.sA, bound_env.d);
      const double s2v = s2.value_or(2.0 * std::sqrt(static_cast<double>(bound_env.s0)));
      const double value = theorem_bound(c, bound_env, s2v, bound_T, margin);
      detail::Report rpt = {
          {"C0", format_double(c.C0)},     {"tau", std::to_string(c.tau)},
          {"h0", std::to_string(c.h0)},    {"s2", format_double(s2v)},
          {"T", std::to_string(bound_T)},  {"margin", margin ? "true" : "false"},
          {"bound", format_double(value)},
      };
      detail::print_report(rpt, false, out);
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace thlasso::harness
