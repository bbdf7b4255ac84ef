#pragma once

#include "thlasso/environment.hpp"
#include "thlasso/error.hpp"
#include "thlasso/harness/config.hpp"
#include "thlasso/policies.hpp"
#include "thlasso/random.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace thlasso::harness {

// Per-round log. Estimation quantities (fp, fn, l2_err, support_size,
// lambda_t) describe the policy after it has absorbed round t's reward.
struct RoundRecord {
  Index t = 0;
  Index chosen_arm = 0;
  double reward = 0.0;
  double inst_regret = 0.0;
  double cum_regret = 0.0;
  Index fp = 0;  // |S1_hat \ S|
  Index fn = 0;  // |S \ S1_hat|
  double l2_err = 0.0;
  double lambda_t = 0.0;
  Index support_size = 0;
  Index nonconverged = 0;  // cumulative solver non-convergence count

  bool operator==(const RoundRecord&) const = default;
};

struct SolverStats {
  int lasso_calls = 0;
  int nonconverged = 0;
  double max_kkt_residual = 0.0;
};

struct Replication {
  std::vector<RoundRecord> rounds;
  SolverStats solver;
  GroundTruth truth;
};

inline std::uint64_t replication_seed(std::uint64_t base_seed, Index replication_index) {
  return split_seed(base_seed, {static_cast<std::uint64_t>(replication_index)});
}

/// Environment of one replication: the configured spec with its theta,
/// context and noise streams split off the replication seed.
inline EnvironmentSpec replication_environment(const ExperimentConfig& cfg,
                                               Index replication_index) {
  EnvironmentSpec env = cfg.environment;
  const std::uint64_t seed = replication_seed(cfg.base_seed, replication_index);
  env.theta_seed = stream_seed(seed, Stream::kTheta);
  env.context_seed = stream_seed(seed, Stream::kContext);
  env.noise_seed = stream_seed(seed, Stream::kNoise);
  return env;
}

inline std::uint64_t replication_tie_seed(const ExperimentConfig& cfg, Index replication_index) {
  return stream_seed(replication_seed(cfg.base_seed, replication_index), Stream::kTieBreak);
}

/// Plays `cfg.horizon` rounds of one replication. `observer`, when given, is
/// called after every round with the policy and the fresh record.
template <typename Observer>
Replication run_replication(const ExperimentConfig& cfg, Index replication_index,
                            Observer&& observer) {
  validate(cfg);
  const EnvironmentSpec env = replication_environment(cfg, replication_index);
  Replication out;
  out.truth = generate_theta(env);
  const GroundTruth& truth = out.truth;
  auto policy = make_policy(cfg.policy_params(), truth,
                            replication_tie_seed(cfg, replication_index));

  out.rounds.reserve(static_cast<std::size_t>(cfg.horizon));
  double cum = 0.0;
  for (Index t = 1; t <= cfg.horizon; ++t) {
    const ContextSet contexts = generate_contexts(env, t);
    const ArmChoice choice = policy->select_arm(contexts);
    const double reward = sample_reward(truth, contexts.row(choice.arm_index).transpose(), env, t);
    const double regret = instantaneous_regret(truth, contexts, choice.arm_index);
    policy->update(choice, contexts, reward);

    RoundRecord rec;
    rec.t = t;
    rec.chosen_arm = choice.arm_index;
    rec.reward = reward;
    rec.inst_regret = regret;
    cum += regret;
    rec.cum_regret = cum;
    const IndexSet est = policy->estimated_support();
    rec.fp = static_cast<Index>(difference_size(est, truth.support));
    rec.fn = static_cast<Index>(difference_size(truth.support, est));
    rec.support_size = static_cast<Index>(est.size());
    rec.l2_err = (policy->theta_hat() - truth.theta).norm();
    rec.lambda_t = policy->last_lambda();
    rec.nonconverged = policy->nonconverged();
    out.rounds.push_back(rec);
    observer(*policy, rec);
  }
  out.solver = {policy->lasso_calls(), policy->nonconverged(), policy->max_kkt_residual()};
  return out;
}

inline Replication run_replication(const ExperimentConfig& cfg, Index replication_index) {
  return run_replication(cfg, replication_index, [](const Policy&, const RoundRecord&) {});
}

/// All replications of `cfg`, spread over `workers` threads (0 = cfg.workers).
/// Results are ordered by replication index and do not depend on the worker
/// count.
inline std::vector<Replication> run_experiment(const ExperimentConfig& cfg, int workers = 0) {
  validate(cfg);
  if (workers <= 0) workers = cfg.workers;
  const auto n = static_cast<std::size_t>(cfg.replications);
  std::vector<Replication> results(n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;

  auto work = [&] {
    for (std::size_t r; (r = next.fetch_add(1)) < n;) {
      try {
        results[r] = run_replication(cfg, static_cast<Index>(r));
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const auto count = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    for (std::size_t w = 1; w < count; ++w) pool.emplace_back(work);
    work();
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

// ---------------------------------------------------------------------------
// Aggregation

struct MetricSeries {
  std::string name;
  std::vector<double> mean;
  std::vector<double> std_error;

  bool operator==(const MetricSeries&) const = default;
};

struct AggregateSeries {
  std::vector<Index> t;
  std::vector<MetricSeries> metrics;
  Index replications = 0;

  const MetricSeries& metric(const std::string& name) const {
    for (const auto& m : metrics)
      if (m.name == name) return m;
    throw LengthMismatch("no metric named '" + name + "'");
  }

  // Mean of `name` at round `round`.
  double mean_at(const std::string& name, Index round) const {
    for (std::size_t i = 0; i < t.size(); ++i)
      if (t[i] == round) return metric(name).mean[i];
    throw LengthMismatch("round " + std::to_string(round) + " not in series");
  }

  bool operator==(const AggregateSeries&) const = default;
};

struct MetricDef {
  const char* name;
  double (*get)(const RoundRecord&);
};

inline const std::vector<MetricDef>& metric_defs() {
  static const std::vector<MetricDef> defs = {
      {"reward", [](const RoundRecord& r) { return r.reward; }},
      {"inst_regret", [](const RoundRecord& r) { return r.inst_regret; }},
      {"cum_regret", [](const RoundRecord& r) { return r.cum_regret; }},
      {"fp", [](const RoundRecord& r) { return static_cast<double>(r.fp); }},
      {"fn", [](const RoundRecord& r) { return static_cast<double>(r.fn); }},
      {"l2_err", [](const RoundRecord& r) { return r.l2_err; }},
      {"lambda_t", [](const RoundRecord& r) { return r.lambda_t; }},
      {"support_size", [](const RoundRecord& r) { return static_cast<double>(r.support_size); }},
      {"nonconverged", [](const RoundRecord& r) { return static_cast<double>(r.nonconverged); }},
  };
  return defs;
}

/// Per-round mean and standard error (sample stddev / sqrt(n); 0 when n = 1)
/// of every metric, keeping rounds t with t % log_every == 0 plus the first
/// and last round.
inline AggregateSeries aggregate(const std::vector<std::vector<RoundRecord>>& runs,
                                 Index log_every = 1) {
  AggregateSeries out;
  out.replications = static_cast<Index>(runs.size());
  for (const auto& d : metric_defs()) out.metrics.push_back({d.name, {}, {}});
  if (runs.empty()) return out;
  const std::size_t T = runs.front().size();
  for (const auto& r : runs)
    if (r.size() != T)
      throw LengthMismatch("replications have different horizons (" + std::to_string(T) +
                           " vs " + std::to_string(r.size()) + ")");
  const double n = static_cast<double>(runs.size());
  for (std::size_t i = 0; i < T; ++i) {
    const Index t = runs.front()[i].t;
    if (!(t % log_every == 0 || i == 0 || i + 1 == T)) continue;
    out.t.push_back(t);
    for (std::size_t m = 0; m < metric_defs().size(); ++m) {
      const auto get = metric_defs()[m].get;
      double sum = 0.0;
      for (const auto& r : runs) sum += get(r[i]);
      const double mean = sum / n;
      double se = 0.0;
      if (runs.size() > 1) {
        double ss = 0.0;
        for (const auto& r : runs) ss += (get(r[i]) - mean) * (get(r[i]) - mean);
        se = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
      }
      out.metrics[m].mean.push_back(mean);
      out.metrics[m].std_error.push_back(se);
    }
  }
  return out;
}

inline AggregateSeries aggregate(const std::vector<Replication>& reps, Index log_every = 1) {
  std::vector<std::vector<RoundRecord>> runs;
  runs.reserve(reps.size());
  for (const auto& r : reps) runs.push_back(r.rounds);
  return aggregate(runs, log_every);
}

}  // namespace thlasso::harness
