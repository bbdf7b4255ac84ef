#pragma once

// Synthetic sparse contextual bandit: sparse theta with Uniform[1, 2]
// nonzeros, equicorrelated Gaussian contexts clipped to an l2 ball, and
// Gaussian reward noise.
//
// Every draw is a pure function of (spec, seed, round): round t's contexts
// come from an engine seeded by split_seed(context_seed, {t}) and its noise
// from split_seed(noise_seed, {t}), so two policies run on the same seeds see
// the same contexts and the same noise regardless of what they pick.

#include "thlasso/error.hpp"
#include "thlasso/random.hpp"
#include "thlasso/types.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>

namespace thlasso {

enum class ClipMode {
  kBall,    // rescale rows longer than sA down to sA
  kSphere,  // rescale every nonzero row to length sA
};

enum class SupportPlacement {
  kRandom,  // uniform over size-s0 subsets
  kPrefix,  // coordinates 0 .. s0-1
};

struct EnvironmentSpec {
  Index K = 2;
  Index d = 1000;
  Index s0 = 5;
  double sA = 10.0;  // +inf disables clipping
  double rho2 = 0.7;
  double sigma = 1.0;
  ClipMode clip_mode = ClipMode::kBall;
  SupportPlacement support = SupportPlacement::kRandom;
  std::uint64_t theta_seed = 0;
  std::uint64_t context_seed = 1;
  std::uint64_t noise_seed = 2;
};

struct GroundTruth {
  ParameterVector theta;
  IndexSet support;
  double theta_min = 0.0;
};

inline void validate(const EnvironmentSpec& spec) {
  if (spec.K < 2) throw InvalidSpec("K must be >= 2, got " + std::to_string(spec.K));
  if (spec.d < 1) throw InvalidSpec("d must be >= 1, got " + std::to_string(spec.d));
  if (spec.s0 < 1 || spec.s0 > spec.d)
    throw InvalidSpec("s0 must lie in [1, d], got s0 = " +
                      std::to_string(spec.s0) + ", d = " + std::to_string(spec.d));
  if (!(spec.sA > 0.0))
    throw InvalidSpec("sA must be > 0 (or inf), got " + std::to_string(spec.sA));
  if (!(spec.rho2 >= 0.0 && spec.rho2 < 1.0))
    throw InvalidCorrelation("rho2 must lie in [0, 1), got " +
                             std::to_string(spec.rho2));
  if (!(spec.sigma >= 0.0) || !std::isfinite(spec.sigma))
    throw InvalidSpec("sigma must be finite and >= 0");
}

inline GroundTruth make_ground_truth(ParameterVector theta) {
  GroundTruth g;
  g.support = support_of(theta);
  g.theta_min = std::numeric_limits<double>::infinity();
  for (Index j : g.support) g.theta_min = std::min(g.theta_min, std::abs(theta[j]));
  if (g.support.empty()) g.theta_min = 0.0;
  g.theta = std::move(theta);
  return g;
}

inline GroundTruth generate_theta(const EnvironmentSpec& spec) {
  if (spec.d < 1 || spec.s0 < 1 || spec.s0 > spec.d)
    throw InvalidSpec("s0 must lie in [1, d], got s0 = " +
                      std::to_string(spec.s0) + ", d = " + std::to_string(spec.d));
  Engine rng(spec.theta_seed);

  IndexSet support(static_cast<std::size_t>(spec.d));
  std::iota(support.begin(), support.end(), Index{0});
  if (spec.support == SupportPlacement::kRandom) {
    // Partial Fisher-Yates: the first s0 slots end up a uniform subset.
    for (Index i = 0; i < spec.s0; ++i) {
      std::uniform_int_distribution<Index> pick(i, spec.d - 1);
      std::swap(support[static_cast<std::size_t>(i)],
                support[static_cast<std::size_t>(pick(rng))]);
    }
  }
  support.resize(static_cast<std::size_t>(spec.s0));
  support = normalized(std::move(support));

  std::uniform_real_distribution<double> value(1.0, 2.0);
  ParameterVector theta = ParameterVector::Zero(spec.d);
  for (Index j : support) theta[j] = value(rng);
  return make_ground_truth(std::move(theta));
}

/// Contexts before clipping: for each coordinate, a K-vector from N(0, V)
/// with V = (1 - rho2) I + rho2 11^T.
inline ContextSet generate_raw_contexts(const EnvironmentSpec& spec, Index t) {
  if (!(spec.rho2 >= 0.0 && spec.rho2 < 1.0))
    throw InvalidCorrelation("rho2 must lie in [0, 1), got " +
                             std::to_string(spec.rho2));
  Engine rng(split_seed(spec.context_seed, {static_cast<std::uint64_t>(t)}));
  std::normal_distribution<double> normal(0.0, 1.0);
  const double shared = std::sqrt(spec.rho2);
  const double own = std::sqrt(1.0 - spec.rho2);

  ContextSet ctx(spec.K, spec.d);
  for (Index i = 0; i < spec.d; ++i) {
    const double common = normal(rng);
    for (Index k = 0; k < spec.K; ++k) ctx(k, i) = shared * common + own * normal(rng);
  }
  return ctx;
}

inline void clip_rows(ContextSet& ctx, double sA, ClipMode mode) {
  if (!std::isfinite(sA)) return;
  for (Index k = 0; k < ctx.rows(); ++k) {
    const double norm = ctx.row(k).norm();
    if (norm == 0.0) continue;
    if (mode == ClipMode::kSphere || norm > sA) ctx.row(k) *= sA / norm;
  }
}

inline ContextSet generate_contexts(const EnvironmentSpec& spec, Index t) {
  ContextSet ctx = generate_raw_contexts(spec, t);
  clip_rows(ctx, spec.sA, spec.clip_mode);
  return ctx;
}

inline double sample_reward(const GroundTruth& truth,
                            const Eigen::Ref<const Eigen::VectorXd>& chosen_context,
                            const EnvironmentSpec& spec, Index t) {
  if (chosen_context.size() != truth.theta.size())
    throw DimensionMismatch("context of length " +
                            std::to_string(chosen_context.size()) +
                            " for theta of length " +
                            std::to_string(truth.theta.size()));
  Engine rng(split_seed(spec.noise_seed, {static_cast<std::uint64_t>(t)}));
  std::normal_distribution<double> normal(0.0, 1.0);
  const double eps = normal(rng);
  return chosen_context.dot(truth.theta) + spec.sigma * eps;
}

inline double instantaneous_regret(const GroundTruth& truth,
                                   const ContextSet& contexts, Index chosen) {
  if (chosen < 0 || chosen >= contexts.rows())
    throw DimensionMismatch("arm " + std::to_string(chosen) + " outside [0, " +
                            std::to_string(contexts.rows()) + ")");
  const Eigen::VectorXd scores = contexts * truth.theta;
  return std::max(scores.maxCoeff() - scores[chosen], 0.0);
}

}  // namespace thlasso
