#pragma once

// Probes for the problem conditions the regret analysis relies on
// (compatibility constant, restricted minimum eigenvalue, margin), and
// calculators for the constants and regret upper bounds of the analysis.

#include "thlasso/environment.hpp"
#include "thlasso/error.hpp"
#include "thlasso/random.hpp"
#include "thlasso/types.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <thread>
#include <utility>
#include <vector>

namespace thlasso {

// ---------------------------------------------------------------------------
// Compatibility constant
//
//   phi^2(M, S0) = min { s0 x^T M x / ||x_S0||_1^2 : ||x_S0^c||_1 <= 3 ||x_S0||_1,
//                        x_S0 != 0 }

struct CompatibilityQuery {
  Eigen::MatrixXd M;
  IndexSet S0;
};

struct CompatibilityOptions {
  // Exhaustive lattice search is used up to this dimension.
  Index max_grid_dim = 6;
  int samples = 20000;
  std::uint64_t seed = 0x636f6d70ULL;
  int refine_starts = 8;
};

struct CompatibilityEstimate {
  double value = 0.0;
  // true: exhaustive lattice over {-r..r}^d followed by local refinement.
  // false: random cone sampling with refinement.
  // Either way the value is attained by a feasible point, so it is an upper
  // bound on the true constant.
  bool exhaustive = true;
};

namespace detail {

class CompatibilityRatio {
 public:
  CompatibilityRatio(const Eigen::MatrixXd& M, const IndexSet& S0)
      : M_(M), in_support_(static_cast<std::size_t>(M.rows()), false),
        s0_(static_cast<double>(S0.size())) {
    for (Index j : S0) in_support_[static_cast<std::size_t>(j)] = true;
  }

  // +inf when x is outside the cone or has no mass on S0.
  double operator()(const Eigen::VectorXd& x) const {
    double on = 0.0, off = 0.0;
    for (Index j = 0; j < x.size(); ++j)
      (in_support_[static_cast<std::size_t>(j)] ? on : off) += std::abs(x[j]);
    if (on == 0.0 || off > 3.0 * on) return std::numeric_limits<double>::infinity();
    return std::max(s0_ * x.dot(M_ * x) / (on * on), 0.0);
  }

  bool in_support(Index j) const { return in_support_[static_cast<std::size_t>(j)]; }

 private:
  const Eigen::MatrixXd& M_;
  std::vector<bool> in_support_;
  double s0_;
};

// Compass search; only ever moves to feasible points with a lower ratio.
inline double refine(const CompatibilityRatio& ratio, Eigen::VectorXd x,
                     double step) {
  double best = ratio(x);
  x /= x.lpNorm<1>();
  while (step > 1e-9) {
    bool moved = false;
    for (Index j = 0; j < x.size(); ++j) {
      for (double sgn : {1.0, -1.0}) {
        x[j] += sgn * step;
        const double v = ratio(x);
        if (v < best) {
          best = v;
          moved = true;
        } else {
          x[j] -= sgn * step;
        }
      }
    }
    if (!moved) step *= 0.5;
  }
  return best;
}

inline void check_query(const CompatibilityQuery& q) {
  if (q.M.rows() != q.M.cols() || q.M.rows() < 1)
    throw DimensionMismatch("compatibility matrix must be square and nonempty");
  if (!q.M.allFinite()) throw NumericalDomain("compatibility matrix has non-finite entries");
  if ((q.M - q.M.transpose()).cwiseAbs().maxCoeff() > 1e-10)
    throw NumericalDomain("compatibility matrix is not symmetric");
  if (q.S0.empty()) throw InvalidSpec("S0 must be nonempty");
  for (Index j : q.S0)
    if (j < 0 || j >= q.M.rows()) throw DimensionMismatch("S0 index out of range");
}

}  // namespace detail

inline CompatibilityEstimate compatibility_constant(const CompatibilityQuery& query,
                                                    int grid_resolution,
                                                    const CompatibilityOptions& opts = {}) {
  detail::check_query(query);
  const IndexSet S0 = normalized(query.S0);
  const Index d = query.M.rows();
  const detail::CompatibilityRatio ratio(query.M, S0);

  CompatibilityEstimate out;
  if (d <= opts.max_grid_dim) {
    if (grid_resolution < 1) throw InvalidSpec("grid resolution must be >= 1");
    const int r = grid_resolution;
    std::vector<int> digits(static_cast<std::size_t>(d), -r);
    Eigen::VectorXd x(d), best_x;
    double best = std::numeric_limits<double>::infinity();
    for (;;) {
      for (Index j = 0; j < d; ++j) x[j] = digits[static_cast<std::size_t>(j)];
      const double v = ratio(x);
      if (v < best) {
        best = v;
        best_x = x;
      }
      std::size_t pos = 0;
      while (pos < digits.size() && digits[pos] == r) digits[pos++] = -r;
      if (pos == digits.size()) break;
      ++digits[pos];
    }
    out.value = detail::refine(ratio, best_x, 0.5 / r);
    out.exhaustive = true;
    return out;
  }

  Engine rng(opts.seed);
  std::exponential_distribution<double> mag(1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  std::vector<std::pair<double, Eigen::VectorXd>> pool;
  Eigen::VectorXd x(d);
  for (int n = 0; n < opts.samples; ++n) {
    double on = 0.0, off = 0.0;
    for (Index j = 0; j < d; ++j) {
      x[j] = (coin(rng) ? 1.0 : -1.0) * mag(rng);
      (ratio.in_support(j) ? on : off) += std::abs(x[j]);
    }
    // Off-support mass: none half of the time, else a uniform fraction of
    // the cone's budget.
    const double budget = coin(rng) ? 0.0 : 3.0 * on * unif(rng);
    for (Index j = 0; j < d; ++j)
      if (!ratio.in_support(j)) x[j] = off > 0.0 ? x[j] * budget / off : 0.0;
    pool.emplace_back(ratio(x), x);
    if (pool.size() > static_cast<std::size_t>(4 * opts.refine_starts)) {
      std::nth_element(pool.begin(), pool.begin() + opts.refine_starts, pool.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
      pool.resize(static_cast<std::size_t>(opts.refine_starts));
    }
  }
  std::sort(pool.begin(), pool.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pool.size() && i < static_cast<std::size_t>(opts.refine_starts); ++i)
    best = std::min(best, detail::refine(ratio, pool[i].second, 0.1));
  out.value = best;
  out.exhaustive = false;
  return out;
}

// ---------------------------------------------------------------------------

/// lambda_min of (1/t) sum_s A_s(S) A_s(S)^T restricted to `support`.
inline double restricted_min_eigenvalue(const Eigen::Ref<const DesignMatrix>& history,
                                        const IndexSet& support) {
  if (support.empty()) throw InvalidSpec("support must be nonempty");
  if (history.rows() < 1) throw InvalidSpec("history must be nonempty");
  for (Index j : support)
    if (j < 0 || j >= history.cols()) throw DimensionMismatch("support index out of range");
  const Eigen::MatrixXd cols = history(Eigen::all, support);
  const Eigen::MatrixXd gram =
      (cols.transpose() * cols) / static_cast<double>(history.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

// ---------------------------------------------------------------------------

struct MarginPoint {
  double kappa = 0.0;
  double probability = 0.0;
};

/// Monte-Carlo estimate of Pr(0 < |<A_k - A_k', theta>| <= kappa), pooled over
/// all arm pairs. Sample n uses the contexts of round n + 1 of an environment
/// seeded with `seed`, so the result does not depend on `workers`.
inline std::vector<MarginPoint> margin_probe(const EnvironmentSpec& spec,
                                             const GroundTruth& truth,
                                             const std::vector<double>& kappa_grid,
                                             Index n_samples, std::uint64_t seed = 0x6d617267ULL,
                                             int workers = 1) {
  validate(spec);
  for (std::size_t i = 0; i < kappa_grid.size(); ++i)
    if (!(kappa_grid[i] > 0.0) || (i > 0 && !(kappa_grid[i] > kappa_grid[i - 1])))
      throw InvalidSpec("kappa grid must be positive and increasing");
  if (n_samples < 1) throw InvalidSpec("n_samples must be >= 1");

  EnvironmentSpec probe = spec;
  probe.context_seed = seed;
  const std::size_t m = kappa_grid.size();
  workers = std::max(1, workers);

  auto count_range = [&](Index lo, Index hi, std::vector<std::int64_t>& counts) {
    for (Index n = lo; n < hi; ++n) {
      const Eigen::VectorXd scores = generate_contexts(probe, n + 1) * truth.theta;
      for (Index k = 0; k < scores.size(); ++k)
        for (Index k2 = k + 1; k2 < scores.size(); ++k2) {
          const double gap = std::abs(scores[k] - scores[k2]);
          if (gap == 0.0) continue;
          auto it = std::lower_bound(kappa_grid.begin(), kappa_grid.end(), gap);
          for (auto i = static_cast<std::size_t>(it - kappa_grid.begin()); i < m; ++i)
            ++counts[i];
        }
    }
  };

  std::vector<std::vector<std::int64_t>> partial(static_cast<std::size_t>(workers),
                                                 std::vector<std::int64_t>(m, 0));
  {
    std::vector<std::jthread> pool;
    const Index chunk = (n_samples + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const Index lo = std::min<Index>(n_samples, w * chunk);
      const Index hi = std::min<Index>(n_samples, lo + chunk);
      pool.emplace_back([&, w, lo, hi] { count_range(lo, hi, partial[static_cast<std::size_t>(w)]); });
    }
  }

  const double pairs = 0.5 * static_cast<double>(spec.K * (spec.K - 1));
  std::vector<MarginPoint> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    std::int64_t total = 0;
    for (const auto& p : partial) total += p[i];
    out[i] = {kappa_grid[i], static_cast<double>(total) /
                                 (pairs * static_cast<double>(n_samples))};
  }
  return out;
}

// ---------------------------------------------------------------------------
// Regret upper bounds

// phi0_sq, alpha and Cm are unknown problem constants; callers supply them.
struct TheoryConstants {
  double C0 = 0.5;
  long tau = 0;  // cold-start length
  long h0 = 1;
  double phi0_sq = 1.0;
  double alpha = 1.0;
  double Cm = 1.0;
  double sigma = 1.0;
};

inline TheoryConstants derive_theory_constants(double phi0_sq, double alpha, double Cm,
                                               double sigma, Index s0, double sA, Index d) {
  if (!(phi0_sq > 0.0) || !(alpha > 0.0) || !(Cm > 0.0) || !(sigma > 0.0) ||
      !(sA > 0.0) || !std::isfinite(sA) || s0 < 1 || d < 2)
    throw InvalidConstants("phi0_sq, alpha, Cm, sigma, sA must be positive and finite; s0 >= 1; d >= 2");
  TheoryConstants c;
  c.phi0_sq = phi0_sq;
  c.alpha = alpha;
  c.Cm = Cm;
  c.sigma = sigma;
  const double s0d = static_cast<double>(s0);
  const double dd = static_cast<double>(d);
  c.C0 = std::min(0.5, phi0_sq / (256.0 * s0d * sA * sA));
  const double cold = std::floor(2.0 * std::log(2.0 * dd * dd) / (c.C0 * c.C0));
  const double loglog = std::floor(std::log(std::log(dd)) * std::log(dd));
  c.tau = static_cast<long>(std::max(cold, loglog));
  const double widened = s0d + 2.0 * std::sqrt(s0d) / phi0_sq;
  c.h0 = static_cast<long>(std::floor(std::sqrt(std::log(4.0 * widened)) + 1.0));
  return c;
}

/// Regret upper bound at horizon T: the margin-condition bound when
/// with_margin is set (T >= 2), else the margin-free sqrt(T log T) bound.
/// s2 bounds ||theta||_2.
inline double theorem_bound(const TheoryConstants& c, const EnvironmentSpec& spec, double s2,
                            Index T, bool with_margin) {
  const double sA = spec.sA;
  if (!(c.C0 > 0.0) || c.tau < 0 || c.h0 < 1 || !(c.phi0_sq > 0.0) || !(c.alpha > 0.0) ||
      !(c.sigma > 0.0) || (with_margin && !(c.Cm > 0.0)))
    throw InvalidConstants("theory constants must be positive");
  if (!(sA > 0.0) || !std::isfinite(sA) || !(s2 > 0.0) || spec.s0 < 1 || spec.K < 1)
    throw InvalidConstants("sA, s2 must be positive and finite; s0, K >= 1");
  if (T < (with_margin ? 2 : 1)) throw InvalidConstants("horizon too short");

  constexpr double pi2_3 = std::numbers::pi * std::numbers::pi / 3.0;
  const double s0 = static_cast<double>(spec.s0);
  const double arms = static_cast<double>(spec.K - 1);
  const double widened = s0 + 2.0 * std::sqrt(s0) / c.phi0_sq;
  const double Td = static_cast<double>(T);
  const double h0 = static_cast<double>(c.h0);

  const double cold = 2.0 * sA * s2 * static_cast<double>(c.tau);
  if (with_margin) {
    const double log_coef = 352.0 * c.sigma * c.sigma * std::pow(sA, 4) * c.Cm * arms *
                            h0 * h0 * h0 * widened / (c.alpha * c.alpha);
    const double tail = 2.0 * arms * sA * s2 *
                        (pi2_3 + 2.0 / (c.C0 * c.C0) + widened * 10.0 * sA * sA / c.alpha);
    return cold + log_coef * (std::log(Td) + 1.0) + tail;
  }
  const double sqrt_coef = 16.0 * sA * sA * arms * c.sigma * std::sqrt(widened) / c.alpha;
  const double tail = 2.0 * arms * sA * s2 *
                      ((pi2_3 + 10.0 * sA * sA / c.alpha) * widened + pi2_3 +
                       2.0 / (c.C0 * c.C0));
  return cold + sqrt_coef * std::sqrt(Td * std::log(Td)) + tail;
}

}  // namespace thlasso
