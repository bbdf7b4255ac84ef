#pragma once

// LASSO by an active-set method (with coordinate descent as a fallback) and
// column-restricted least squares.
//
// The LASSO objective throughout is
//
//   f(theta) = (1/t) ||R - A theta||_2^2 + lambda ||theta||_1
//
// with t the number of rows of A. The solver works on the sufficient
// statistics G = A^T A, c = A^T R (see GramSystem), which lets a caller that
// appends one observation per round keep them up to date in O(d^2) and warm
// start the next fit from the previous solution.

#include "thlasso/error.hpp"
#include "thlasso/types.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace thlasso {

inline double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

struct LassoOptions {
  double tol = 1e-7;
  int max_iter = 10000;  // face solves, insertions and sweeps
  bool record_objective = false;
};

struct LassoSolution {
  ParameterVector theta;
  double objective = 0.0;
  int iterations = 0;
  double kkt_residual = 0.0;
  // false when max_iter was hit (or descent stalled) with kkt_residual > tol;
  // theta is then the last iterate.
  bool converged = true;
  // Objective after each step, when LassoOptions::record_objective is set.
  std::vector<double> objective_trace;
};

/// Running sufficient statistics (A^T A, A^T R, R^T R, t) of a regression.
class GramSystem {
 public:
  GramSystem() = default;

  explicit GramSystem(Index dim)
      : gram_(Eigen::MatrixXd::Zero(dim, dim)),
        cross_(Eigen::VectorXd::Zero(dim)) {}

  GramSystem(const Eigen::Ref<const DesignMatrix>& A,
             const Eigen::Ref<const ResponseVector>& R) {
    if (A.rows() != R.size())
      throw DimensionMismatch("design has " + std::to_string(A.rows()) +
                              " rows but response has " +
                              std::to_string(R.size()) + " entries");
    gram_.noalias() = A.transpose() * A;
    cross_.noalias() = A.transpose() * R;
    response_sq_ = R.squaredNorm();
    rows_ = A.rows();
  }

  void add_row(const Eigen::Ref<const Eigen::VectorXd>& a, double r) {
    if (a.size() != dim())
      throw DimensionMismatch("row of length " + std::to_string(a.size()) +
                              " added to system of dimension " +
                              std::to_string(dim()));
    gram_.noalias() += a * a.transpose();
    cross_.noalias() += r * a;
    response_sq_ += r * r;
    ++rows_;
  }

  Index dim() const { return cross_.size(); }
  Index rows() const { return rows_; }
  const Eigen::MatrixXd& gram() const { return gram_; }
  const Eigen::VectorXd& cross() const { return cross_; }
  double response_sq() const { return response_sq_; }

 private:
  Eigen::MatrixXd gram_;
  Eigen::VectorXd cross_;
  double response_sq_ = 0.0;
  Index rows_ = 0;
};

namespace detail {


inline void check_lambda(double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw NumericalDomain("lambda must be finite and >= 0, got " +
                          std::to_string(lambda));
}

// Largest violation of the subgradient optimality conditions given the
// gradient of the smooth part.
inline double kkt_from_gradient(const Eigen::VectorXd& grad,
                                const ParameterVector& theta, double lambda) {
  double worst = 0.0;
  for (Index j = 0; j < theta.size(); ++j) {
    double v;
    if (theta[j] == 0.0)
      v = std::max(std::abs(grad[j]) - lambda, 0.0);
    else
      v = std::abs(grad[j] + lambda * (theta[j] > 0.0 ? 1.0 : -1.0));
    worst = std::max(worst, v);
  }
  return worst;
}

// G * theta, skipping zero coordinates.
inline Eigen::VectorXd gram_times(const Eigen::MatrixXd& G,
                                  const ParameterVector& theta) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(G.rows());
  for (Index j = 0; j < theta.size(); ++j)
    if (theta[j] != 0.0) out.noalias() += theta[j] * G.col(j);
  return out;
}

inline double gram_objective(const GramSystem& sys, const ParameterVector& theta,
                             const Eigen::VectorXd& g_theta, double lambda) {
  const double t = static_cast<double>(sys.rows());
  double quad = theta.dot(g_theta) - 2.0 * theta.dot(sys.cross()) +
                sys.response_sq();
  quad = std::max(quad, 0.0);
  return quad / t + lambda * theta.lpNorm<1>();
}

}  // namespace detail

inline double lasso_objective(const Eigen::Ref<const DesignMatrix>& A,
                              const Eigen::Ref<const ResponseVector>& R,
                              const ParameterVector& theta, double lambda) {
  const double t = static_cast<double>(A.rows());
  return (R - A * theta).squaredNorm() / t + lambda * theta.lpNorm<1>();
}

inline double lasso_objective(const GramSystem& sys,
                              const ParameterVector& theta, double lambda) {
  return detail::gram_objective(sys, theta, detail::gram_times(sys.gram(), theta),
                                lambda);
}

inline double kkt_residual(const Eigen::Ref<const DesignMatrix>& A,
                           const Eigen::Ref<const ResponseVector>& R,
                           const ParameterVector& theta, double lambda) {
  const double t = static_cast<double>(A.rows());
  Eigen::VectorXd grad = (2.0 / t) * (A.transpose() * (A * theta - R));
  return detail::kkt_from_gradient(grad, theta, lambda);
}

inline double kkt_residual(const GramSystem& sys, const ParameterVector& theta,
                           double lambda) {
  const double t = static_cast<double>(sys.rows());
  Eigen::VectorXd grad =
      (2.0 / t) * (detail::gram_times(sys.gram(), theta) - sys.cross());
  return detail::kkt_from_gradient(grad, theta, lambda);
}

/// Cholesky factor L (G_AA = L L^T) of the gram restricted to an ordered
/// active set A, kept up to date under insertion and deletion of active
/// columns and under rank-one growth of G, each in O(|A|^2).
class ActiveCholesky {
  auto lower() const {
    return L_.topLeftCorner(size(), size()).triangularView<Eigen::Lower>();
  }

 public:
  const std::vector<Index>& active() const { return active_; }
  Index size() const { return static_cast<Index>(active_.size()); }
  void clear() { active_.clear(); }

  /// Appends column j. Returns false, leaving the factor unchanged, when
  /// G_jj is (numerically) spanned by the active columns.
  bool insert(const Eigen::MatrixXd& G, Index j) {
    const Index m = size();
    const double gjj = G(j, j);
    if (!(gjj > 0.0)) return false;
    Eigen::VectorXd w = G(active_, j);
    if (m > 0) lower().solveInPlace(w);
    const double l2 = gjj - w.squaredNorm();
    if (!(l2 > kDependence * gjj)) return false;
    if (L_.rows() <= m) {
      const Index cap = std::max<Index>(16, 2 * (m + 1));
      Eigen::MatrixXd grown = Eigen::MatrixXd::Zero(cap, cap);
      grown.topLeftCorner(m, m) = L_.topLeftCorner(m, m);
      L_.swap(grown);
    }
    L_.row(m).head(m) = w.transpose();
    L_(m, m) = std::sqrt(l2);
    active_.push_back(j);
    return true;
  }

  /// Removes the active column at position pos.
  void erase(Index pos) {
    const Index m = size();
    for (Index r = pos; r + 1 < m; ++r) L_.row(r).head(m) = L_.row(r + 1).head(m);
    // Rows pos..m-2 now stick out one column past the diagonal; rotate the
    // columns pairwise to restore the triangle.
    for (Index i = pos; i + 1 < m; ++i) {
      const double a = L_(i, i), b = L_(i, i + 1);
      const double r = std::hypot(a, b);
      if (r == 0.0) continue;
      const double c = a / r, s = b / r;
      for (Index q = i; q + 1 < m; ++q) {
        const double x = L_(q, i), y = L_(q, i + 1);
        L_(q, i) = c * x + s * y;
        L_(q, i + 1) = -s * x + c * y;
      }
    }
    L_.row(m - 1).head(m).setZero();
    L_.col(m - 1).head(m).setZero();
    active_.erase(active_.begin() + pos);
  }

  /// Accounts for G += a a^T (a is the full-length row).
  void rank_one_update(const Eigen::Ref<const Eigen::VectorXd>& a) {
    const Index m = size();
    if (m == 0) return;
    Eigen::VectorXd v = a(active_);
    for (Index k = 0; k < m; ++k) {
      const double lkk = L_(k, k);
      const double r = std::hypot(lkk, v[k]);
      const double c = r / lkk, s = v[k] / lkk;
      L_(k, k) = r;
      for (Index i = k + 1; i < m; ++i) {
        L_(i, k) = (L_(i, k) + s * v[i]) / c;
        v[i] = c * v[i] - s * L_(i, k);
      }
    }
  }

  /// G_AA^{-1} b.
  Eigen::VectorXd solve(Eigen::VectorXd b) const {
    if (size() == 0) return b;
    lower().solveInPlace(b);
    L_.topLeftCorner(size(), size()).transpose().triangularView<Eigen::Upper>().solveInPlace(b);
    return b;
  }

  void rebuild(const Eigen::MatrixXd& G) {
    std::vector<Index> order;
    order.swap(active_);
    for (Index j : order) insert(G, j);
  }

 private:
  static constexpr double kDependence = 1e-10;

  std::vector<Index> active_;
  Eigen::MatrixXd L_;
};

/// State carried between fits on a growing GramSystem: the active-set
/// factor of the last solution. Call add_row alongside GramSystem::add_row.
class LassoWorkspace {
 public:
  void add_row(const Eigen::Ref<const Eigen::VectorXd>& a) {
    if (rows_ < 0) return;
    factor_.rank_one_update(a);
    ++rows_;
  }

  // Valid factor for `sys`, reset if the workspace lost track of it.
  ActiveCholesky& factor_for(const GramSystem& sys) {
    if (rows_ != sys.rows()) {
      factor_.clear();
      rows_ = sys.rows();
    }
    return factor_;
  }

 private:
  ActiveCholesky factor_;
  Index rows_ = -1;
};

namespace detail {

// Cyclic coordinate descent from sol.theta, alternating full sweeps with
// sweeps over the nonzero set only. Used when the active-set method cannot
// make progress.
inline void coordinate_descent(const GramSystem& sys, double lambda, LassoSolution& sol,
                               const LassoOptions& opts,
                               const std::function<void(const Eigen::VectorXd&)>& record) {
  const Index d = sys.dim();
  const Eigen::MatrixXd& G = sys.gram();
  const Eigen::VectorXd& c = sys.cross();
  const double t = static_cast<double>(sys.rows());
  const double scale = 2.0 / t;
  const double gamma = 0.5 * t * lambda;
  ParameterVector& theta = sol.theta;
  Eigen::VectorXd g_theta = gram_times(G, theta);
  auto full_kkt = [&] { return kkt_from_gradient(scale * (g_theta - c), theta, lambda); };

  std::vector<Index> active;
  Eigen::MatrixXd g_aa;
  Eigen::VectorXd th_a, gt_a, c_a;
  while (sol.iterations < opts.max_iter) {
    double max_delta = 0.0;
    for (Index j = 0; j < d; ++j) {
      const double gjj = G(j, j);
      double next = 0.0;
      if (gjj > 0.0) next = soft_threshold(c[j] - g_theta[j] + gjj * theta[j], gamma) / gjj;
      const double delta = next - theta[j];
      if (delta != 0.0) {
        g_theta.noalias() += delta * G.col(j);
        theta[j] = next;
        max_delta = std::max(max_delta, std::abs(delta));
      }
    }
    ++sol.iterations;
    record(g_theta);
    if (full_kkt() <= opts.tol || max_delta == 0.0) {
      // Incremental updates drift; certify against a fresh product.
      g_theta = gram_times(G, theta);
      if (full_kkt() <= opts.tol || max_delta == 0.0) break;
    }

    active.clear();
    for (Index j = 0; j < d; ++j)
      if (theta[j] != 0.0) active.push_back(j);
    const auto m = static_cast<Index>(active.size());
    if (m == 0) continue;
    g_aa = G(active, active);
    th_a = theta(active);
    gt_a = g_theta(active);
    c_a = c(active);
    while (sol.iterations < opts.max_iter) {
      double inner_delta = 0.0;
      for (Index i = 0; i < m; ++i) {
        const double gii = g_aa(i, i);
        const double next =
            gii > 0.0 ? soft_threshold(c_a[i] - gt_a[i] + gii * th_a[i], gamma) / gii : 0.0;
        const double delta = next - th_a[i];
        if (delta != 0.0) {
          gt_a.noalias() += delta * g_aa.col(i);
          th_a[i] = next;
          inner_delta = std::max(inner_delta, std::abs(delta));
        }
      }
      ++sol.iterations;
      if (inner_delta == 0.0 ||
          kkt_from_gradient(scale * (gt_a - c_a), th_a, lambda) <= 0.5 * opts.tol)
        break;
    }
    theta(active) = th_a;
    g_theta = gram_times(G, theta);
    record(g_theta);
    if (full_kkt() <= opts.tol) break;
  }
}

// Active-set (feature-sign) method. Each step either solves the quadratic
// on the current orthant face exactly, stopping at the first coordinate
// that reaches zero and dropping it, or adds the zero coordinate with the
// largest optimality violation. Returns false if it stalls numerically.
inline bool active_set(const GramSystem& sys, double lambda, LassoSolution& sol,
                       ActiveCholesky& chol, const LassoOptions& opts,
                       const std::function<void(const Eigen::VectorXd&)>& record) {
  const Index d = sys.dim();
  const Eigen::MatrixXd& G = sys.gram();
  const Eigen::VectorXd& c = sys.cross();
  const double t = static_cast<double>(sys.rows());
  const double scale = 2.0 / t;
  const double gamma = 0.5 * t * lambda;
  ParameterVector& theta = sol.theta;

  // Bring the factor in line with the nonzeros of theta.
  for (Index i = chol.size(); i-- > 0;)
    if (theta[chol.active()[static_cast<std::size_t>(i)]] == 0.0) chol.erase(i);
  {
    std::vector<char> in(static_cast<std::size_t>(d), 0);
    for (Index j : chol.active()) in[static_cast<std::size_t>(j)] = 1;
    for (Index j = 0; j < d; ++j)
      if (theta[j] != 0.0 && !in[static_cast<std::size_t>(j)] && !chol.insert(G, j))
        theta[j] = 0.0;
  }
  std::vector<double> sign;
  for (Index j : chol.active()) sign.push_back(theta[j] > 0.0 ? 1.0 : -1.0);

  auto gradient = [&] {
    Eigen::VectorXd g = -c;
    for (Index j : chol.active())
      if (theta[j] != 0.0) g.noalias() += theta[j] * G.col(j);
    return g;
  };
  auto face_rhs = [&] {
    Eigen::VectorXd rhs = c(chol.active());
    for (Index i = 0; i < chol.size(); ++i) rhs[i] -= gamma * sign[static_cast<std::size_t>(i)];
    return rhs;
  };
  auto drop = [&](Index i) {
    theta[chol.active()[static_cast<std::size_t>(i)]] = 0.0;
    chol.erase(i);
    sign.erase(sign.begin() + i);
  };

  bool rebuilt = false;
  Index fresh = -1;  // position of a coordinate added at zero this step
  while (sol.iterations < opts.max_iter) {
    // Face solve with line search back to the first sign change.
    while (chol.size() > 0 && sol.iterations < opts.max_iter) {
      const Eigen::VectorXd x = chol.solve(face_rhs());
      if (!x.allFinite()) return false;
      ++sol.iterations;
      const Eigen::VectorXd cur = theta(chol.active());
      double step = 1.0;
      Index hit = -1;
      for (Index i = 0; i < chol.size(); ++i) {
        if (x[i] * sign[static_cast<std::size_t>(i)] > 0.0) continue;
        const double frac = cur[i] / (cur[i] - x[i]);
        if (frac < step) {
          step = frac;
          hit = i;
        }
      }
      if (hit >= 0 && hit == fresh) return false;  // added with a sign it cannot keep
      fresh = -1;
      theta(chol.active()) = cur + step * (x - cur);
      if (hit >= 0) theta[chol.active()[static_cast<std::size_t>(hit)]] = 0.0;
      bool dropped = false;
      for (Index i = chol.size(); i-- > 0;)
        if (theta[chol.active()[static_cast<std::size_t>(i)]] == 0.0) {
          drop(i);
          dropped = true;
        }
      if (!dropped) break;
    }
    fresh = -1;

    const Eigen::VectorXd g = gradient();
    record(g + c);
    sol.kkt_residual = kkt_from_gradient(scale * g, theta, lambda);
    if (sol.kkt_residual <= opts.tol) {
      sol.converged = true;
      return true;
    }

    Index best = -1;
    double worst = 0.0;
    for (Index j = 0; j < d; ++j)
      if (theta[j] == 0.0 && std::abs(g[j]) - gamma > worst) {
        worst = std::abs(g[j]) - gamma;
        best = j;
      }
    // The violation must come from a zero coordinate that is not already
    // active; otherwise the face solve was inaccurate.
    bool active_best = false;
    for (Index j : chol.active()) active_best = active_best || j == best;
    if (best < 0 || scale * worst <= opts.tol || active_best) {
      if (rebuilt) return false;
      chol.rebuild(G);
      if (static_cast<std::size_t>(chol.size()) != sign.size()) return false;
      rebuilt = true;
      continue;
    }

    const double s = g[best] > 0.0 ? -1.0 : 1.0;
    if (chol.insert(G, best)) {
      sign.push_back(s);
      fresh = chol.size() - 1;
      continue;
    }
    // Column `best` is spanned by the active columns. Along the direction
    // v = (-s G_AA^{-1} G_A,best, s) the face quadratic is flat and the l1
    // term decreases, so follow it until an active coordinate hits zero.
    const Eigen::VectorXd va = -s * chol.solve(G(chol.active(), best));
    const Eigen::VectorXd cur = theta(chol.active());
    double step = std::numeric_limits<double>::infinity();
    Index hit = -1;
    for (Index i = 0; i < chol.size(); ++i)
      if (va[i] * sign[static_cast<std::size_t>(i)] < 0.0 && -cur[i] / va[i] < step) {
        step = -cur[i] / va[i];
        hit = i;
      }
    if (hit < 0 || !std::isfinite(step)) return false;
    ++sol.iterations;
    theta(chol.active()) = cur + step * va;
    drop(hit);
    if (!chol.insert(G, best)) return false;
    theta[best] = step * s;
    sign.push_back(s);
  }
  return false;
}

}  // namespace detail

/// LASSO on the sufficient statistics.
///
/// Runs an active-set method from the warm start (or zero) and falls back to
/// cyclic coordinate descent if that stalls. Stops once the KKT residual,
/// recomputed from a fresh G*theta, is within opts.tol, or after
/// opts.max_iter steps (face solves, insertions and sweeps all count), in
/// which case converged = false. With a workspace the active-set factor is
/// reused across calls on the same growing system.
inline LassoSolution lasso_fit(const GramSystem& sys, double lambda,
                               const std::optional<ParameterVector>& warm_start,
                               const LassoOptions& opts = {},
                               LassoWorkspace* workspace = nullptr) {
  detail::check_lambda(lambda);
  if (!(opts.tol > 0.0)) throw NumericalDomain("tol must be > 0");
  if (sys.rows() < 1) throw InvalidDimension("empty regression system");

  const Index d = sys.dim();
  const double t = static_cast<double>(sys.rows());
  LassoSolution sol;
  if (warm_start) {
    if (warm_start->size() != d)
      throw DimensionMismatch("warm start has length " +
                              std::to_string(warm_start->size()) +
                              ", expected " + std::to_string(d));
    sol.theta = *warm_start;
  } else {
    sol.theta = ParameterVector::Zero(d);
  }
  sol.converged = false;

  const std::function<void(const Eigen::VectorXd&)> record = [&](const Eigen::VectorXd& g_theta) {
    if (!opts.record_objective) return;
    const double quad = std::max(
        sol.theta.dot(g_theta) - 2.0 * sol.theta.dot(sys.cross()) + sys.response_sq(), 0.0);
    sol.objective_trace.push_back(quad / t + lambda * sol.theta.lpNorm<1>());
  };

  ActiveCholesky scratch;
  ActiveCholesky& chol = workspace ? workspace->factor_for(sys) : scratch;
  if (!detail::active_set(sys, lambda, sol, chol, opts, record)) {
    detail::coordinate_descent(sys, lambda, sol, opts, record);
    chol.clear();
  }

  const Eigen::VectorXd g_theta = detail::gram_times(sys.gram(), sol.theta);
  sol.kkt_residual =
      detail::kkt_from_gradient((2.0 / t) * (g_theta - sys.cross()), sol.theta, lambda);
  sol.converged = sol.kkt_residual <= opts.tol;
  sol.objective = detail::gram_objective(sys, sol.theta, g_theta, lambda);
  return sol;
}

/// LASSO fit on an explicit design. Objective and KKT residual of the result
/// are recomputed from A and R directly.
inline LassoSolution lasso_fit(const Eigen::Ref<const DesignMatrix>& A,
                               const Eigen::Ref<const ResponseVector>& R,
                               double lambda,
                               const std::optional<ParameterVector>& warm_start = std::nullopt,
                               const LassoOptions& opts = {}) {
  if (A.rows() < 1 || A.cols() < 1)
    throw InvalidDimension("design must have at least one row and column");
  GramSystem sys(A, R);
  LassoSolution sol = lasso_fit(sys, lambda, warm_start, opts);
  sol.objective = lasso_objective(A, R, sol.theta, lambda);
  sol.kkt_residual = kkt_residual(A, R, sol.theta, lambda);
  sol.converged = sol.kkt_residual <= opts.tol;
  return sol;
}

/// Minimum-norm least squares on the columns in `support`, zero-padded back
/// to length d. Reduces to (A_S^T A_S)^{-1} A_S^T R when A_S has full column
/// rank.
inline ParameterVector least_squares_restricted(
    const Eigen::Ref<const DesignMatrix>& A,
    const Eigen::Ref<const ResponseVector>& R, const IndexSet& support) {
  if (A.rows() != R.size())
    throw DimensionMismatch("design has " + std::to_string(A.rows()) +
                            " rows but response has " +
                            std::to_string(R.size()) + " entries");
  ParameterVector out = ParameterVector::Zero(A.cols());
  if (support.empty()) return out;
  for (Index j : support)
    if (j < 0 || j >= A.cols())
      throw DimensionMismatch("support index " + std::to_string(j) +
                              " outside [0, " + std::to_string(A.cols()) + ")");

  const Eigen::MatrixXd restricted = A(Eigen::all, support);
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(restricted);
  const Eigen::VectorXd coef = cod.solve(R);
  for (std::size_t i = 0; i < support.size(); ++i)
    out[support[i]] = coef[static_cast<Index>(i)];
  return out;
}

/// Same fit from the normal equations of `sys` when the restricted gram is
/// well conditioned; otherwise falls back to the minimum-norm solve on A.
inline ParameterVector least_squares_restricted(
    const GramSystem& sys, const Eigen::Ref<const DesignMatrix>& A,
    const Eigen::Ref<const ResponseVector>& R, const IndexSet& support) {
  if (sys.rows() != A.rows() || sys.dim() != A.cols())
    throw DimensionMismatch("gram system does not match the design");
  if (support.empty() || static_cast<Index>(support.size()) > sys.rows())
    return least_squares_restricted(A, R, support);
  for (Index j : support)
    if (j < 0 || j >= A.cols())
      throw DimensionMismatch("support index " + std::to_string(j) +
                              " outside [0, " + std::to_string(A.cols()) + ")");
  const Eigen::LLT<Eigen::MatrixXd> llt(sys.gram()(support, support));
  // rcond of the gram is the squared rcond of the columns.
  if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-8))
    return least_squares_restricted(A, R, support);
  const Eigen::VectorXd coef = llt.solve(sys.cross()(support));
  ParameterVector out = ParameterVector::Zero(A.cols());
  for (std::size_t i = 0; i < support.size(); ++i)
    out[support[i]] = coef[static_cast<Index>(i)];
  return out;
}

}  // namespace thlasso
