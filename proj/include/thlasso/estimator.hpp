#pragma once

// Thresholded LASSO estimation for one round: regularizer schedule, initial
// LASSO fit, two-stage thresholding of its coefficients, and a least-squares
// refit on the surviving support.

#include "thlasso/error.hpp"
#include "thlasso/sparse_linear.hpp"
#include "thlasso/types.hpp"

#include <cmath>
#include <optional>
#include <string>

namespace thlasso {

struct ScheduleParams {
  double lambda0 = 0.03;
  Index d = 2;
};

struct EstimationResult {
  ParameterVector theta0;      // initial LASSO estimate
  IndexSet s0_hat;             // first-stage support
  IndexSet s1_hat;             // second-stage support, subset of s0_hat
  ParameterVector theta_next;  // refit, zero outside s1_hat
  double lambda_t = 0.0;

  int lasso_iterations = 0;
  double kkt_residual = 0.0;
  bool converged = true;
};

namespace detail {

// The schedule written in terms of ln d so that non-integer dimensions can be
// evaluated.
inline double lambda_schedule_log(double lambda0, Index t, double log_d) {
  const double log_t = std::log(static_cast<double>(std::max<Index>(t, 2)));
  return lambda0 * std::sqrt(2.0 * log_t * log_d / static_cast<double>(t));
}

}  // namespace detail

/// lambda_t = lambda0 * sqrt(2 ln t ln d / t), with ln t read as ln 2 at t = 1
/// so the first round is still penalized.
inline double lambda_schedule(const ScheduleParams& params, Index t) {
  if (params.d < 2)
    throw InvalidDimension("schedule needs d >= 2, got " +
                           std::to_string(params.d));
  if (t < 1) throw InvalidDimension("round index must be >= 1");
  if (!(params.lambda0 > 0.0))
    throw InvalidSpec("lambda0 must be > 0, got " +
                      std::to_string(params.lambda0));
  return detail::lambda_schedule_log(params.lambda0, t,
                                     std::log(static_cast<double>(params.d)));
}

// { j : |theta0_j| > 4 lambda_t }
inline IndexSet threshold_stage0(const ParameterVector& theta0, double lambda_t) {
  const double cut = 4.0 * lambda_t;
  IndexSet out;
  for (Index j = 0; j < theta0.size(); ++j)
    if (std::abs(theta0[j]) > cut) out.push_back(j);
  return out;
}

// { j in s0_hat : |theta0_j| >= 4 lambda_t sqrt(|s0_hat|) }
inline IndexSet threshold_stage1(const ParameterVector& theta0,
                                 const IndexSet& s0_hat, double lambda_t) {
  IndexSet out;
  if (s0_hat.empty()) return out;
  const double cut =
      4.0 * lambda_t * std::sqrt(static_cast<double>(s0_hat.size()));
  for (Index j : s0_hat)
    if (std::abs(theta0[j]) >= cut) out.push_back(j);
  return out;
}

/// Full pipeline on precomputed sufficient statistics of (A, R). `sys` must
/// describe exactly the rows of A and R; it is what the LASSO stage solves,
/// the refit uses it too and falls back to A and R when the restricted
/// gram is ill conditioned.
inline EstimationResult estimate(const GramSystem& sys,
                                 const Eigen::Ref<const DesignMatrix>& A,
                                 const Eigen::Ref<const ResponseVector>& R,
                                 const ScheduleParams& params,
                                 const std::optional<ParameterVector>& warm_start,
                                 const LassoOptions& opts = {},
                                 LassoWorkspace* workspace = nullptr) {
  if (sys.rows() != A.rows() || A.rows() != R.size() || sys.dim() != A.cols())
    throw DimensionMismatch("gram system does not match the design");

  EstimationResult res;
  res.lambda_t = lambda_schedule(params, A.rows());
  LassoSolution fit = lasso_fit(sys, res.lambda_t, warm_start, opts, workspace);
  res.lasso_iterations = fit.iterations;
  res.kkt_residual = fit.kkt_residual;
  res.converged = fit.converged;
  res.theta0 = std::move(fit.theta);
  res.s0_hat = threshold_stage0(res.theta0, res.lambda_t);
  res.s1_hat = threshold_stage1(res.theta0, res.s0_hat, res.lambda_t);
  res.theta_next = least_squares_restricted(sys, A, R, res.s1_hat);
  return res;
}

inline EstimationResult estimate(const Eigen::Ref<const DesignMatrix>& A,
                                 const Eigen::Ref<const ResponseVector>& R,
                                 const ScheduleParams& params, Index t,
                                 const std::optional<ParameterVector>& warm_start = std::nullopt,
                                 const LassoOptions& opts = {}) {
  if (A.rows() != t)
    throw DimensionMismatch("design has " + std::to_string(A.rows()) +
                            " rows at round " + std::to_string(t));
  if (R.size() != t)
    throw DimensionMismatch("response has " + std::to_string(R.size()) +
                            " entries at round " + std::to_string(t));
  if (A.cols() != params.d)
    throw DimensionMismatch("design has " + std::to_string(A.cols()) +
                            " columns, schedule expects d = " +
                            std::to_string(params.d));
  GramSystem sys(A, R);
  return estimate(sys, A, R, params, warm_start, opts);
}

}  // namespace thlasso
