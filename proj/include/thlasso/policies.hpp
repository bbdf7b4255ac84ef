#pragma once

// Bandit policies behind one select/update contract:
//
//   th_lasso  greedy on the thresholded-LASSO refit, re-estimated every round
//   sa_lasso  greedy on a plain LASSO estimate with a sqrt((ln t + ln d)/t)
//             schedule; a stand-in for the sparsity-agnostic LASSO bandit
//   oracle    greedy on the true theta
//   random    theta_hat = 0, so every round is a uniform tie-break

#include "thlasso/environment.hpp"
#include "thlasso/error.hpp"
#include "thlasso/estimator.hpp"
#include "thlasso/random.hpp"
#include "thlasso/sparse_linear.hpp"
#include "thlasso/types.hpp"

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

namespace thlasso {

enum class PolicyKind { kThLasso, kSaLasso, kOracle, kRandom };

inline std::string_view policy_name(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kThLasso: return "th_lasso";
    case PolicyKind::kSaLasso: return "sa_lasso";
    case PolicyKind::kOracle: return "oracle";
    case PolicyKind::kRandom: return "random";
  }
  return "unknown";
}

inline std::optional<PolicyKind> parse_policy_kind(std::string_view name) {
  for (PolicyKind k : {PolicyKind::kThLasso, PolicyKind::kSaLasso,
                       PolicyKind::kOracle, PolicyKind::kRandom})
    if (policy_name(k) == name) return k;
  return std::nullopt;
}

// Tuned lambda0 values for K = 2, d = 1000, sA = 10, s0 = 5.
inline double default_lambda0(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kThLasso: return 0.03;
    case PolicyKind::kSaLasso: return 0.16;
    default: return 0.0;
  }
}

struct PolicyParams {
  PolicyKind kind = PolicyKind::kThLasso;
  double lambda0 = 0.03;
  LassoOptions lasso;
};

struct ArmChoice {
  Index arm_index = 0;
  bool tie_broken = false;
};

// Scores within this relative distance of the maximum count as tied.
inline constexpr double kTieRelativeEpsilon = 1e-12;

/// Greedy arm: argmax_k <contexts_k, theta_hat>, ties broken uniformly with
/// `rng`. The engine is only advanced when there is a tie.
inline ArmChoice select_arm(const ParameterVector& theta_hat,
                            const ContextSet& contexts, Engine& rng) {
  if (contexts.rows() == 0) throw EmptyContextSet("no arms to choose from");
  if (contexts.cols() != theta_hat.size())
    throw DimensionMismatch("contexts have dimension " +
                            std::to_string(contexts.cols()) + ", theta_hat " +
                            std::to_string(theta_hat.size()));
  const Eigen::VectorXd scores = contexts * theta_hat;
  const double best = scores.maxCoeff();
  std::vector<Index> ties;
  for (Index k = 0; k < scores.size(); ++k) {
    const double s = scores[k];
    if (s == best ||
        std::abs(best - s) <= kTieRelativeEpsilon * std::max(std::abs(best), std::abs(s)))
      ties.push_back(k);
  }
  if (ties.size() == 1) return {ties.front(), false};
  std::uniform_int_distribution<std::size_t> pick(0, ties.size() - 1);
  return {ties[pick(rng)], true};
}

/// lambda0 * sqrt((ln max(t, 2) + ln d) / t)
inline double sa_lasso_schedule(double lambda0, Index t, Index d) {
  if (t < 1) throw InvalidDimension("round index must be >= 1");
  if (d < 2) throw InvalidDimension("schedule needs d >= 2, got " + std::to_string(d));
  if (!(lambda0 >= 0.0)) throw InvalidSpec("lambda0 must be >= 0");
  const double log_t = std::log(static_cast<double>(std::max<Index>(t, 2)));
  return lambda0 *
         std::sqrt((log_t + std::log(static_cast<double>(d))) / static_cast<double>(t));
}

/// State and behaviour shared by every policy: the history of chosen
/// contexts and rewards, the current estimate used for selection, and the
/// tie-break stream.
class Policy {
 public:
  Policy(Index d, std::uint64_t tie_seed)
      : theta_hat_(ParameterVector::Zero(d)), rng_(tie_seed), d_(d) {}
  virtual ~Policy() = default;

  virtual PolicyKind kind() const = 0;

  ArmChoice select_arm(const ContextSet& contexts) {
    return thlasso::select_arm(theta_hat_, contexts, rng_);
  }

  void update(const ArmChoice& chosen, const ContextSet& contexts, double reward) {
    if (chosen.arm_index < 0 || chosen.arm_index >= contexts.rows())
      throw DimensionMismatch("chosen arm outside the context set");
    append(contexts.row(chosen.arm_index).transpose(), reward);
    refresh();
    ++round_;
  }

  // Estimate used to select the arm of the current round.
  const ParameterVector& theta_hat() const { return theta_hat_; }
  // Support the policy currently believes in.
  virtual IndexSet estimated_support() const { return support_of(theta_hat_); }
  // Regularization used by the last update, 0 if none.
  double last_lambda() const { return last_lambda_; }

  // Round about to be played; equals the number of observations + 1.
  Index round() const { return round_; }
  Index dim() const { return d_; }
  auto history_A() const { return history_A_.topRows(rows_); }
  auto history_R() const { return history_R_.head(rows_); }

  int lasso_calls() const { return lasso_calls_; }
  int nonconverged() const { return nonconverged_; }
  // Worst KKT residual among converged fits.
  double max_kkt_residual() const { return max_kkt_; }

 protected:
  virtual void refresh() = 0;

  void record_fit(double kkt, bool converged) {
    ++lasso_calls_;
    if (converged)
      max_kkt_ = std::max(max_kkt_, kkt);
    else
      ++nonconverged_;
  }

  ParameterVector theta_hat_;
  double last_lambda_ = 0.0;

 private:
  void append(const Eigen::VectorXd& a, double r) {
    if (rows_ == history_A_.rows()) {
      const Index cap = std::max<Index>(16, 2 * rows_);
      history_A_.conservativeResize(cap, d_);
      history_R_.conservativeResize(cap);
    }
    history_A_.row(rows_) = a.transpose();
    history_R_[rows_] = r;
    ++rows_;
    on_append(a, r);
  }

  virtual void on_append(const Eigen::VectorXd&, double) {}

  Engine rng_;
  Index d_;
  Index round_ = 1;
  DesignMatrix history_A_;
  ResponseVector history_R_;
  Index rows_ = 0;
  int lasso_calls_ = 0;
  int nonconverged_ = 0;
  double max_kkt_ = 0.0;
};

class ThLassoPolicy final : public Policy {
 public:
  ThLassoPolicy(Index d, std::uint64_t tie_seed, double lambda0, LassoOptions opts = {})
      : Policy(d, tie_seed), params_{lambda0, d}, opts_(opts), gram_(d) {}

  PolicyKind kind() const override { return PolicyKind::kThLasso; }
  IndexSet estimated_support() const override {
    return last_ ? last_->s1_hat : IndexSet{};
  }
  const std::optional<EstimationResult>& last_estimate() const { return last_; }

 protected:
  void on_append(const Eigen::VectorXd& a, double r) override {
    gram_.add_row(a, r);
    workspace_.add_row(a);
  }

  void refresh() override {
    std::optional<ParameterVector> warm;
    if (last_) warm = last_->theta0;
    EstimationResult est = estimate(gram_, history_A(), history_R(), params_, warm, opts_, &workspace_);
    record_fit(est.kkt_residual, est.converged);
    theta_hat_ = est.theta_next;
    last_lambda_ = est.lambda_t;
    last_ = std::move(est);
  }

 private:
  ScheduleParams params_;
  LassoOptions opts_;
  GramSystem gram_;
  LassoWorkspace workspace_;
  std::optional<EstimationResult> last_;
};

class SaLassoPolicy final : public Policy {
 public:
  SaLassoPolicy(Index d, std::uint64_t tie_seed, double lambda0, LassoOptions opts = {})
      : Policy(d, tie_seed), lambda0_(lambda0), opts_(opts), gram_(d) {}

  PolicyKind kind() const override { return PolicyKind::kSaLasso; }

 protected:
  void on_append(const Eigen::VectorXd& a, double r) override {
    gram_.add_row(a, r);
    workspace_.add_row(a);
  }

  void refresh() override {
    last_lambda_ = sa_lasso_schedule(lambda0_, gram_.rows(), dim());
    std::optional<ParameterVector> warm;
    if (gram_.rows() > 1) warm = theta_hat_;
    LassoSolution fit = lasso_fit(gram_, last_lambda_, warm, opts_, &workspace_);
    record_fit(fit.kkt_residual, fit.converged);
    theta_hat_ = std::move(fit.theta);
  }

 private:
  double lambda0_;
  LassoOptions opts_;
  GramSystem gram_;
  LassoWorkspace workspace_;
};

class OraclePolicy final : public Policy {
 public:
  OraclePolicy(const GroundTruth& truth, std::uint64_t tie_seed)
      : Policy(truth.theta.size(), tie_seed), support_(truth.support) {
    theta_hat_ = truth.theta;
  }
  PolicyKind kind() const override { return PolicyKind::kOracle; }
  IndexSet estimated_support() const override { return support_; }

 protected:
  void refresh() override {}

 private:
  IndexSet support_;
};

class RandomPolicy final : public Policy {
 public:
  RandomPolicy(Index d, std::uint64_t tie_seed) : Policy(d, tie_seed) {}
  PolicyKind kind() const override { return PolicyKind::kRandom; }

 protected:
  void refresh() override {}
};

inline std::unique_ptr<Policy> make_policy(const PolicyParams& params,
                                           const GroundTruth& truth,
                                           std::uint64_t tie_seed) {
  const Index d = truth.theta.size();
  switch (params.kind) {
    case PolicyKind::kThLasso:
      return std::make_unique<ThLassoPolicy>(d, tie_seed, params.lambda0, params.lasso);
    case PolicyKind::kSaLasso:
      return std::make_unique<SaLassoPolicy>(d, tie_seed, params.lambda0, params.lasso);
    case PolicyKind::kOracle:
      return std::make_unique<OraclePolicy>(truth, tie_seed);
    case PolicyKind::kRandom:
      return std::make_unique<RandomPolicy>(d, tie_seed);
  }
  throw ConfigError("unknown policy kind");
}

}  // namespace thlasso
