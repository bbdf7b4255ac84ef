#include "thlasso/environment.hpp"
#include "thlasso/policies.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace thlasso;

TEST(SelectArm, AllTiesAreUniform) {
  Engine rng(41);
  const ContextSet c = ContextSet::Random(2, 5);
  const ParameterVector zero = ParameterVector::Zero(5);
  int first = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const ArmChoice ch = select_arm(zero, c, rng);
    EXPECT_TRUE(ch.tie_broken);
    first += ch.arm_index == 0;
  }
  EXPECT_GE(first / double(n), 0.47);
  EXPECT_LE(first / double(n), 0.53);
}

TEST(SelectArm, DominantArm) {
  Engine rng(42);
  ContextSet c = ContextSet::Zero(2, 4);
  c(0, 0) = 1.0;
  c(1, 1) = 1.0;
  ParameterVector e1 = ParameterVector::Zero(4);
  e1[0] = 1.0;
  const ArmChoice ch = select_arm(e1, c, rng);
  EXPECT_EQ(ch.arm_index, 0);
  EXPECT_FALSE(ch.tie_broken);
}

TEST(SelectArm, TwoWayTieAmongThree) {
  Engine rng(43);
  ContextSet c(3, 1);
  c << 1.0, 1.0, 0.5;
  const ParameterVector one = ParameterVector::Ones(1);
  int counts[3] = {0, 0, 0};
  for (int i = 0; i < 10000; ++i) ++counts[select_arm(one, c, rng).arm_index];
  EXPECT_EQ(counts[2], 0);
  EXPECT_GE(counts[0] / 10000.0, 0.47);
  EXPECT_LE(counts[0] / 10000.0, 0.53);
}

TEST(SelectArm, NearTiesWithinEpsilon) {
  Engine rng(44);
  ContextSet c(2, 1);
  c << 1.0, 1.0 + 1e-14;
  const ParameterVector one = ParameterVector::Ones(1);
  EXPECT_TRUE(select_arm(one, c, rng).tie_broken);
  c(1, 0) = 1.0 + 1e-9;
  const ArmChoice ch = select_arm(one, c, rng);
  EXPECT_FALSE(ch.tie_broken);
  EXPECT_EQ(ch.arm_index, 1);
}

TEST(SelectArm, ArgmaxOnRandomScores) {
  Engine rng(45);
  for (int rep = 0; rep < 500; ++rep) {
    const ContextSet c = ContextSet::Random(6, 8);
    const ParameterVector th = ParameterVector::Random(8);
    const Eigen::VectorXd scores = c * th;
    const ArmChoice ch = select_arm(th, c, rng);
    EXPECT_EQ(scores[ch.arm_index], scores.maxCoeff());
  }
}

TEST(SelectArm, Errors) {
  Engine rng(46);
  EXPECT_THROW(select_arm(ParameterVector::Zero(3), ContextSet(0, 3), rng), EmptyContextSet);
  EXPECT_THROW(select_arm(ParameterVector::Zero(3), ContextSet::Zero(2, 4), rng),
               DimensionMismatch);
}

TEST(SaLassoSchedule, ClosedFormValues) {
  const double ln1000 = std::log(1000.0);
  EXPECT_NEAR(sa_lasso_schedule(0.16, 1000, 1000), 0.16 * std::sqrt(2 * ln1000 / 1000), 1e-15);
  EXPECT_NEAR(sa_lasso_schedule(0.16, 1000, 1000), 0.018806304003814396945, 1e-17);
  EXPECT_NEAR(sa_lasso_schedule(0.16, 1000, 1000), 1.8807e-2, 1e-4 * 1.8807e-2);
  EXPECT_NEAR(sa_lasso_schedule(1.0, 2, 2), std::sqrt(std::log(2.0)), 1e-15);
  EXPECT_NEAR(sa_lasso_schedule(1.0, 2, 2), 0.83255461115769775635, 1e-15);
  for (Index t : {1, 5, 100}) EXPECT_EQ(sa_lasso_schedule(0.0, t, 10), 0.0);
}

TEST(Policies, DefaultsAndNames) {
  EXPECT_EQ(default_lambda0(PolicyKind::kThLasso), 0.03);
  EXPECT_EQ(default_lambda0(PolicyKind::kSaLasso), 0.16);
  for (PolicyKind k : {PolicyKind::kThLasso, PolicyKind::kSaLasso, PolicyKind::kOracle,
                       PolicyKind::kRandom})
    EXPECT_EQ(parse_policy_kind(policy_name(k)), k);
  EXPECT_FALSE(parse_policy_kind("ucb").has_value());
}

namespace {

// Plays `rounds` greedy rounds and returns the policy.
std::unique_ptr<Policy> play(PolicyKind kind, const EnvironmentSpec& env, Index rounds,
                             double lambda0) {
  const GroundTruth truth = generate_theta(env);
  auto p = make_policy({kind, lambda0, {}}, truth, 7);
  for (Index t = 1; t <= rounds; ++t) {
    const ContextSet c = generate_contexts(env, t);
    const ArmChoice ch = p->select_arm(c);
    p->update(ch, c, sample_reward(truth, c.row(ch.arm_index).transpose(), env, t));
    EXPECT_EQ(p->round(), t + 1);
    EXPECT_EQ(p->history_A().rows(), t);
    EXPECT_EQ(p->history_R().size(), t);
    EXPECT_TRUE(p->theta_hat().allFinite());
  }
  return p;
}

}  // namespace

TEST(ThLassoPolicy, NoiselessSingleFeatureRecovery) {
  EnvironmentSpec env;
  env.d = 20;
  env.s0 = 1;
  env.sigma = 0.0;
  env.sA = 10.0;
  const GroundTruth truth = generate_theta(env);
  auto p = play(PolicyKind::kThLasso, env, 50, 0.03);
  EXPECT_LE((p->theta_hat() - truth.theta).lpNorm<Eigen::Infinity>(), 1e-6);
  EXPECT_EQ(p->estimated_support(), truth.support);
  EXPECT_EQ(p->nonconverged(), 0);
  EXPECT_LE(p->max_kkt_residual(), 1e-6);
}

TEST(ThLassoPolicy, EstimateMatchesStatelessPipeline) {
  EnvironmentSpec env;
  env.d = 60;
  env.s0 = 3;
  auto p = play(PolicyKind::kThLasso, env, 40, 0.05);
  const auto& th = static_cast<const ThLassoPolicy&>(*p);
  const EstimationResult ref = estimate(p->history_A(), p->history_R(), {0.05, 60}, 40);
  EXPECT_EQ(th.last_estimate()->s1_hat, ref.s1_hat);
  EXPECT_LE((p->theta_hat() - ref.theta_next).lpNorm<Eigen::Infinity>(), 1e-6);
  EXPECT_NEAR(p->last_lambda(), lambda_schedule({0.05, 60}, 40), 1e-15);
}

TEST(SaLassoPolicy, TracksOwnLassoFit) {
  EnvironmentSpec env;
  env.d = 60;
  env.s0 = 3;
  auto p = play(PolicyKind::kSaLasso, env, 40, 0.16);
  const double lam = sa_lasso_schedule(0.16, 40, 60);
  EXPECT_NEAR(p->last_lambda(), lam, 1e-15);
  EXPECT_LE(kkt_residual(p->history_A(), p->history_R(), p->theta_hat(), lam), 1e-6);
  EXPECT_EQ(p->lasso_calls(), 40);
}

TEST(OracleAndRandomPolicies, FixedEstimates) {
  EnvironmentSpec env;
  env.d = 30;
  env.s0 = 2;
  const GroundTruth truth = generate_theta(env);
  auto oracle = play(PolicyKind::kOracle, env, 10, 0.0);
  EXPECT_EQ(oracle->theta_hat(), truth.theta);
  EXPECT_EQ(oracle->estimated_support(), truth.support);
  auto random = play(PolicyKind::kRandom, env, 10, 0.0);
  EXPECT_EQ(random->theta_hat(), ParameterVector::Zero(30));
  EXPECT_TRUE(random->estimated_support().empty());
}

TEST(Policy, UpdateRejectsUnknownArm) {
  EnvironmentSpec env;
  env.d = 5;
  env.s0 = 1;
  auto p = make_policy({PolicyKind::kThLasso, 0.03, {}}, generate_theta(env), 1);
  EXPECT_THROW(p->update({5, false}, ContextSet::Zero(2, 5), 0.0), DimensionMismatch);
}
