#include "thlasso/harness/cli.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <iterator>
#include <fstream>
#include <random>
#include <sstream>

#include <unistd.h>

using namespace thlasso;
using namespace thlasso::harness;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny(PolicyKind kind = PolicyKind::kThLasso) {
  ExperimentConfig c;
  c.policy = kind;
  c.horizon = 40;
  c.replications = 3;
  c.base_seed = 9;
  c.environment.K = 3;
  c.environment.d = 25;
  c.environment.s0 = 3;
  c.environment.sA = 5.0;
  c.environment.rho2 = 0.3;
  return c;
}

const char* kTinyText = R"(# small run
[experiment]
policy = "th_lasso"
horizon = 25
replications = 2
base_seed = 4
output_dir = "OUT"

[environment]
K = 2
d = 12
s0 = 2
sA = 10   # clip
rho2 = 0.7

[sweep]
environment.sA = 5, inf
)";

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("thlasso_harness_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string tiny_config_file(const TempDir& dir) {
  std::string text = kTinyText;
  text.replace(text.find("OUT"), 3, (dir.path / "out").string());
  const fs::path p = dir.path / "tiny.cfg";
  std::ofstream(p) << text;
  return p.string();
}

int cli(std::vector<std::string> args, std::string* out_text = nullptr,
        std::string* err_text = nullptr) {
  args.insert(args.begin(), "thlasso");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return code;
}

}  // namespace

TEST(Config, ParsesSectionsAndComments) {
  const ParsedConfig pc = parse_config(kTinyText);
  EXPECT_EQ(pc.config.policy, PolicyKind::kThLasso);
  EXPECT_EQ(pc.config.horizon, 25);
  EXPECT_EQ(pc.config.environment.d, 12);
  EXPECT_DOUBLE_EQ(pc.config.environment.sA, 10.0);
  EXPECT_DOUBLE_EQ(pc.config.effective_lambda0(), 0.03);
  ASSERT_EQ(pc.sweep.size(), 1u);
  EXPECT_EQ(pc.sweep[0].key, "environment.sA");
  EXPECT_EQ(pc.sweep[0].values, (std::vector<std::string>{"5", "inf"}));
}

TEST(Config, EchoIsAFixpoint) {
  ExperimentConfig c = tiny(PolicyKind::kSaLasso);
  c.environment.sA = std::numeric_limits<double>::infinity();
  c.environment.clip_mode = ClipMode::kSphere;
  c.environment.support = SupportPlacement::kPrefix;
  c.lambda0_ratio = 0.1;
  c.lasso.tol = 3e-9;
  c.output_dir = "some dir/x";
  const std::string once = echo_config(c);
  const ExperimentConfig back = parse_config(once).config;
  EXPECT_EQ(echo_config(back), once);
  EXPECT_DOUBLE_EQ(back.effective_lambda0(), c.effective_lambda0());
  EXPECT_TRUE(std::isinf(back.environment.sA));
}

TEST(Config, Errors) {
  EXPECT_THROW(parse_config("[experiment]\nhorizon = 0\n"), ConfigError);
  EXPECT_THROW(parse_config("[nope]\n"), ConfigError);
  EXPECT_THROW(parse_config("horizon = 3\n"), ConfigError);
  EXPECT_THROW(parse_config("[experiment]\nbogus = 3\n"), ConfigError);
  EXPECT_THROW(parse_config("[experiment]\nhorizon = 2.5\n"), ConfigError);
  EXPECT_THROW(parse_config("[experiment]\npolicy = \"ucb\"\n"), ConfigError);
  EXPECT_THROW(parse_config("[environment]\nrho2 = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("[environment]\nd = 5\ns0 = 6\n"), ConfigError);
  EXPECT_THROW(parse_config("[sweep]\nenvironment.sA = 5, x\n"), ConfigError);
  try {
    load_config("/nonexistent/dir/missing.cfg");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/missing.cfg"), std::string::npos);
  }
}

TEST(Aggregate, MeanAndStandardError) {
  RoundRecord a, b;
  a.t = b.t = 1;
  a.cum_regret = 0.0;
  b.cum_regret = 2.0;
  const AggregateSeries s = aggregate(std::vector<std::vector<RoundRecord>>{{a}, {b}});
  EXPECT_DOUBLE_EQ(s.metric("cum_regret").mean[0], 1.0);
  EXPECT_DOUBLE_EQ(s.metric("cum_regret").std_error[0], 1.0);

  const AggregateSeries one = aggregate(std::vector<std::vector<RoundRecord>>{{b}});
  EXPECT_EQ(one.metric("cum_regret").std_error[0], 0.0);
  const AggregateSeries same = aggregate(std::vector<std::vector<RoundRecord>>{{b}, {b}, {b}});
  EXPECT_EQ(same.metric("cum_regret").std_error[0], 0.0);

  RoundRecord c = a;
  c.t = 2;
  EXPECT_THROW(aggregate(std::vector<std::vector<RoundRecord>>{{a}, {a, c}}), LengthMismatch);
}

TEST(Aggregate, LogEveryKeepsEndpoints) {
  std::vector<RoundRecord> run(10);
  for (Index i = 0; i < 10; ++i) run[i].t = i + 1;
  const AggregateSeries s = aggregate(std::vector<std::vector<RoundRecord>>{run}, 4);
  EXPECT_EQ(s.t, (std::vector<Index>{1, 4, 8, 10}));
}

TEST(RoundsCsv, RoundTrip) {
  ExperimentConfig c = tiny();
  c.horizon = 3;
  const AggregateSeries s = aggregate(run_experiment(c));
  const std::string text = rounds_csv(s);
  EXPECT_EQ(text.rfind("t,metric,mean,stderr\n", 0), 0u);
  EXPECT_EQ(text.find('\r'), std::string::npos);
  std::size_t lines = 0;
  for (char ch : text) lines += ch == '\n';
  EXPECT_EQ(lines, 1 + 3 * metric_defs().size());

  AggregateSeries back = parse_rounds_csv(text);
  back.replications = s.replications;
  EXPECT_EQ(back, s);

  EXPECT_EQ(rounds_csv(AggregateSeries{}), "t,metric,mean,stderr\n");
  EXPECT_THROW(parse_rounds_csv("t,metric\n"), LengthMismatch);
  EXPECT_THROW(parse_rounds_csv("t,metric,mean,stderr\n1,x,1\n"), LengthMismatch);
}

TEST(Runner, OracleHasNoRegret) {
  const auto reps = run_experiment(tiny(PolicyKind::kOracle));
  for (const auto& r : reps)
    for (const auto& rec : r.rounds) {
      EXPECT_EQ(rec.inst_regret, 0.0);
      EXPECT_EQ(rec.fp, 0);
      EXPECT_EQ(rec.fn, 0);
    }
}

TEST(Runner, RandomRegretMatchesMonteCarloGap) {
  ExperimentConfig c = tiny(PolicyKind::kRandom);
  c.horizon = 4000;
  c.replications = 1;
  const Replication rep = run_replication(c, 0);

  // Independent estimate of E[max_i <theta, A_i> - mean_i <theta, A_i>].
  EnvironmentSpec env = replication_environment(c, 0);
  env.context_seed ^= 0x5555;
  double gap = 0.0;
  const Index n = 20000;
  for (Index t = 1; t <= n; ++t) {
    const Eigen::VectorXd v = generate_contexts(env, t) * rep.truth.theta;
    gap += v.maxCoeff() - v.mean();
  }
  gap /= static_cast<double>(n);
  const double per_round = rep.rounds.back().cum_regret / static_cast<double>(c.horizon);
  EXPECT_NEAR(per_round, gap, 0.15 * gap);
}

TEST(Runner, DeterministicAcrossWorkers) {
  ExperimentConfig c = tiny();
  c.replications = 4;
  const auto a = run_experiment(c, 1);
  const auto b = run_experiment(c, 1);
  const auto p = run_experiment(c, 3);
  for (std::size_t r = 0; r < a.size(); ++r) {
    EXPECT_EQ(a[r].rounds, b[r].rounds);
    EXPECT_EQ(a[r].rounds, p[r].rounds);
  }
  EXPECT_EQ(rounds_csv(aggregate(a)), rounds_csv(aggregate(p)));
  ExperimentConfig other = c;
  other.base_seed = 10;
  EXPECT_NE(run_experiment(other)[0].rounds, a[0].rounds);
}

TEST(Runner, RecordInvariants) {
  for (PolicyKind kind : {PolicyKind::kThLasso, PolicyKind::kSaLasso, PolicyKind::kRandom}) {
    const ExperimentConfig c = tiny(kind);
    const EnvironmentSpec env = replication_environment(c, 0);
    const GroundTruth truth = generate_theta(env);
    double prev = 0.0;
    const Replication rep = run_replication(c, 0, [&](const Policy& p, const RoundRecord& r) {
      EXPECT_GE(r.inst_regret, 0.0);
      EXPECT_GE(r.cum_regret, prev);
      prev = r.cum_regret;
      const IndexSet est = p.estimated_support();
      IndexSet common;
      std::set_intersection(est.begin(), est.end(), truth.support.begin(), truth.support.end(),
                            std::back_inserter(common));
      EXPECT_EQ(r.fp + static_cast<Index>(common.size()), static_cast<Index>(est.size()));
      EXPECT_EQ(r.fn + static_cast<Index>(common.size()), static_cast<Index>(truth.support.size()));
      EXPECT_EQ(r.support_size, static_cast<Index>(est.size()));
      EXPECT_NEAR(r.l2_err, (p.theta_hat() - truth.theta).norm(), 1e-12);
    });
    const double cap = 2.0 * env.sA * rep.truth.theta.norm() * static_cast<double>(c.horizon);
    EXPECT_LE(rep.rounds.back().cum_regret, cap);
  }
}

TEST(Sweep, ExpansionOrder) {
  ExperimentConfig base = tiny();
  base.output_dir = "root";
  const auto pts = expand_sweep(base, {{"environment.sA", {"5", "inf"}}, {"environment.K", {"2", "3", "4"}}});
  ASSERT_EQ(pts.size(), 6u);
  EXPECT_EQ(pts[0].config.environment.K, 2);
  EXPECT_EQ(pts[1].config.environment.K, 3);
  EXPECT_EQ(pts[3].config.environment.K, 2);
  EXPECT_TRUE(std::isinf(pts[3].config.environment.sA));
  EXPECT_EQ(fs::path(pts[5].config.output_dir), fs::path("root") / "p005");
  EXPECT_THROW(expand_sweep(base, {{"environment.sA", {}}}), ConfigError);
  EXPECT_THROW(expand_sweep(base, {{"environment.rho2", {"2"}}}), ConfigError);
}

TEST(Sweep, WritesSummary) {
  TempDir dir;
  ParsedConfig pc = load_config(tiny_config_file(dir));
  const auto results = run_sweep(pc.config, pc.sweep);
  ASSERT_EQ(results.size(), 2u);
  const std::string summary = slurp(dir.path / "out" / "summary.csv");
  EXPECT_EQ(summary.rfind("point,environment.sA,t,cum_regret_mean", 0), 0u);
  EXPECT_NE(summary.find("\np000,5,25,"), std::string::npos);
  EXPECT_NE(summary.find("\np001,inf,25,"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir.path / "out" / "p001" / "rounds.csv"));
  EXPECT_TRUE(fs::exists(dir.path / "out" / "p001" / "config.echo"));
}

TEST(Cli, ExitCodes) {
  std::string out, err;
  EXPECT_EQ(cli({"--help"}, &out), 0);
  EXPECT_NE(out.find("run"), std::string::npos);
  EXPECT_EQ(cli({}, nullptr, &err), 2);
  EXPECT_EQ(cli({"run"}, nullptr, &err), 2);
  EXPECT_NE(err.find("usage error"), std::string::npos);
  EXPECT_EQ(cli({"frobnicate"}), 2);
  EXPECT_EQ(cli({"run", "--config", "/nonexistent.cfg"}, nullptr, &err), 1);
  EXPECT_NE(err.find("/nonexistent.cfg"), std::string::npos);
  EXPECT_EQ(cli({"bound", "--T", "1"}, nullptr, &err), 1);
}

TEST(Cli, Bound) {
  std::string out;
  ASSERT_EQ(cli({"bound", "--T", "1000", "--K", "2", "--d", "100", "--s0", "2", "--sA", "1"}, &out), 0);
  const TheoryConstants c = derive_theory_constants(1, 1, 1, 1, 2, 1.0, 100);
  EnvironmentSpec env;
  env.K = 2;
  env.d = 100;
  env.s0 = 2;
  env.sA = 1.0;
  const double b = theorem_bound(c, env, 2.0 * std::sqrt(2.0), 1000, true);
  EXPECT_NE(out.find("bound = " + format_double(b)), std::string::npos);
  EXPECT_NE(out.find("margin = true"), std::string::npos);
  ASSERT_EQ(cli({"bound", "--T", "1000", "--no-margin"}, &out), 0);
  EXPECT_NE(out.find("margin = false"), std::string::npos);
}

TEST(Cli, RunSweepDiagnose) {
  TempDir dir;
  const std::string cfg = tiny_config_file(dir);
  std::string out, err;

  const fs::path run_dir = dir.path / "run";
  ASSERT_EQ(cli({"run", "--config", cfg, "--out", run_dir.string(), "--plot", "--workers", "2"}, &out, &err), 0)
      << err;
  EXPECT_TRUE(fs::exists(run_dir / "rounds.csv"));
  EXPECT_TRUE(fs::exists(run_dir / "regret.svg"));
  EXPECT_EQ(slurp(run_dir / "config.echo").find("[experiment]"), 0u);
  const ParsedConfig echoed = load_config((run_dir / "config.echo").string());
  EXPECT_EQ(echoed.config.environment.d, 12);

  const fs::path sweep_dir = dir.path / "sweep";
  ASSERT_EQ(cli({"sweep", "--config", cfg, "--out", sweep_dir.string(), "--set", "environment.K=2,3",
                 "--replications", "1"},
                &out, &err),
            0)
      << err;
  // --set adds a second axis next to [sweep]: 2 x 2 points.
  EXPECT_TRUE(fs::exists(sweep_dir / "p003" / "rounds.csv"));
  EXPECT_FALSE(fs::exists(sweep_dir / "p004"));

  const fs::path diag_dir = dir.path / "diag";
  ASSERT_EQ(cli({"diagnose", "--config", cfg, "--rounds", "15", "--samples", "300", "--kappa", "0.1,1",
                 "--format", "csv", "--out", diag_dir.string()},
                &out, &err),
            0)
      << err;
  EXPECT_EQ(out.rfind("key,value\n", 0), 0u);
  EXPECT_NE(out.find("compatibility_phi2_true_support,"), std::string::npos);
  EXPECT_NE(out.find("margin_prob[kappa=1],"), std::string::npos);
  EXPECT_EQ(slurp(diag_dir / "diagnose.csv"), out);
}
