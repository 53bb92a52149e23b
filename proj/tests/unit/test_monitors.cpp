#include <cmath>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "lowrank/monitors.hpp"

namespace lowrank {
namespace {

using testing::random_matrix;
using testing::small_instance;

MonitorConfig only(Lemma lemma) {
  MonitorConfig cfg;
  cfg.enabled = {lemma};
  return cfg;
}

TEST(Monitors, LemmaNamesRoundTrip) {
  for (Lemma l : kAllLemmas) EXPECT_EQ(lemma_from_string(to_string(l)), l);
  EXPECT_THROW(lemma_from_string("no_such_lemma"), std::invalid_argument);
}

TEST(Monitors, WithinUsesRelativeSlack) {
  EXPECT_TRUE(within(1.0, 1.0));
  EXPECT_TRUE(within(1.0 + 1e-13, 1.0));
  EXPECT_FALSE(within(1.0 + 1e-9, 1.0));
  EXPECT_TRUE(within(0.0, 0.0));
}

TEST(Monitors, WeylConsequenceHoldsExactly) {
  const ProblemInstance inst = small_instance(15, 2, 1500, 3);
  const auto checks = monitor_weyl_consequence(inst);
  ASSERT_EQ(checks.size(), 5u);
  for (const auto& c : checks) {
    EXPECT_TRUE(c.precondition_satisfied) << c.inequality;
    ASSERT_TRUE(c.inequality_satisfied.has_value());
    EXPECT_TRUE(*c.inequality_satisfied) << c.inequality << " " << c.lhs << " vs " << c.rhs;
  }
}

TEST(Monitors, WeylGateFailsWithFewMeasurements) {
  const ProblemInstance inst = small_instance(15, 2, 20, 3);
  for (const auto& c : monitor_weyl_consequence(inst)) {
    EXPECT_FALSE(c.precondition_satisfied);
    EXPECT_FALSE(c.inequality_satisfied.has_value());
    EXPECT_FALSE(is_violation(c));
  }
}

TEST(Monitors, LargeFactorIsOutsideNormGate) {
  const ProblemInstance inst = small_instance(10, 2, 2000, 4);
  const Matrix u = inst.truth().x * 4.0;  // ||U|| = 4||X||
  const IterateState cur = make_state(inst, u, 0);
  const IterateState next = make_state(inst, u, 1);
  const MonitorConfig cfg;
  for (const auto& c : monitor_norm_control(cur, next, inst, 0.01, cfg)) EXPECT_FALSE(c.precondition_satisfied);
  for (const auto& c : monitor_sigma_growth(cur, next, inst, 1e-5, cfg)) EXPECT_FALSE(c.precondition_satisfied);
  for (const auto& c : monitor_error_split(cur, inst.truth(), cfg)) EXPECT_FALSE(c.precondition_satisfied);
}

TEST(Monitors, NoiseRecursionNeedsOverparameterization) {
  const ProblemInstance inst = small_instance(10, 2, 2000, 4);
  const Matrix u = random_matrix(10, 2, 1) * 1e-3;
  const IterateState cur = make_state(inst, u, 0);
  const IterateState next = make_state(inst, gd_step(inst, u, 1e-4), 1);
  const auto checks = monitor_noise_recursion(cur, next, inst, 1e-4, MonitorConfig{});
  ASSERT_EQ(checks.size(), 1u);
  EXPECT_FALSE(checks[0].precondition_satisfied);
}

TEST(Monitors, StepSizeGateUsesSmallConstant) {
  const ProblemInstance inst = small_instance(10, 2, 2000, 4);
  const Matrix u = random_matrix(10, 3, 1) * 1e-3;
  const IterateState cur = make_state(inst, u, 0);
  const IterateState next = make_state(inst, gd_step(inst, u, 0.25), 1);
  const auto checks = monitor_sigma_growth(cur, next, inst, 0.25, MonitorConfig{});
  const Gate& mu_gate = checks[0].gates.front();
  EXPECT_DOUBLE_EQ(mu_gate.limit, 0.01);
  EXPECT_FALSE(mu_gate.satisfied);
}

TEST(Monitors, StateMatchesDirectFormulas) {
  const ProblemInstance inst = small_instance(8, 2, 300, 5);
  const Matrix u = random_matrix(8, 3, 2);
  const IterateState s = make_state(inst, u, 4);
  const Matrix err = inst.target() - u * u.transpose();
  EXPECT_NEAR(s.error_fro, err.norm(), 1e-12);
  EXPECT_NEAR(s.vx_error_fro, (inst.truth().basis.transpose() * err).norm(), 1e-12);
  EXPECT_NEAR(s.dev_spec, spectral_deviation(inst.op(), err), 1e-12);
  EXPECT_EQ(s.t, 4);
}

TEST(MonitorReport, TalliesAndSink) {
  MonitorReport report;
  std::vector<long long> seen;
  report.sink = [&](const LemmaCheck& c) { seen.push_back(c.t); };
  LemmaCheck ok{Lemma::kNormControl, "ok", 1, true, true, 1.0, 2.0, {}};
  LemmaCheck bad{Lemma::kNormControl, "bad", 2, true, false, 3.0, 2.0, {}};
  LemmaCheck gated{Lemma::kErrorSplit, "gated", 3, false, std::nullopt, 0.0, 0.0, {}};
  EXPECT_FALSE(is_violation(ok));
  EXPECT_TRUE(is_violation(bad));
  EXPECT_FALSE(is_violation(gated));
  report.add(ok);
  report.add(bad);
  report.add(gated);
  EXPECT_EQ(seen, (std::vector<long long>{1, 2, 3}));
  EXPECT_EQ(report.violations(), 1);
  EXPECT_EQ(report.applicable(), 2);
  ASSERT_EQ(report.checks.size(), 1u);
  EXPECT_EQ(report.checks[0].t, 2);
  EXPECT_EQ(report.summary().at(Lemma::kNormControl).evaluated, 2);
  EXPECT_EQ(report.summary().at(Lemma::kErrorSplit).applicable, 0);
}

TEST(MonitorSuite, FailModeThrowsOnViolation) {
  const ProblemInstance inst = small_instance(10, 2, 2000, 4);
  MonitorConfig cfg = only(Lemma::kNormControl);
  cfg.report_mode = ReportMode::kFailOnViolation;
  MonitorSuite suite(inst, 0.01, 1e-3, cfg);
  suite.observe(0, random_matrix(10, 3, 1) * 1e-3);
  try {
    suite.observe(1, inst.truth().x * 5.0);
    FAIL() << "expected a violation";
  } catch (const MonitorViolation& e) {
    EXPECT_EQ(e.check().lemma, Lemma::kNormControl);
    EXPECT_EQ(e.check().t, 0);
  }
}

TEST(MonitorSuite, LogModeRecordsViolation) {
  const ProblemInstance inst = small_instance(10, 2, 2000, 4);
  MonitorSuite suite(inst, 0.01, 1e-3, only(Lemma::kNormControl), {}, /*keep_all=*/true);
  suite.observe(0, random_matrix(10, 3, 1) * 1e-3);
  suite.observe(1, inst.truth().x * 5.0);
  EXPECT_EQ(suite.report().violations(), 1);
  EXPECT_EQ(suite.report().checks.size(), 1u);
}

TEST(MonitorSuite, CleanRunHasNoViolations) {
  const ProblemInstance inst = small_instance(10, 2, 1000, 6);
  SolverConfig cfg;
  cfg.r = 4;
  cfg.alpha = 1e-5;
  cfg.max_iters = 150;
  cfg.seed = 3;
  MonitorSuite suite(inst, cfg.mu, cfg.alpha, MonitorConfig{});
  const TrajectoryRecord rec = run_gd(inst, cfg, suite.observer());
  EXPECT_EQ(suite.report().violations(), 0);
  EXPECT_GT(suite.report().applicable(), 0);
  EXPECT_LT(rec.rows.back().test_error_rel, 1e-3);
}

TEST(MonitorSuite, ObservingDoesNotChangeTheRun) {
  const ProblemInstance inst = small_instance(10, 2, 1000, 6);
  SolverConfig cfg;
  cfg.r = 4;
  cfg.alpha = 1e-5;
  cfg.max_iters = 60;
  MonitorSuite suite(inst, cfg.mu, cfg.alpha, MonitorConfig{});
  EXPECT_EQ(run_gd(inst, cfg, suite.observer()).final_u, run_gd(inst, cfg).final_u);
}

TEST(MonitorConfig, Validation) {
  MonitorConfig cfg;
  cfg.c_small = 0.0;
  EXPECT_THROW(validate(cfg), std::invalid_argument);
  cfg.c_small = 0.01;
  cfg.delta_hat = -1.0;
  EXPECT_THROW(validate(cfg), std::invalid_argument);
}

}  // namespace
}  // namespace lowrank
