// Acceptance suite at desk scale. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails. Artifacts go to argv[1] (default ./acceptance-runs).
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "lowrank/harness/config.hpp"
#include "lowrank/harness/experiments.hpp"
#include "lowrank/harness/output.hpp"
#include "lowrank/rng.hpp"

namespace {

using namespace lowrank;
using namespace lowrank::harness;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Tally {
  long long applicable = 0;
  long long violations = 0;
  int runs = 0;

  void add(const RunResult& run) {
    if (!run.monitors) return;
    applicable += run.monitors->applicable();
    violations += run.monitors->violations();
    ++runs;
  }
};

fs::path g_root;
Tally g_monitors;
int g_failures = 0;

void criterion(const std::string& name, double budget_s, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, fmt::format("exception: {}", e.what())};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool in_time = secs <= budget_s;
  const bool pass = o.pass && in_time;
  if (!pass) ++g_failures;
  fmt::print("{} {}: {} [{:.1f} s of {:.0f} s{}]\n", pass ? "PASS" : "FAIL", name, o.detail, secs, budget_s,
             in_time ? "" : ", over budget");
  std::fflush(stdout);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig monitored(ExperimentConfig c) {
  c.monitors.enabled = true;
  return c;
}

Matrix random_symmetric(Index n, Rng& rng) {
  const Matrix g = gaussian_matrix(n, n, rng);
  return 0.5 * (g + g.transpose());
}

Outcome oracles() {
  Rng rng(2024);
  double worst_adj = 0.0;
  for (int k = 0; k < 20; ++k) {
    const Index n = 3 + k % 6, m = 5 + 3 * k;
    const SensingOperator op = SensingOperator::gaussian(n, m, derive_seed(77, static_cast<std::uint64_t>(k)));
    const Matrix z = random_symmetric(n, rng);
    const Vector y = gaussian_matrix(m, 1, rng);
    const double lhs = op.apply(z).dot(y);
    const double rhs = (z.array() * op.adjoint(y).array()).sum();
    worst_adj = std::max(worst_adj, std::abs(lhs - rhs) / std::max(std::abs(lhs), std::abs(rhs)));
  }

  const ProblemInstance inst =
      make_instance(make_ground_truth(6, 2, {}, derive_seed(5, streams::kGroundTruth)),
                    SensingOperator::gaussian(6, 60, derive_seed(5, streams::kSensing)));
  const Matrix u = gaussian_matrix(6, 3, rng);
  const Matrix g = gradient(inst, u);
  Matrix fd(6, 3);
  const double h = 1e-5;
  for (Index c = 0; c < 3; ++c)
    for (Index r = 0; r < 6; ++r) {
      Matrix up = u, dn = u;
      up(r, c) += h;
      dn(r, c) -= h;
      fd(r, c) = (loss(inst, up) - loss(inst, dn)) / (2 * h);
    }
  const double grad_rel = (fd - g).norm() / g.norm();
  return {worst_adj <= 1e-10 && grad_rel <= 1e-5,
          fmt::format("adjoint rel err {:.2e} (<= 1e-10), gradient vs FD rel err {:.2e} (<= 1e-5)", worst_adj,
                      grad_rel)};
}

Outcome decomposition() {
  const ExperimentConfig cfg = preset("fig2-desk");
  const ProblemInstance inst = build_instance(cfg, 0);
  const RunSeeds seeds = seeds_for(cfg, 0);
  SolverConfig sc;
  sc.r = cfg.r.front();
  sc.mu = cfg.mu;
  sc.alpha = absolute_alpha(cfg, inst.truth(), cfg.alpha.front());
  sc.max_iters = cfg.max_iters;
  sc.stop_test_error = cfg.stop_test_error_rel;
  sc.seed = seeds.init;
  double worst_perp = 0.0, worst_orth = 0.0, worst_rec = 0.0;
  long long iterates = 0;
  run_gd(inst, sc, [&](long long, const Matrix& u) {
    const SignalNoiseSplit s = signal_noise_decompose(inst.truth(), u);
    const Index r = u.cols();
    Matrix w(r, r);
    w << s.w, s.w_perp;
    worst_perp = std::max(worst_perp, spectral_norm(inst.truth().basis.transpose() * s.noise));
    worst_orth = std::max(worst_orth, (w.transpose() * w - Matrix::Identity(r, r)).cwiseAbs().maxCoeff());
    worst_rec = std::max(worst_rec, (s.signal * s.w.transpose() + s.noise * s.w_perp.transpose() - u).norm());
    ++iterates;
  });
  return {worst_perp <= 1e-10 && worst_orth <= 1e-10 && worst_rec <= 1e-10,
          fmt::format("{} iterates: max ||V_X^T noise|| {:.2e}, orthonormality {:.2e}, reconstruction {:.2e}", iterates,
                      worst_perp, worst_orth, worst_rec)};
}

Outcome spectral_equivalence() {
  const ExperimentConfig cfg = preset("fig1-desk");
  const CompareResult res = compare_spectral(cfg, g_root);
  // t*_empirical is usually never reached: ||U_t - U~_t|| approaches ||U~_t|| from below
  // once U~_t blows up. The angle check then runs up to half the closed-form lower bound
  // on t*, and the error envelope is checked over the whole horizon.
  const auto& c = res.comparison;
  double err_over_bound = res.max_err_over_bound;
  if (!res.window_from_empirical) {
    for (std::size_t i = 0; i < c.t.size(); ++i) {
      if (c.t[i] >= 1) err_over_bound = std::max(err_over_bound, c.err_norm[i] / res.bound.e_bound[i]);
    }
  }
  const bool pass = res.max_theta_gap_half_window <= 0.05 && err_over_bound <= 1.0;
  return {pass, fmt::format("t*_lower {}, t*_empirical {}; max |theta_gd - theta_p| over t <= {}/2 ({}) {:.2e} "
                            "(<= 0.05); max ||E_t||/bound over t <= {} {:.3e} (<= 1); angle gap over the full "
                            "horizon {:.3f}",
                            res.bound.t_star_lower,
                            res.bound.t_star_empirical ? std::to_string(*res.bound.t_star_empirical) : "not reached",
                            res.window_end, res.window_from_empirical ? "t*_empirical" : "t*_lower",
                            res.max_theta_gap_half_window,
                            res.window_from_empirical ? res.window_end : c.t.back(), err_over_bound,
                            res.max_theta_gap_horizon)};
}

RunResult g_fig2;  // reused by the monitor on/off comparison

Outcome three_phases() {
  const ExperimentConfig cfg = monitored(preset("fig2-desk"));
  const fs::path dir = command_dir(cfg, g_root);
  g_fig2 = execute_run(cfg, RunSpec{cfg.r.front(), cfg.alpha.front(), 0}, dir);
  g_monitors.add(g_fig2);
  const PhaseReport& p = g_fig2.phases;
  const auto& rows = g_fig2.record.rows;
  const double final_err = rows.back().test_error_rel;
  if (!p.all_detected()) {
    return {false, fmt::format("phases not all detected (final rel err {:.2e})", final_err)};
  }
  double angle = NAN, ratio = NAN;
  for (const auto& row : rows) {
    if (row.t == *p.t_spectral_end) angle = row.angle_l_lt;
    if (row.t == *p.t_hat) ratio = row.sigma_rstar / build_instance(cfg, 0).truth().sigmas(cfg.r_star - 1);
  }
  const bool pass = p.ordered() && final_err <= 1e-3 && angle <= 0.1 && ratio >= 0.9 && ratio <= 1.1;
  return {pass, fmt::format("t_spectral_end {} <= t1 {} <= t_hat {}; final rel err {:.2e} (<= 1e-3); angle_L_Lt at "
                            "t_spectral_end {:.3f} (<= 0.1); sigma_r*(U)/sigma_r*(X) at t_hat {:.4f} (in [0.9, 1.1])",
                            *p.t_spectral_end, *p.t1, *p.t_hat, final_err, angle, ratio)};
}

Outcome overparameterization() {
  const ExperimentConfig cfg = monitored(preset("fig4-desk"));
  const SweepRResult res = sweep_r(cfg, 1, g_root);
  for (const RunResult& run : res.runs) g_monitors.add(run);
  std::string detail = "mean iterations to alignment:";
  bool pass = true;
  std::optional<double> prev;
  for (const RPoint& p : res.points) {
    if (!p.alignment.mean || p.alignment.reached != p.alignment.repetitions) {
      pass = false;
      detail += fmt::format(" r={}: not all aligned ({}/{})", p.r, p.alignment.reached, p.alignment.repetitions);
      continue;
    }
    detail += fmt::format(" r={}: {:.1f}", p.r, *p.alignment.mean);
    if (prev && *p.alignment.mean > 1.05 * *prev) pass = false;
    prev = p.alignment.mean;
  }
  return {pass, detail + " (non-increasing, 5% inversion allowed)"};
}

Outcome alpha_scaling() {
  const ExperimentConfig cfg = monitored(preset("fig5-desk"));
  const SweepAlphaResult res = sweep_alpha(cfg, 1, g_root);
  for (const RunResult& run : res.runs) g_monitors.add(run);
  std::string detail = "mean final rel err:";
  for (const AlphaPoint& p : res.points) {
    detail += fmt::format(" a={:.0e}: {:.3e} ({}/{} hit stop_loss)", p.alpha, p.mean_error, p.reached_stop,
                          p.repetitions);
  }
  const bool pass = res.strictly_decreasing && res.slope && *res.slope >= 1.0;
  return {pass, detail + fmt::format("; strictly decreasing {}; log-log slope {:.3f} (>= 1.0)",
                                     res.strictly_decreasing ? "yes" : "no", res.slope ? *res.slope : NAN)};
}

Outcome lazy_rich() {
  const ExperimentConfig cfg = monitored(preset("fig6-desk"));
  const LazyRichResult res = lazy_vs_rich(cfg, 1, g_root);
  g_monitors.add(res.small);
  g_monitors.add(res.large);
  const LazySeries& l = res.large_series;
  const LazySeries& s = res.small_series;
  const bool large_ok = l.loss_decades >= 6.0 && l.test_rel_change <= 0.1;
  const bool small_ok = s.test_rel_final < 1e-2;
  return {large_ok && small_ok,
          fmt::format("alpha_large: loss falls {:.2f} decades (>= 6), rel test err {:.3e} -> {:.3e}, change {:.1f}% "
                      "(<= 10%); alpha_small: final rel test err {:.2e} (< 1e-2); budget {} iterations",
                      l.loss_decades, l.test_rel_initial, l.test_rel_final, 100.0 * l.test_rel_change,
                      s.test_rel_final, cfg.max_iters)};
}

RunResult g_exact;

Outcome exact_parameterization() {
  ExperimentConfig cfg = monitored(preset("fig2-desk"));
  cfg.name = "exact-rank";
  cfg.r = {cfg.r_star};
  cfg.alpha = {1e-6};
  g_exact = execute_run(cfg, RunSpec{cfg.r_star, 1e-6, 0}, command_dir(cfg, g_root));
  g_monitors.add(g_exact);
  const double err = g_exact.record.rows.back().test_error_rel;
  return {err <= 1e-4, fmt::format("r = r* = 3: final rel test err {:.2e} after {} iterations (<= 1e-4)", err,
                                   g_exact.record.iterations)};
}

Outcome orthonormal_init() {
  ExperimentConfig cfg = monitored(preset("fig2-desk"));
  cfg.name = "orthonormal-init";
  cfg.n = 40;
  cfg.r = {40};
  cfg.alpha = {1e-6};
  cfg.init_kind = InitKind::kOrthonormal;
  cfg.max_iters = 3000;
  cfg.stop_test_error_rel = 1e-4;
  const RunResult res = execute_run(cfg, RunSpec{40, 1e-6, 0}, command_dir(cfg, g_root));
  g_monitors.add(res);
  const TrajectoryRow& first = res.record.rows.front();
  const double sigma_err = std::abs(first.signal_sigma_min - res.alpha_abs) / res.alpha_abs;
  const double err = res.record.rows.back().test_error_rel;
  const bool pass = first.angle_x_signal <= 1e-12 && sigma_err <= 1e-12 && err <= 1e-3;
  return {pass, fmt::format("n = r = 40: angle_X_signal(0) {:.1e}, |sigma_min(U0 W0) - alpha|/alpha {:.1e} "
                            "(<= 1e-12); final rel test err {:.2e} (<= 1e-3)",
                            first.angle_x_signal, sigma_err, err)};
}

// Small instance where every hypothesis gate opens, so the step inequalities are
// exercised rather than vacuously skipped.
void monitor_active_scenario(long long& applicable, long long& violations, std::set<Lemma>& covered) {
  const ProblemInstance inst = make_instance(make_ground_truth(4, 1, {}, 5), SensingOperator::gaussian(4, 100000, 6));
  SolverConfig sc;
  sc.r = 2;
  sc.mu = 0.005;
  sc.alpha = 1e-3;
  sc.max_iters = 3000;  // long enough for the contraction gates to open
  sc.record_stride = 100;
  sc.seed = 9;
  MonitorSuite suite(inst, sc.mu, sc.alpha, MonitorConfig{});
  run_gd(inst, sc, suite.observer());
  for (const auto& [lemma, tally] : suite.report().summary()) {
    if (tally.applicable > 0) covered.insert(lemma);
  }
  applicable = suite.report().applicable();
  violations = suite.report().violations();
}

Outcome monitor_suite() {
  long long active_applicable = 0, active_violations = 0;
  std::set<Lemma> covered;
  monitor_active_scenario(active_applicable, active_violations, covered);

  // Monitors must only observe: rerun the three-phase and exact-rank scenarios without them.
  bool identical = true;
  for (const RunResult* run : {&g_fig2, &g_exact}) {
    if (!run->dir) {
      identical = false;
      continue;
    }
    ExperimentConfig cfg = preset("fig2-desk");
    if (run == &g_exact) {
      cfg.name = "exact-rank";
      cfg.r = {cfg.r_star};
    }
    const fs::path off = g_root / "monitors-off" / run->dir->filename();
    execute_run(cfg, run->spec, off);
    identical = identical && slurp(off / "trajectory.csv") == slurp(*run->dir / "trajectory.csv");
  }
  const long long total = g_monitors.violations + active_violations;
  const bool pass = g_monitors.runs > 0 && total == 0 && identical && covered.size() == kAllLemmas.size();
  return {pass, fmt::format("{} violations over {} applicable checks in {} monitored runs; active scenario: {} "
                            "violations over {} applicable checks, {}/{} lemmas applicable; trajectory CSV "
                            "with/without monitors identical: {}",
                            g_monitors.violations, g_monitors.applicable, g_monitors.runs, active_violations,
                            active_applicable, covered.size(), kAllLemmas.size(), identical ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  g_root = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance-runs");
  fs::create_directories(g_root);
  fmt::print("acceptance suite, artifacts in {}\n", fs::absolute(g_root).string());

  criterion("adjointness and gradient oracles", 1, oracles);
  criterion("decomposition invariants", 30, decomposition);
  criterion("spectral-phase equivalence", 60, spectral_equivalence);
  criterion("three-phase structure", 120, three_phases);
  criterion("overparameterization speedup", 600, overparameterization);
  criterion("alpha scaling", 900, alpha_scaling);
  criterion("lazy vs rich", 600, lazy_rich);
  criterion("exact-parameterization convergence", 120, exact_parameterization);
  criterion("orthonormal-init scenario", 180, orthonormal_init);
  criterion("monitor suite", 900, monitor_suite);

  fmt::print("{} criteria failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
