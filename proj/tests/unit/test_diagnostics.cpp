#include <cmath>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "lowrank/diagnostics.hpp"
#include "lowrank/solver.hpp"

namespace lowrank {
namespace {

using testing::random_matrix;
using testing::small_instance;

TEST(Decompose, HandExample) {
  Matrix x = Matrix::Zero(3, 1);
  x(0, 0) = 1.0;
  const GroundTruth truth = ground_truth_from_factor(x);
  Matrix u = Matrix::Zero(3, 2);
  u(0, 0) = 1.0;
  u(1, 1) = 2.0;
  const SignalNoiseSplit s = signal_noise_decompose(truth, u);
  EXPECT_DOUBLE_EQ(s.signal_sigma_min, 1.0);
  EXPECT_DOUBLE_EQ(s.noise_spec, 2.0);
  EXPECT_DOUBLE_EQ(s.angle_x_signal, 0.0);
  EXPECT_DOUBLE_EQ(s.sigma_min_vxu, 1.0);
  EXPECT_FALSE(s.rank_deficient);
}

TEST(Decompose, InvariantsOnRandomFactors) {
  const GroundTruth truth = make_ground_truth(9, 3, {}, 5);
  for (Index r : {1, 3, 5}) {
    const Matrix u = random_matrix(9, r, 10 + static_cast<std::uint64_t>(r));
    const SignalNoiseSplit s = signal_noise_decompose(truth, u);
    const Index k = std::min<Index>(r, 3);
    ASSERT_EQ(s.w.cols(), k);
    ASSERT_EQ(s.w_perp.cols(), r - k);
    Matrix full(r, r);
    full << s.w, s.w_perp;
    EXPECT_LT((full.transpose() * full - Matrix::Identity(r, r)).norm(), 1e-12);
    EXPECT_LT((s.signal * s.w.transpose() + s.noise * s.w_perp.transpose() - u).norm(), 1e-12 * u.norm());
    if (r > k) EXPECT_LT((truth.basis.transpose() * s.noise).norm(), 1e-12 * u.norm());
    // Oracle: sigma_min(V_X^T U) from the direct SVD.
    const Vector sv = singular_values(truth.basis.transpose() * u);
    EXPECT_NEAR(s.sigma_min_vxu, sv(k - 1), 1e-12);
  }
}

TEST(Decompose, FlagsRankDeficiency) {
  const GroundTruth truth = make_ground_truth(6, 2, {}, 5);
  // Columns orthogonal to span(X): V_X^T U = 0.
  const Matrix perp = Matrix::Identity(6, 6) - truth.basis * truth.basis.transpose();
  const Matrix u = perp * random_matrix(6, 3, 2);
  EXPECT_TRUE(signal_noise_decompose(truth, u).rank_deficient);
  EXPECT_TRUE(signal_noise_decompose(truth, Matrix::Zero(6, 3)).rank_deficient);
}

TEST(PrincipalAngle, SineOfAngle) {
  Matrix v1 = Matrix::Zero(3, 1), v2 = Matrix::Zero(3, 1);
  v1(0, 0) = 1.0;
  const double phi = 0.3;
  v2(0, 0) = std::cos(phi);
  v2(1, 0) = std::sin(phi);
  EXPECT_NEAR(principal_angle(v1, v2), std::sin(phi), 1e-15);
  EXPECT_NEAR(principal_angle(v2, v1), std::sin(phi), 1e-15);
  EXPECT_DOUBLE_EQ(principal_angle(v1, v1), 0.0);
}

TEST(PrincipalAngle, SymmetricAndRotationInvariant) {
  const Matrix a = orthonormalize(random_matrix(8, 3, 1));
  const Matrix b = orthonormalize(random_matrix(8, 3, 2));
  const Matrix q = orthonormalize(random_matrix(3, 3, 3));
  EXPECT_NEAR(principal_angle(a, b), principal_angle(b, a), 1e-12);
  EXPECT_NEAR(principal_angle(a, b * q), principal_angle(a, b), 1e-12);
  EXPECT_NEAR(principal_angle(a * q, b), principal_angle(a, b), 1e-12);
  EXPECT_THROW(principal_angle(a, 2.0 * b), std::invalid_argument);
}

TEST(TopSubspace, MatchesEigenvectorsOfGram) {
  const Matrix u = random_matrix(7, 4, 9);
  const Matrix top = top_subspace(u, 2);
  const Matrix eig = eigen_descending(u * u.transpose()).vectors.leftCols(2);
  EXPECT_LT(principal_angle(eig, top), 1e-10);
  EXPECT_THROW(top_subspace(u, 5), std::invalid_argument);
}

TEST(Row, FieldsAgreeWithDirectFormulas) {
  const ProblemInstance inst = small_instance(8, 2, 120, 3);
  const Matrix u = random_matrix(8, 4, 6);
  const TrajectoryRow row = compute_row(inst, u, 7);
  EXPECT_EQ(row.t, 7);
  EXPECT_DOUBLE_EQ(row.loss, loss(inst, u));
  EXPECT_NEAR(row.test_error, (u * u.transpose() - inst.target()).norm(), 1e-12);
  const Vector s = singular_values(u);
  EXPECT_NEAR(row.sigma_rstar, s(1), 1e-12);
  EXPECT_NEAR(row.sigma_rstar_plus1, s(2), 1e-12);
  EXPECT_NEAR(row.spec_norm, s(0), 1e-12);
  EXPECT_TRUE(row.all_finite());
}

TEST(Phases, DetectsFirstCrossings) {
  const GroundTruth truth = make_ground_truth(5, 1, {}, 1);
  std::vector<TrajectoryRow> rows(4);
  for (int i = 0; i < 4; ++i) rows[static_cast<std::size_t>(i)].t = 10 * i;
  const double angles[] = {0.9, 0.05, 0.2, 0.01};
  const double sig[] = {0.0, 0.1, 0.5, 0.9};
  const double err[] = {1.0, 0.5, 0.01, 1e-4};
  for (std::size_t i = 0; i < 4; ++i) {
    rows[i].angle_l_lt = angles[i];
    rows[i].sigma_min_vxu = sig[i];
    rows[i].test_error_rel = err[i];
  }
  const PhaseReport p = detect_phases(rows, truth);
  EXPECT_EQ(p.t_spectral_end, 10);
  EXPECT_EQ(p.t1, 20);  // 1/sqrt(10) = 0.316
  EXPECT_EQ(p.t_hat, 30);
  EXPECT_TRUE(p.ordered());
  EXPECT_EQ(*p.phase_lengths(), (std::vector<long long>{10, 10, 10}));
}

TEST(Phases, AbsentWithoutProgress) {
  const ProblemInstance inst = small_instance(8, 2, 120, 3);
  SolverConfig cfg;
  cfg.r = 3;
  cfg.mu = 0.0;
  cfg.alpha = 1e-4;
  cfg.max_iters = 20;
  const TrajectoryRecord rec = run_gd(inst, cfg);
  const PhaseReport p = detect_phases(rec.rows, inst.truth());
  EXPECT_FALSE(p.t1.has_value());
  EXPECT_FALSE(p.t_hat.has_value());
  EXPECT_FALSE(p.phase_lengths().has_value());
  EXPECT_TRUE(p.ordered());
}

TEST(Phases, FullRunIsOrdered) {
  const ProblemInstance inst = small_instance(12, 2, 400, 8);
  SolverConfig cfg;
  cfg.r = 4;
  cfg.alpha = 1e-6;
  cfg.max_iters = 400;
  cfg.seed = 4;
  const TrajectoryRecord rec = run_gd(inst, cfg);
  const PhaseReport p = detect_phases(rec.rows, inst.truth());
  ASSERT_TRUE(p.all_detected());
  EXPECT_TRUE(p.ordered());
}

}  // namespace
}  // namespace lowrank
