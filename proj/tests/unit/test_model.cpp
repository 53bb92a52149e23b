#include <cmath>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "lowrank/model.hpp"

namespace lowrank {
namespace {

using testing::random_matrix;
using testing::small_instance;

TEST(GroundTruth, OrthonormalFactor) {
  const GroundTruth t = make_ground_truth(200, 5, {}, 1);
  EXPECT_LT((t.x.transpose() * t.x - Matrix::Identity(5, 5)).norm(), 1e-12);
  EXPECT_DOUBLE_EQ(t.spectral_norm(), 1.0);
  EXPECT_DOUBLE_EQ(t.kappa, 1.0);
  EXPECT_LT((t.basis.transpose() * t.basis - Matrix::Identity(5, 5)).norm(), 1e-12);
}

TEST(GroundTruth, SquareOrthonormalIsOrthogonal) {
  const GroundTruth t = make_ground_truth(4, 4, {}, 2);
  EXPECT_LT((t.x * t.x.transpose() - Matrix::Identity(4, 4)).norm(), 1e-12);
}

TEST(GroundTruth, ConditionedSpectrum) {
  const GroundTruth t = make_ground_truth(30, 2, {TruthKind::kConditioned, 10.0}, 3);
  const Vector s = singular_values(t.x);
  EXPECT_NEAR(s(0), 1.0, 1e-12);
  EXPECT_NEAR(s(1), 0.1, 1e-12);
  EXPECT_NEAR(t.kappa, 10.0, 1e-12);
  const GroundTruth g = make_ground_truth(30, 4, {TruthKind::kConditioned, 8.0}, 3);
  const Vector sg = singular_values(g.x);
  EXPECT_NEAR(sg(1), 0.5, 1e-12);  // geometric: 1, 1/2, 1/4, 1/8
  EXPECT_NEAR(sg(2), 0.25, 1e-12);
}

TEST(GroundTruth, RejectsBadShapes) {
  EXPECT_THROW(make_ground_truth(3, 4, {}, 1), std::invalid_argument);
  EXPECT_THROW(make_ground_truth(3, 0, {}, 1), std::invalid_argument);
  EXPECT_THROW(make_ground_truth(3, 2, {TruthKind::kConditioned, 0.5}, 1), std::invalid_argument);
  EXPECT_THROW(ground_truth_from_factor(Matrix::Zero(3, 2)), std::invalid_argument);
}

TEST(Instance, SpectralMatrixConcentrates) {
  const ProblemInstance inst = small_instance(20, 2, 800, 4);
  EXPECT_LE(spectral_norm(inst.m_matrix() - inst.target()), 0.5);
  const Vector& lam = inst.m_eigenvalues();
  for (Index i = 1; i < lam.size(); ++i) EXPECT_GE(lam(i - 1), lam(i));
  EXPECT_GT(lam(1), lam(2));
  EXPECT_LT((inst.m_matrix() - inst.op().adjoint(inst.y())).norm(), 1e-14);
}

TEST(Instance, RejectsMismatchedOperator) {
  EXPECT_THROW(make_instance(make_ground_truth(5, 1, {}, 1), SensingOperator::gaussian(4, 10, 1)),
               std::invalid_argument);
}

TEST(Loss, MatchesBruteForce) {
  const ProblemInstance inst = small_instance(6, 2, 40, 5);
  const Matrix u = random_matrix(6, 3, 6);
  const Matrix diff = u * u.transpose() - inst.target();
  double acc = 0.0;
  for (Index i = 0; i < inst.op().m(); ++i) {
    const double r = (inst.op().measurement(i).array() * diff.array()).sum() / std::sqrt(40.0);
    acc += r * r;
  }
  EXPECT_NEAR(loss(inst, u), 0.25 * acc, 1e-12 * acc);
}

TEST(Loss, SpecialPoints) {
  const ProblemInstance inst = small_instance(6, 2, 40, 5);
  EXPECT_NEAR(loss(inst, Matrix::Zero(6, 3)), 0.25 * inst.y().squaredNorm(), 1e-15);
  EXPECT_LT(loss(inst, inst.truth().x), 1e-28);
  // Invariant under right rotations of U.
  const Matrix u = random_matrix(6, 3, 7);
  const Matrix q = orthonormalize(random_matrix(3, 3, 8));
  EXPECT_NEAR(loss(inst, u * q), loss(inst, u), 1e-12 * loss(inst, u));
}

TEST(Gradient, FiniteDifferences) {
  const ProblemInstance inst = small_instance(6, 2, 50, 9);
  const Matrix u = random_matrix(6, 3, 10);
  const Matrix g = gradient(inst, u);
  const double h = 1e-5;
  double worst = 0.0;
  for (Index c = 0; c < u.cols(); ++c)
    for (Index r = 0; r < u.rows(); ++r) {
      Matrix up = u, dn = u;
      up(r, c) += h;
      dn(r, c) -= h;
      const double fd = (loss(inst, up) - loss(inst, dn)) / (2 * h);
      worst = std::max(worst, std::abs(fd - g(r, c)));
    }
  EXPECT_LT(worst, 1e-6 * std::max(1.0, g.cwiseAbs().maxCoeff()));
}

TEST(Gradient, DirectionalDerivative) {
  const ProblemInstance inst = small_instance(6, 2, 50, 11);
  const Matrix u = random_matrix(6, 2, 12);
  const Matrix d = random_matrix(6, 2, 13);
  const double h = 1e-6;
  const double fd = (loss(inst, u + h * d) - loss(inst, u - h * d)) / (2 * h);
  const double an = (gradient(inst, u).array() * d.array()).sum();
  EXPECT_NEAR(fd, an, 1e-6 * std::max(1.0, std::abs(an)));
}

TEST(Gradient, VanishesAtTruthAndZero) {
  const ProblemInstance inst = small_instance(6, 2, 50, 11);
  EXPECT_LT(gradient(inst, inst.truth().x).norm(), 1e-13);
  EXPECT_EQ(gradient(inst, Matrix::Zero(6, 2)), Matrix::Zero(6, 2));
}

TEST(Outer, IsExactlySymmetric) {
  const Matrix u = random_matrix(7, 3, 1);
  const Matrix g = outer(u);
  EXPECT_EQ(g, g.transpose());
  EXPECT_LT((g - u * u.transpose()).norm(), 1e-13);
}

TEST(Instance, MetadataFields) {
  const ProblemInstance inst = small_instance(6, 2, 50, 11);
  const auto j = instance_metadata(inst);
  EXPECT_EQ(j.at("m").get<int>(), 50);
  EXPECT_DOUBLE_EQ(j.at("lambda_1").get<double>(), inst.m_eigenvalues()(0));
  EXPECT_EQ(j.at("truth").at("r_star").get<int>(), 2);
}

}  // namespace
}  // namespace lowrank
