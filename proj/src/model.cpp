#include "lowrank/model.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "lowrank/rng.hpp"

namespace lowrank {

namespace {

void check_rows(const ProblemInstance& inst, const Matrix& u) {
  if (u.rows() != inst.n()) {
    throw std::invalid_argument(fmt::format("factor has {} rows, instance has n = {}", u.rows(), inst.n()));
  }
}

}  // namespace

GroundTruth make_ground_truth(Index n, Index r_star, TruthSpec spec, std::uint64_t seed) {
  if (r_star < 1 || r_star > n) {
    throw std::invalid_argument(fmt::format("ground truth needs 1 <= r_star <= n (got r_star={}, n={})", r_star, n));
  }
  Rng rng(seed);
  const Matrix q = orthonormalize(gaussian_matrix(n, r_star, rng));
  GroundTruth out;
  out.seed = seed;
  out.basis = q;
  if (spec.kind == TruthKind::kOrthonormal) {
    out.x = q;
    out.sigmas = Vector::Ones(r_star);
    out.kappa = 1.0;
    return out;
  }
  if (!(spec.kappa >= 1.0) || !std::isfinite(spec.kappa)) {
    throw std::invalid_argument(fmt::format("condition number must be >= 1, got {}", spec.kappa));
  }
  const Matrix rot = orthonormalize(gaussian_matrix(r_star, r_star, rng));
  Vector s(r_star);
  for (Index i = 0; i < r_star; ++i) {
    s(i) = r_star == 1 ? 1.0 : std::pow(spec.kappa, -static_cast<double>(i) / static_cast<double>(r_star - 1));
  }
  if (r_star > 1) {
    s(r_star - 1) = 1.0 / spec.kappa;
  }
  out.x = q * s.asDiagonal() * rot.transpose();
  out.sigmas = s;
  out.kappa = s(0) / s(r_star - 1);
  return out;
}

GroundTruth ground_truth_from_factor(const Matrix& x) {
  if (x.cols() < 1 || x.rows() < x.cols()) {
    throw std::invalid_argument("ground truth factor must be n x r_star with 1 <= r_star <= n");
  }
  const Svd svd = thin_svd(x);
  if (!(svd.values(x.cols() - 1) > 1e-12 * svd.values(0))) {
    throw std::invalid_argument("ground truth factor is rank deficient");
  }
  GroundTruth out;
  out.x = x;
  out.basis = svd.left;
  out.sigmas = svd.values;
  out.kappa = svd.values(0) / svd.values(x.cols() - 1);
  return out;
}

ProblemInstance::ProblemInstance(GroundTruth truth, SensingOperator op)
    : truth_(std::move(truth)), op_(std::move(op)) {
  if (op_.n() != truth_.n()) {
    throw std::invalid_argument(fmt::format("operator dimension {} does not match ground truth n = {}", op_.n(), truth_.n()));
  }
  target_ = outer(truth_.x);
  y_ = op_.apply(target_);
  m_ = op_.adjoint(y_);
  eig_ = eigen_descending(m_);
  v_l_ = eig_.vectors.leftCols(truth_.rank());
}

ProblemInstance make_instance(GroundTruth truth, SensingOperator op) {
  return ProblemInstance(std::move(truth), std::move(op));
}

Matrix outer(const Matrix& u) {
  Matrix g = Matrix::Zero(u.rows(), u.rows());
  g.selfadjointView<Eigen::Lower>().rankUpdate(u);
  g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
  return g;
}

Vector residual(const ProblemInstance& inst, const Matrix& u) {
  check_rows(inst, u);
  return inst.y() - inst.op().apply(outer(u));
}

double loss(const ProblemInstance& inst, const Matrix& u) {
  return 0.25 * residual(inst, u).squaredNorm();
}

Matrix gradient(const ProblemInstance& inst, const Matrix& u) {
  const Matrix back = inst.op().adjoint(residual(inst, u));
  return -(back * u);
}

void to_json(nlohmann::json& j, const GroundTruth& truth) {
  j = nlohmann::json{{"n", truth.n()},
                     {"r_star", truth.rank()},
                     {"seed", truth.seed},
                     {"kappa", truth.kappa},
                     {"sigmas", std::vector<double>(truth.sigmas.data(), truth.sigmas.data() + truth.sigmas.size())}};
}

nlohmann::json instance_metadata(const ProblemInstance& inst) {
  const Vector& lam = inst.m_eigenvalues();
  const Index rs = inst.r_star();
  nlohmann::json j;
  j["truth"] = inst.truth();
  j["m"] = inst.op().m();
  j["operator_seed"] = inst.op().seed();
  j["lambda_1"] = lam(0);
  j["lambda_rstar"] = lam(rs - 1);
  j["lambda_rstar_plus1"] = rs < lam.size() ? nlohmann::json(lam(rs)) : nlohmann::json(nullptr);
  return j;
}

}  // namespace lowrank
