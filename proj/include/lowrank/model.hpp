#pragma once

#include <cstdint>

#include "json.hpp"

#include "lowrank/linalg.hpp"
#include "lowrank/sensing.hpp"

namespace lowrank {

/// Planted factor X (n x r_star) with cached column basis and spectrum.
struct GroundTruth {
  Matrix x;
  Matrix basis;   // V_X, orthonormal basis of span(X)
  Vector sigmas;  // descending singular values of X
  double kappa = 1.0;
  std::uint64_t seed = 0;

  Index n() const { return x.rows(); }
  Index rank() const { return x.cols(); }
  double spectral_norm() const { return sigmas(0); }
  double sigma_min() const { return sigmas(sigmas.size() - 1); }
  Matrix gram() const { return x * x.transpose(); }  // XX^T
};

enum class TruthKind { kOrthonormal, kConditioned };

struct TruthSpec {
  TruthKind kind = TruthKind::kOrthonormal;
  double kappa = 1.0;  // only used for kConditioned
};

/// Orthonormal: X = Q from QR of a Gaussian matrix (X^T X = Id).
/// Conditioned: X = Q diag(s) R^T with s_i geometric from 1 down to 1/kappa and
/// random orthogonal Q (n x r_star), R (r_star x r_star).
GroundTruth make_ground_truth(Index n, Index r_star, TruthSpec spec, std::uint64_t seed);

/// Builds a ground truth from an explicit factor (used by tests and hand-made examples).
GroundTruth ground_truth_from_factor(const Matrix& x);

/// A planted instance: ground truth, sensing operator, measurements y = A(XX^T), and the
/// spectral-initialization matrix M = A*(y) with its eigendecomposition.
class ProblemInstance {
 public:
  ProblemInstance(GroundTruth truth, SensingOperator op);

  const GroundTruth& truth() const { return truth_; }
  const SensingOperator& op() const { return op_; }
  const Vector& y() const { return y_; }
  const Matrix& m_matrix() const { return m_; }
  const Vector& m_eigenvalues() const { return eig_.values; }
  const Matrix& m_eigenvectors() const { return eig_.vectors; }
  const Matrix& spectral_basis() const { return v_l_; }  // V_L

  Index n() const { return truth_.n(); }
  Index r_star() const { return truth_.rank(); }

  /// Gram matrix XX^T, cached.
  const Matrix& target() const { return target_; }

 private:
  GroundTruth truth_;
  SensingOperator op_;
  Matrix target_;
  Vector y_;
  Matrix m_;
  SymmetricEigen eig_;
  Matrix v_l_;
};

ProblemInstance make_instance(GroundTruth truth, SensingOperator op);

/// f(U) = 1/4 ||A(UU^T - XX^T)||^2, evaluated as 1/4 ||y - A(UU^T)||^2.
double loss(const ProblemInstance& inst, const Matrix& u);

/// Residual y - A(UU^T).
Vector residual(const ProblemInstance& inst, const Matrix& u);

/// grad f(U) = -[A*(y - A(UU^T))] U.
Matrix gradient(const ProblemInstance& inst, const Matrix& u);

/// U U^T with exact symmetry.
Matrix outer(const Matrix& u);

void to_json(nlohmann::json& j, const GroundTruth& truth);

/// Instance metadata: dimensions, seeds, kappa, sigmas, lambda_1, lambda_{r*}, lambda_{r*+1}.
nlohmann::json instance_metadata(const ProblemInstance& inst);

}  // namespace lowrank
