#pragma once

#include <cstdint>
#include <vector>

#include "json.hpp"

#include "lowrank/linalg.hpp"

namespace lowrank {

/// How the entries of each Gaussian measurement matrix are drawn.
enum class EnsembleConvention {
  /// A_i = (G + G^T) / 2 with G iid N(0, 1). Gives Var<A_i, Z> = ||Z||_F^2 for symmetric Z.
  kSymmetrized,
  /// Off-diagonal entries N(0, 1) and diagonal entries N(0, 1/2), mirrored to
  /// the lower triangle. Kept for comparison; not isotropic.
  kOffDiagonalUnit,
};

/// Symmetric Gaussian measurement ensemble {A_i} realizing
///   A(Z)_i = <A_i, Z> / sqrt(m),   A*(y) = sum_i y_i A_i / sqrt(m).
///
/// The upper triangles of the A_i are packed as the columns of one
/// n(n+1)/2 x m matrix, so both maps are a single matrix-vector product with a
/// fixed summation order (independent of thread count). Memory is m n(n+1)/2 doubles.
class SensingOperator {
 public:
  static SensingOperator gaussian(Index n, Index m, std::uint64_t seed,
                                  EnsembleConvention convention = EnsembleConvention::kSymmetrized);

  /// Builds an operator from explicit measurement matrices; each must be exactly symmetric.
  static SensingOperator from_matrices(const std::vector<Matrix>& matrices,
                                       std::uint64_t seed = 0);

  Index n() const { return n_; }
  Index m() const { return m_; }
  std::uint64_t seed() const { return seed_; }
  EnsembleConvention convention() const { return convention_; }

  Matrix measurement(Index i) const;

  /// A(Z). Z must be symmetric to relative tolerance 1e-10; it is symmetrized before use.
  Vector apply(const Matrix& z) const;

  /// A*(y); the result is exactly symmetric.
  Matrix adjoint(const Vector& y) const;

  /// A*(A(Z)).
  Matrix normal(const Matrix& z) const { return adjoint(apply(z)); }

 private:
  SensingOperator(Index n, Index m, std::uint64_t seed, EnsembleConvention convention,
                  Matrix stacked);

  Index n_ = 0;
  Index m_ = 0;
  std::uint64_t seed_ = 0;
  EnsembleConvention convention_ = EnsembleConvention::kSymmetrized;
  Matrix stacked_;  // column i is the packed upper triangle of A_i
};

inline constexpr double kSymmetryTolerance = 1e-10;

// Validates and returns (Z + Z^T)/2.
Matrix symmetrized(const Matrix& z, Index expected_n);

Vector apply_operator(const SensingOperator& op, const Matrix& z);
Matrix apply_adjoint(const SensingOperator& op, const Vector& y);

/// ||(Id - A*A)(Z)||, the spectral norm of Z - A*(A(Z)).
double spectral_deviation(const SensingOperator& op, const Matrix& z);

/// Sampled lower bound on the rank-r restricted isometry constant.
struct RipEstimate {
  Index rank = 0;
  Index trials = 0;
  double delta_lower = 0.0;
  std::uint64_t seed = 0;
  // Seed that regenerates the maximizing sample through rip_sample().
  std::uint64_t worst_case_sample_seed = 0;
};

/// Draws Z = G G^T - H H^T normalized to ||Z||_F = 1, with G Gaussian n x ceil(rank/2)
/// and H Gaussian n x floor(rank/2), so rank(Z) <= rank.
Matrix rip_sample(Index n, Index rank, std::uint64_t sample_seed);

RipEstimate estimate_rip(const SensingOperator& op, Index rank, Index trials, std::uint64_t seed);

void to_json(nlohmann::json& j, const RipEstimate& e);

}  // namespace lowrank
