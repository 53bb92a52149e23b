#include "lowrank/sensing.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "lowrank/rng.hpp"

namespace lowrank {

namespace {

Index packed_size(Index n) { return n * (n + 1) / 2; }

// Upper triangle of a symmetric matrix, column by column.
Vector pack(const Matrix& a, double off_diagonal_weight) {
  const Index n = a.rows();
  Vector out(packed_size(n));
  Index k = 0;
  for (Index col = 0; col < n; ++col) {
    for (Index row = 0; row < col; ++row) {
      out(k++) = off_diagonal_weight * a(row, col);
    }
    out(k++) = a(col, col);
  }
  return out;
}

Matrix unpack(const Eigen::Ref<const Vector>& packed, Index n) {
  Matrix out(n, n);
  Index k = 0;
  for (Index col = 0; col < n; ++col) {
    for (Index row = 0; row < col; ++row) {
      out(row, col) = packed(k);
      out(col, row) = packed(k);
      ++k;
    }
    out(col, col) = packed(k++);
  }
  return out;
}

}  // namespace

SensingOperator::SensingOperator(Index n, Index m, std::uint64_t seed,
                                 EnsembleConvention convention, Matrix stacked)
    : n_(n), m_(m), seed_(seed), convention_(convention), stacked_(std::move(stacked)) {}

SensingOperator SensingOperator::gaussian(Index n, Index m, std::uint64_t seed,
                                          EnsembleConvention convention) {
  if (n < 1 || m < 1) {
    throw std::invalid_argument(fmt::format("gaussian operator needs n >= 1 and m >= 1 (got n={}, m={})", n, m));
  }
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double diag_scale = 1.0 / std::sqrt(2.0);
  Matrix stacked(packed_size(n), m);
  Matrix a(n, n);
  for (Index i = 0; i < m; ++i) {
    for (Index col = 0; col < n; ++col) {
      for (Index row = 0; row < n; ++row) {
        a(row, col) = normal(rng);
      }
    }
    if (convention == EnsembleConvention::kSymmetrized) {
      a = (0.5 * (a + a.transpose())).eval();
    } else {
      for (Index col = 0; col < n; ++col) {
        a(col, col) *= diag_scale;
        for (Index row = col + 1; row < n; ++row) {
          a(col, row) = a(row, col);
        }
      }
    }
    stacked.col(i) = pack(a, 1.0);
  }
  return SensingOperator(n, m, seed, convention, std::move(stacked));
}

SensingOperator SensingOperator::from_matrices(const std::vector<Matrix>& matrices,
                                               std::uint64_t seed) {
  if (matrices.empty()) {
    throw std::invalid_argument("from_matrices: need at least one measurement matrix");
  }
  const Index n = matrices.front().rows();
  if (n < 1) {
    throw std::invalid_argument("from_matrices: empty measurement matrix");
  }
  const Index m = static_cast<Index>(matrices.size());
  Matrix stacked(packed_size(n), m);
  for (Index i = 0; i < m; ++i) {
    const Matrix& a = matrices[static_cast<std::size_t>(i)];
    if (a.rows() != n || a.cols() != n) {
      throw std::invalid_argument("from_matrices: inconsistent matrix dimensions");
    }
    if (a != a.transpose() || !a.allFinite()) {
      throw std::invalid_argument(fmt::format("from_matrices: A_{} is not exactly symmetric and finite", i));
    }
    stacked.col(i) = pack(a, 1.0);
  }
  return SensingOperator(n, m, seed, EnsembleConvention::kSymmetrized, std::move(stacked));
}

Matrix SensingOperator::measurement(Index i) const {
  if (i < 0 || i >= m_) {
    throw std::out_of_range("measurement index out of range");
  }
  return unpack(stacked_.col(i), n_);
}

Vector SensingOperator::apply(const Matrix& z) const {
  // <A_i, Z> = sum_j a_jj z_jj + 2 sum_{j<k} a_jk z_jk
  const Vector flat = pack(symmetrized(z, n_), 2.0);
  Vector y = stacked_.transpose() * flat;
  y /= std::sqrt(static_cast<double>(m_));
  return y;
}

Matrix SensingOperator::adjoint(const Vector& y) const {
  if (y.size() != m_) {
    throw std::invalid_argument(fmt::format("adjoint: expected {} measurements, got {}", m_, y.size()));
  }
  Vector flat = stacked_ * y;
  flat /= std::sqrt(static_cast<double>(m_));
  return unpack(flat, n_);
}

Matrix symmetrized(const Matrix& z, Index expected_n) {
  if (z.rows() != expected_n || z.cols() != expected_n) {
    throw std::invalid_argument(fmt::format("expected a {0}x{0} matrix, got {1}x{2}", expected_n,
                                            z.rows(), z.cols()));
  }
  if (!is_symmetric(z, kSymmetryTolerance)) {
    throw std::invalid_argument("input matrix is not symmetric to relative tolerance 1e-10");
  }
  return 0.5 * (z + z.transpose());
}

Vector apply_operator(const SensingOperator& op, const Matrix& z) { return op.apply(z); }

Matrix apply_adjoint(const SensingOperator& op, const Vector& y) { return op.adjoint(y); }

double spectral_deviation(const SensingOperator& op, const Matrix& z) {
  const Matrix sym = symmetrized(z, op.n());
  const Matrix residual = sym - op.normal(sym);
  return spectral_norm(residual);
}

Matrix rip_sample(Index n, Index rank, std::uint64_t sample_seed) {
  Rng rng(sample_seed);
  const Index plus = (rank + 1) / 2;
  const Index minus = rank / 2;
  const Matrix g = gaussian_matrix(n, plus, rng);
  const Matrix h = gaussian_matrix(n, minus, rng);
  Matrix z = g * g.transpose();
  if (minus > 0) {
    z -= h * h.transpose();
  }
  z = (0.5 * (z + z.transpose())).eval();
  return z / z.norm();
}

RipEstimate estimate_rip(const SensingOperator& op, Index rank, Index trials, std::uint64_t seed) {
  if (rank < 1 || rank > op.n()) {
    throw std::invalid_argument(fmt::format("estimate_rip: rank must be in [1, {}], got {}", op.n(), rank));
  }
  if (trials < 1) {
    throw std::invalid_argument("estimate_rip: trials must be >= 1");
  }
  RipEstimate out;
  out.rank = rank;
  out.trials = trials;
  out.seed = seed;
  double worst = -1.0;
  for (Index k = 0; k < trials; ++k) {
    const std::uint64_t sample_seed = derive_seed(seed, static_cast<std::uint64_t>(k));
    const Matrix z = rip_sample(op.n(), rank, sample_seed);
    const double distortion = std::abs(op.apply(z).squaredNorm() - 1.0);
    if (distortion > worst) {
      worst = distortion;
      out.worst_case_sample_seed = sample_seed;
    }
  }
  out.delta_lower = worst;
  return out;
}

void to_json(nlohmann::json& j, const RipEstimate& e) {
  j = nlohmann::json{{"rank", e.rank},
                     {"trials", e.trials},
                     {"delta_lower", e.delta_lower},
                     {"seed", e.seed},
                     {"worst_case_sample_seed", e.worst_case_sample_seed}};
}

}  // namespace lowrank
