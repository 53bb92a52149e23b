#pragma once

#include <Eigen/Core>

namespace lowrank {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Eigendecomposition of a symmetric matrix with eigenvalues sorted in
/// descending order. Each eigenvector has its first nonzero component positive.
struct SymmetricEigen {
  Vector values;
  Matrix vectors;
};

SymmetricEigen eigen_descending(const Matrix& sym);

/// Singular value decomposition with descending singular values and the
/// deterministic sign convention applied to the left singular vectors (the
/// right singular vectors are flipped alongside so that U S V^T is preserved).
struct Svd {
  Matrix left;
  Vector values;
  Matrix right;
};

Svd thin_svd(const Matrix& a);
Svd full_svd(const Matrix& a);
Vector singular_values(const Matrix& a);

double spectral_norm(const Matrix& a);

// k-th largest singular value, 1-based. Returns 0 when k exceeds min(rows, cols).
double kth_singular_value(const Vector& descending_values, Index k);

// Smallest singular value among the first min(rows, cols) ones; 0 for empty matrices.
double sigma_min(const Matrix& a);

// Flips the sign of each column so that its first nonzero entry is positive.
void apply_sign_convention(Matrix& basis);
void apply_sign_convention(Matrix& basis, Matrix& partner);

// Orthonormal basis for the columns of a via thin QR with positive diagonal of R.
Matrix orthonormalize(const Matrix& a);

bool is_symmetric(const Matrix& z, double rel_tol);

bool all_finite(const Matrix& a);

}  // namespace lowrank
