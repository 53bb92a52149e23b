#include "lowrank/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

namespace lowrank {

namespace {

Index first_significant_row(const Eigen::Ref<const Vector>& v) {
  const double scale = v.cwiseAbs().maxCoeff();
  if (scale == 0.0) {
    return -1;
  }
  const double threshold = 1e-12 * scale;
  for (Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > threshold) {
      return i;
    }
  }
  return -1;
}

bool needs_flip(const Eigen::Ref<const Vector>& v) {
  const Index i = first_significant_row(v);
  return i >= 0 && v(i) < 0.0;
}

Svd finish_svd(const Eigen::BDCSVD<Matrix>& svd) {
  Svd out{svd.matrixU(), svd.singularValues(), svd.matrixV()};
  apply_sign_convention(out.left, out.right);
  return out;
}

}  // namespace

SymmetricEigen eigen_descending(const Matrix& sym) {
  if (sym.rows() != sym.cols()) {
    throw std::invalid_argument("eigen_descending: matrix is not square");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("eigen_descending: eigensolver did not converge");
  }
  const Index n = sym.rows();
  // Eigen returns ascending order; a stable sort on the negated values keeps
  // the solver's relative order for ties.
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  const Vector& ev = solver.eigenvalues();
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return ev(a) > ev(b); });

  SymmetricEigen out{Vector(n), Matrix(n, n)};
  for (Index k = 0; k < n; ++k) {
    out.values(k) = ev(order[static_cast<std::size_t>(k)]);
    out.vectors.col(k) = solver.eigenvectors().col(order[static_cast<std::size_t>(k)]);
  }
  apply_sign_convention(out.vectors);
  return out;
}

Svd thin_svd(const Matrix& a) {
  return finish_svd(Eigen::BDCSVD<Matrix>(a, Eigen::ComputeThinU | Eigen::ComputeThinV));
}

Svd full_svd(const Matrix& a) {
  return finish_svd(Eigen::BDCSVD<Matrix>(a, Eigen::ComputeFullU | Eigen::ComputeFullV));
}

Vector singular_values(const Matrix& a) {
  if (a.size() == 0) {
    return Vector(0);
  }
  return Eigen::BDCSVD<Matrix>(a).singularValues();
}

double spectral_norm(const Matrix& a) {
  if (a.size() == 0) {
    return 0.0;
  }
  return singular_values(a)(0);
}

double kth_singular_value(const Vector& descending_values, Index k) {
  if (k < 1 || k > descending_values.size()) {
    return 0.0;
  }
  return descending_values(k - 1);
}

double sigma_min(const Matrix& a) {
  if (a.size() == 0) {
    return 0.0;
  }
  const Vector s = singular_values(a);
  return s(s.size() - 1);
}

void apply_sign_convention(Matrix& basis) {
  for (Index j = 0; j < basis.cols(); ++j) {
    if (needs_flip(basis.col(j))) {
      basis.col(j) *= -1.0;
    }
  }
}

void apply_sign_convention(Matrix& basis, Matrix& partner) {
  const Index k = std::min(basis.cols(), partner.cols());
  for (Index j = 0; j < basis.cols(); ++j) {
    if (needs_flip(basis.col(j))) {
      basis.col(j) *= -1.0;
      if (j < k) {
        partner.col(j) *= -1.0;
      }
    }
  }
}

Matrix orthonormalize(const Matrix& a) {
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ() * Matrix::Identity(a.rows(), a.cols());
  const Matrix r = qr.matrixQR().topRows(a.cols()).triangularView<Eigen::Upper>();
  for (Index j = 0; j < a.cols(); ++j) {
    if (r(j, j) < 0.0) {
      q.col(j) *= -1.0;
    }
  }
  return q;
}

bool is_symmetric(const Matrix& z, double rel_tol) {
  if (z.rows() != z.cols()) {
    return false;
  }
  const double scale = z.norm();
  return (z - z.transpose()).norm() <= rel_tol * scale;
}

bool all_finite(const Matrix& a) {
  return a.allFinite();
}

}  // namespace lowrank
