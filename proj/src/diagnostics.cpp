#include "lowrank/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace lowrank {

namespace {

void require_orthonormal(const Matrix& v, const char* name) {
  if (v.cols() == 0) {
    return;
  }
  const double err = (v.transpose() * v - Matrix::Identity(v.cols(), v.cols())).cwiseAbs().maxCoeff();
  if (!(err <= 1e-8)) {
    throw std::invalid_argument(fmt::format("principal_angle: {} is not orthonormal (error {:.3e})", name, err));
  }
}

}  // namespace

SignalNoiseSplit signal_noise_decompose(const GroundTruth& truth, const Matrix& u) {
  if (u.rows() != truth.n()) {
    throw std::invalid_argument(fmt::format("signal_noise_decompose: U has {} rows, expected {}", u.rows(), truth.n()));
  }
  const Index r = u.cols();
  const Index k = std::min(r, truth.rank());
  const Matrix projected = truth.basis.transpose() * u;  // r_star x r
  const Svd svd = full_svd(projected);

  SignalNoiseSplit out;
  out.w = svd.right.leftCols(k);
  out.w_perp = svd.right.rightCols(r - k);
  out.signal = u * out.w;
  out.noise = u * out.w_perp;
  out.sigma_min_vxu = k > 0 ? svd.values(k - 1) : 0.0;
  out.signal_sigma_min = sigma_min(out.signal);
  out.noise_spec = spectral_norm(out.noise);
  // Relative to ||U||, not to ||V_X^T U||: when U is orthogonal to span(X) the whole
  // projection is rounding noise and would look well conditioned on its own.
  const double u_norm = spectral_norm(u);
  out.rank_deficient = !(u_norm > 0.0) || out.sigma_min_vxu < kRankDeficiencyTolerance * u_norm;
  out.angle_x_signal = principal_angle(truth.basis, column_basis(out.signal));
  return out;
}

double principal_angle(const Matrix& v1, const Matrix& v2) {
  if (v1.rows() != v2.rows()) {
    throw std::invalid_argument("principal_angle: bases live in different ambient dimensions");
  }
  require_orthonormal(v1, "V1");
  require_orthonormal(v2, "V2");
  if (v2.cols() == 0) {
    return 0.0;
  }
  const Matrix residual = v2 - v1 * (v1.transpose() * v2);
  return std::clamp(spectral_norm(residual), 0.0, 1.0);
}

Matrix top_subspace(const Matrix& u, Index k) {
  if (k < 1 || k > std::min(u.rows(), u.cols())) {
    throw std::invalid_argument(fmt::format("top_subspace: k = {} outside [1, {}]", k, std::min(u.rows(), u.cols())));
  }
  return thin_svd(u).left.leftCols(k);
}

Matrix column_basis(const Matrix& u) {
  if (u.cols() == 0) {
    return Matrix(u.rows(), 0);
  }
  return thin_svd(u).left.leftCols(std::min(u.rows(), u.cols()));
}

bool TrajectoryRow::all_finite() const {
  for (double v : {loss, test_error, test_error_rel, sigma_rstar, sigma_rstar_plus1, spec_norm,
                   angle_l_lt, angle_x_lt, signal_sigma_min, noise_spec, angle_x_signal,
                   sigma_min_vxu}) {
    if (!std::isfinite(v)) {
      return false;
    }
  }
  return true;
}

TrajectoryRow compute_row(const ProblemInstance& inst, const Matrix& u, long long t) {
  const GroundTruth& truth = inst.truth();
  TrajectoryRow row;
  row.t = t;
  row.loss = loss(inst, u);
  row.test_error = (outer(u) - inst.target()).norm();
  row.test_error_rel = row.test_error / inst.target().norm();

  const Svd svd = thin_svd(u);
  const Index rs = truth.rank();
  row.sigma_rstar = kth_singular_value(svd.values, rs);
  row.sigma_rstar_plus1 = kth_singular_value(svd.values, rs + 1);
  row.spec_norm = svd.values.size() > 0 ? svd.values(0) : 0.0;
  const Index k = std::min<Index>(rs, svd.values.size());
  const Matrix lt = svd.left.leftCols(k);
  row.angle_l_lt = principal_angle(inst.spectral_basis(), lt);
  row.angle_x_lt = principal_angle(truth.basis, lt);

  const SignalNoiseSplit split = signal_noise_decompose(truth, u);
  row.signal_sigma_min = split.signal_sigma_min;
  row.noise_spec = split.noise_spec;
  row.angle_x_signal = split.angle_x_signal;
  row.sigma_min_vxu = split.sigma_min_vxu;
  return row;
}

std::optional<std::vector<long long>> PhaseReport::phase_lengths() const {
  if (!all_detected()) {
    return std::nullopt;
  }
  return std::vector<long long>{*t_spectral_end, *t1 - *t_spectral_end, *t_hat - *t1};
}

bool PhaseReport::ordered() const {
  if (t_spectral_end && t1 && *t_spectral_end > *t1) {
    return false;
  }
  if (t1 && t_hat && *t1 > *t_hat) {
    return false;
  }
  if (t_spectral_end && t_hat && *t_spectral_end > *t_hat) {
    return false;
  }
  return true;
}

PhaseReport detect_phases(const std::vector<TrajectoryRow>& rows, const GroundTruth& truth,
                          PhaseThresholds thresholds) {
  PhaseReport report;
  const double growth_target = truth.sigma_min() / std::sqrt(10.0);
  for (const TrajectoryRow& row : rows) {
    if (!report.t_spectral_end && row.angle_l_lt <= thresholds.angle) {
      report.t_spectral_end = row.t;
    }
    if (!report.t1 && row.sigma_min_vxu >= growth_target) {
      report.t1 = row.t;
    }
    if (!report.t_hat && row.test_error_rel <= thresholds.final_error) {
      report.t_hat = row.t;
    }
  }
  return report;
}

}  // namespace lowrank
