#pragma once

#include <optional>
#include <vector>

#include "lowrank/linalg.hpp"
#include "lowrank/model.hpp"

namespace lowrank {

/// Split of U into a signal part aligned with X and a noise part whose column
/// space is orthogonal to span(X), from the SVD V_X^T U = V Sigma W^T:
///   U = (U W)(W^T) + (U W_perp)(W_perp^T).
struct SignalNoiseSplit {
  Matrix w;        // r x k, k = min(r, r_star)
  Matrix w_perp;   // r x (r - k)
  Matrix signal;   // U W
  Matrix noise;    // U W_perp
  double signal_sigma_min = 0.0;
  double noise_spec = 0.0;
  double angle_x_signal = 0.0;
  double sigma_min_vxu = 0.0;  // sigma_min(V_X^T U)
  bool rank_deficient = false;
};

inline constexpr double kRankDeficiencyTolerance = 1e-13;

SignalNoiseSplit signal_noise_decompose(const GroundTruth& truth, const Matrix& u);

/// ||V1_perp^T V2||, the largest singular value of (Id - V1 V1^T) V2. Inputs must be
/// orthonormal to 1e-8.
double principal_angle(const Matrix& v1, const Matrix& v2);

/// Deterministic-sign top-k left singular basis of U (L_t for k = r_star).
Matrix top_subspace(const Matrix& u, Index k);

/// Left singular basis of U restricted to its first min(rows, cols) directions; used
/// for V_{UW} where UW has full column rank.
Matrix column_basis(const Matrix& u);

/// One recorded iteration. Column order matches the CSV schema.
struct TrajectoryRow {
  long long t = 0;
  double loss = 0.0;
  double test_error = 0.0;
  double test_error_rel = 0.0;
  double sigma_rstar = 0.0;
  double sigma_rstar_plus1 = 0.0;
  double spec_norm = 0.0;
  double angle_l_lt = 0.0;
  double angle_x_lt = 0.0;
  double signal_sigma_min = 0.0;
  double noise_spec = 0.0;
  double angle_x_signal = 0.0;
  double sigma_min_vxu = 0.0;

  bool all_finite() const;
};

TrajectoryRow compute_row(const ProblemInstance& inst, const Matrix& u, long long t);

struct PhaseThresholds {
  double angle = 0.1;          // t_spectral_end: angle_L_Lt <= angle
  double final_error = 1e-3;   // t_hat: test_error_rel <= final_error
};

/// Phase boundaries; absent when never reached.
struct PhaseReport {
  std::optional<long long> t_spectral_end;
  std::optional<long long> t1;
  std::optional<long long> t_hat;

  bool all_detected() const { return t_spectral_end && t1 && t_hat; }
  /// Lengths of the three phases (spectral, saddle avoidance, refinement) when all are detected.
  std::optional<std::vector<long long>> phase_lengths() const;
  bool ordered() const;
};

PhaseReport detect_phases(const std::vector<TrajectoryRow>& rows, const GroundTruth& truth,
                          PhaseThresholds thresholds = {});

}  // namespace lowrank
