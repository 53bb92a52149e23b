#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lowrank/model.hpp"
#include "lowrank/solver.hpp"

namespace lowrank {

/// Power-method surrogate U~_t = (Id + mu M)^t U_0 with M = A*A(XX^T), computed by
/// repeated block products U~_{t+1} = U~_t + mu M U~_t.
struct SurrogateTrajectory {
  std::vector<Matrix> iterates;         // U~_0 .. U~_T
  std::vector<double> sigma_rstar_z;    // sigma_{r*}(Z_t)
  std::vector<double> sigma_rstar1_z;   // sigma_{r*+1}(Z_t)
  std::vector<double> angle_l_ltilde;   // ||V_{L perp}^T V_{L~_t}||
  std::optional<long long> truncated_at;  // first t where (1 + mu lambda_1)^t left double range
};

SurrogateTrajectory surrogate_trajectory(const ProblemInstance& inst, const Matrix& u0, double mu,
                                         long long t_max);

/// Singular values of Z_t = (Id + mu M)^t, descending, evaluated in log space.
/// Entries that overflow are +inf.
Vector surrogate_singular_values(const Vector& m_eigenvalues, double mu, long long t);

/// Paired GD / power-method series from a shared U_0.
struct PowerComparison {
  Matrix u0;
  std::vector<long long> t;
  std::vector<double> theta_gd;   // ||V_{L perp}^T V_{L_t}||
  std::vector<double> theta_p;    // ||V_{L perp}^T V_{L~_t}||
  std::vector<double> err_norm;   // ||U_t - U~_t||
  std::vector<double> tilde_norm; // ||U~_t||
  std::vector<double> gd_norm;    // ||U_t||
  std::optional<long long> truncated_at;
};

/// Runs t_max GD steps (stopping rules in cfg are ignored) and the surrogate from the
/// same U_0 = init_factor(cfg).
PowerComparison compare_gd_power(const ProblemInstance& inst, const SolverConfig& cfg,
                                 long long t_max);

struct SpectralPhaseBound {
  long long t_star_lower = 0;
  std::optional<std::string> warning;  // set when the logarithm argument is <= 1
  std::optional<long long> t_star_empirical;
  std::vector<double> e_bound;  // per t of the comparison
  double delta1_hat = 0.0;
};

/// Lower bound on t*:
///   floor( ln( lambda_1 / (4 alpha^2 (1 + d) ||U||^3) * ||U_0^T v_1|| / (alpha min(r, n)) )
///          / (2 ln(1 + mu lambda_1)) ),
/// and the error envelope
///   ||E_t|| <= 4 / lambda_1 * alpha^3 min(r, n) (1 + d) (1 + mu lambda_1)^{3t} ||U||^3,
/// with U = U_0 / alpha and d = delta1_hat. t*_empirical is the first i >= 1 with
/// ||U~_{i-1} - U_{i-1}|| > ||U~_{i-1}||.
SpectralPhaseBound spectral_phase_bounds(const ProblemInstance& inst, const SolverConfig& cfg,
                                         double delta1_hat, const PowerComparison& comparison);

/// Closed-form t* lower bound alone (used for the logarithmic-growth checks).
SpectralPhaseBound t_star_lower_bound(const ProblemInstance& inst, const Matrix& u0, double alpha,
                                      double mu, double delta1_hat);

/// Rank-1 RIP stand-in: estimate_rip at rank 2 times a safety factor.
double delta1_estimate(const SensingOperator& op, Index trials, std::uint64_t seed,
                       double safety_factor = 2.0);

/// Top-k eigenvectors of a symmetric matrix, descending, deterministic sign.
Matrix spectral_subspace(const Matrix& m_sym, Index k);

}  // namespace lowrank
