#include "lowrank/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

#include "lowrank/diagnostics.hpp"

namespace lowrank {

Vector surrogate_singular_values(const Vector& m_eigenvalues, double mu, long long t) {
  Vector out(m_eigenvalues.size());
  for (Index i = 0; i < m_eigenvalues.size(); ++i) {
    const double base = std::abs(1.0 + mu * m_eigenvalues(i));
    if (t == 0) {
      out(i) = 1.0;
    } else if (base == 0.0) {
      out(i) = 0.0;
    } else {
      const double log_value = static_cast<double>(t) * std::log(base);
      out(i) = log_value > std::log(std::numeric_limits<double>::max())
                   ? std::numeric_limits<double>::infinity()
                   : std::exp(log_value);
    }
  }
  std::sort(out.data(), out.data() + out.size(), std::greater<>());
  return out;
}

SurrogateTrajectory surrogate_trajectory(const ProblemInstance& inst, const Matrix& u0, double mu,
                                         long long t_max) {
  if (u0.rows() != inst.n()) {
    throw std::invalid_argument(fmt::format("surrogate: U_0 has {} rows, expected {}", u0.rows(), inst.n()));
  }
  if (!u0.allFinite() || !std::isfinite(mu)) {
    throw std::invalid_argument("surrogate: non-finite input");
  }
  if (t_max < 0) {
    throw std::invalid_argument("surrogate: t_max must be >= 0");
  }
  const Index rs = inst.r_star();
  const Index k = std::min<Index>(rs, std::min(u0.rows(), u0.cols()));
  const Matrix& m = inst.m_matrix();

  SurrogateTrajectory out;
  Matrix current = u0;
  for (long long t = 0; t <= t_max; ++t) {
    const Vector z = surrogate_singular_values(inst.m_eigenvalues(), mu, t);
    if (!current.allFinite() || !std::isfinite(z(0))) {
      out.truncated_at = t;
      break;
    }
    out.iterates.push_back(current);
    out.sigma_rstar_z.push_back(kth_singular_value(z, rs));
    out.sigma_rstar1_z.push_back(kth_singular_value(z, rs + 1));
    out.angle_l_ltilde.push_back(principal_angle(inst.spectral_basis(), top_subspace(current, k)));
    if (t < t_max) {
      current = (current + mu * (m * current)).eval();
    }
  }
  return out;
}

PowerComparison compare_gd_power(const ProblemInstance& inst, const SolverConfig& cfg,
                                 long long t_max) {
  validate(cfg, inst.n());
  PowerComparison out;
  out.u0 = init_factor(cfg, inst.n());
  const SurrogateTrajectory surrogate = surrogate_trajectory(inst, out.u0, cfg.mu, t_max);
  out.truncated_at = surrogate.truncated_at;

  const Index k = std::min<Index>(inst.r_star(), std::min(out.u0.rows(), out.u0.cols()));
  Matrix u = out.u0;
  const auto steps = static_cast<long long>(surrogate.iterates.size());
  for (long long t = 0; t < steps; ++t) {
    if (!u.allFinite()) {
      break;
    }
    const Matrix& tilde = surrogate.iterates[static_cast<std::size_t>(t)];
    out.t.push_back(t);
    out.theta_gd.push_back(principal_angle(inst.spectral_basis(), top_subspace(u, k)));
    out.theta_p.push_back(surrogate.angle_l_ltilde[static_cast<std::size_t>(t)]);
    out.err_norm.push_back(spectral_norm(u - tilde));
    out.tilde_norm.push_back(spectral_norm(tilde));
    out.gd_norm.push_back(spectral_norm(u));
    if (t + 1 < steps) {
      u = gd_step(inst, u, cfg.mu);
    }
  }
  return out;
}

SpectralPhaseBound t_star_lower_bound(const ProblemInstance& inst, const Matrix& u0, double alpha,
                                      double mu, double delta1_hat) {
  if (!(delta1_hat >= 0.0)) {
    throw std::invalid_argument("delta1_hat must be >= 0");
  }
  const double lambda1 = inst.m_eigenvalues()(0);
  if (!(mu > 0.0) || !(lambda1 > 0.0)) {
    throw std::invalid_argument("t* bound needs mu > 0 and lambda_1(M) > 0");
  }
  SpectralPhaseBound out;
  out.delta1_hat = delta1_hat;
  const double u_norm = spectral_norm(u0) / alpha;
  const double width = static_cast<double>(std::min(u0.rows(), u0.cols()));
  const double overlap = (u0.transpose() * inst.m_eigenvectors().col(0)).norm();
  const double argument = lambda1 / (4.0 * alpha * alpha * (1.0 + delta1_hat) * std::pow(u_norm, 3)) *
                          (overlap / (alpha * width));
  if (!(argument > 1.0)) {
    out.t_star_lower = 0;
    out.warning = fmt::format("logarithm argument {:.3e} <= 1 (initialization scale too large); t* lower bound set to 0", argument);
    return out;
  }
  out.t_star_lower = static_cast<long long>(std::floor(std::log(argument) / (2.0 * std::log1p(mu * lambda1))));
  return out;
}

SpectralPhaseBound spectral_phase_bounds(const ProblemInstance& inst, const SolverConfig& cfg,
                                         double delta1_hat, const PowerComparison& comparison) {
  SpectralPhaseBound out = t_star_lower_bound(inst, comparison.u0, cfg.alpha, cfg.mu, delta1_hat);
  const double lambda1 = inst.m_eigenvalues()(0);
  const double u_norm = spectral_norm(comparison.u0) / cfg.alpha;
  const double width = static_cast<double>(std::min(comparison.u0.rows(), comparison.u0.cols()));
  const double prefactor = 4.0 / lambda1 * std::pow(cfg.alpha, 3) * width * (1.0 + delta1_hat) *
                           std::pow(u_norm, 3);
  const double log_growth = 3.0 * std::log1p(cfg.mu * lambda1);
  out.e_bound.reserve(comparison.t.size());
  for (long long t : comparison.t) {
    out.e_bound.push_back(prefactor * std::exp(log_growth * static_cast<double>(t)));
  }
  for (std::size_t i = 0; i < comparison.t.size(); ++i) {
    if (comparison.err_norm[i] > comparison.tilde_norm[i]) {
      out.t_star_empirical = comparison.t[i] + 1;
      break;
    }
  }
  return out;
}

double delta1_estimate(const SensingOperator& op, Index trials, std::uint64_t seed,
                       double safety_factor) {
  const Index rank = std::min<Index>(2, op.n());
  return safety_factor * estimate_rip(op, rank, trials, seed).delta_lower;
}

Matrix spectral_subspace(const Matrix& m_sym, Index k) {
  if (k < 1 || k > m_sym.rows()) {
    throw std::invalid_argument(fmt::format("spectral_subspace: k = {} outside [1, {}]", k, m_sym.rows()));
  }
  if (!is_symmetric(m_sym, 1e-10)) {
    throw std::invalid_argument("spectral_subspace: matrix is not symmetric");
  }
  return eigen_descending(m_sym).vectors.leftCols(k);
}

}  // namespace lowrank
