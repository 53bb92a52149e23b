#include "lowrank/solver.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "lowrank/rng.hpp"

namespace lowrank {

void validate(const SolverConfig& cfg, Index n) {
  if (cfg.r < 1) {
    throw std::invalid_argument(fmt::format("factor width r must be >= 1, got {}", cfg.r));
  }
  if (!(cfg.mu >= 0.0) || !std::isfinite(cfg.mu)) {
    throw std::invalid_argument(fmt::format("step size must be finite and >= 0, got {}", cfg.mu));
  }
  if (!(cfg.alpha > 0.0) || !std::isfinite(cfg.alpha)) {
    throw std::invalid_argument(fmt::format("initialization scale must be finite and > 0, got {}", cfg.alpha));
  }
  if (cfg.init_kind == InitKind::kOrthonormal && cfg.r != n) {
    throw std::invalid_argument(fmt::format("orthonormal initialization needs r = n (r={}, n={})", cfg.r, n));
  }
  if (cfg.max_iters < 0) {
    throw std::invalid_argument("max_iters must be >= 0");
  }
  if (cfg.record_stride < 1) {
    throw std::invalid_argument("record_stride must be >= 1");
  }
}

Matrix init_factor(const SolverConfig& cfg, Index n) {
  validate(cfg, n);
  Rng rng(derive_seed(cfg.seed, streams::kInit));
  if (cfg.init_kind == InitKind::kOrthonormal) {
    return cfg.alpha * orthonormalize(gaussian_matrix(n, n, rng));
  }
  return cfg.alpha * gaussian_matrix(n, cfg.r, rng, 1.0 / std::sqrt(static_cast<double>(cfg.r)));
}

Matrix gd_step(const ProblemInstance& inst, const Matrix& u, double mu) {
  if (mu == 0.0) {
    return u;
  }
  return u - mu * gradient(inst, u);
}

std::string to_string(StopReason reason) {
  switch (reason) {
    case StopReason::kMaxIters:
      return "max_iters";
    case StopReason::kStopLoss:
      return "stop_loss";
    case StopReason::kStopTestError:
      return "stop_test_error";
    case StopReason::kDiverged:
      return "diverged";
  }
  return "unknown";
}

TrajectoryRecord run_gd(const ProblemInstance& inst, const SolverConfig& cfg,
                        const IterateObserver& observer) {
  return run_gd_from(inst, cfg, init_factor(cfg, inst.n()), observer);
}

TrajectoryRecord run_gd_from(const ProblemInstance& inst, const SolverConfig& cfg, Matrix u0,
                             const IterateObserver& observer) {
  validate(cfg, inst.n());
  if (u0.rows() != inst.n() || u0.cols() != cfg.r) {
    throw std::invalid_argument(fmt::format("starting factor is {}x{}, expected {}x{}", u0.rows(), u0.cols(), inst.n(), cfg.r));
  }
  if (!u0.allFinite()) {
    throw std::invalid_argument("starting factor is not finite");
  }

  TrajectoryRecord record;
  Matrix u = std::move(u0);
  const double target_norm = inst.target().norm();
  for (long long t = 0;; ++t) {
    if (observer) {
      observer(t, u);
    }
    // Stopping rules only need the cheap scalars; full diagnostics on recorded rows.
    const Vector res = residual(inst, u);
    const double f = 0.25 * res.squaredNorm();
    bool stop = false;
    if (cfg.stop_loss && f <= *cfg.stop_loss) {
      record.stop_reason = StopReason::kStopLoss;
      stop = true;
    } else if (cfg.stop_test_error &&
               (outer(u) - inst.target()).norm() / target_norm <= *cfg.stop_test_error) {
      record.stop_reason = StopReason::kStopTestError;
      stop = true;
    } else if (t >= cfg.max_iters) {
      record.stop_reason = StopReason::kMaxIters;
      stop = true;
    }

    if (stop || t % cfg.record_stride == 0) {
      TrajectoryRow row = compute_row(inst, u, t);
      if (!row.all_finite()) {
        record.diverged = true;
        record.stop_reason = StopReason::kDiverged;
        break;
      }
      record.rows.push_back(row);
    }
    record.iterations = t;
    record.final_u = u;
    if (stop) {
      break;
    }

    // Same update as gd_step, reusing the residual already computed for the loss.
    Matrix next = cfg.mu == 0.0 ? u : Matrix(u + cfg.mu * (inst.op().adjoint(res) * u));
    if (!next.allFinite()) {
      record.diverged = true;
      record.stop_reason = StopReason::kDiverged;
      break;
    }
    u = std::move(next);
  }
  return record;
}

}  // namespace lowrank
