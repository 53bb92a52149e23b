#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lowrank/diagnostics.hpp"
#include "lowrank/model.hpp"

namespace lowrank {

enum class InitKind { kGaussianIid, kOrthonormal };

struct SolverConfig {
  Index r = 1;
  double mu = 0.25;
  double alpha = 1e-6;
  InitKind init_kind = InitKind::kGaussianIid;
  long long max_iters = 1000;
  long long record_stride = 1;
  std::optional<double> stop_loss;
  std::optional<double> stop_test_error;  // relative test error threshold
  std::uint64_t seed = 0;
};

void validate(const SolverConfig& cfg, Index n);

/// U_0 = alpha * U. Gaussian: U iid N(0, 1/r) (standard deviation 1/sqrt(r)).
/// Orthonormal (r = n only): U = Q from QR of a Gaussian square matrix, positive diag(R).
Matrix init_factor(const SolverConfig& cfg, Index n);

/// U - mu * grad f(U). No momentum, no normalization.
Matrix gd_step(const ProblemInstance& inst, const Matrix& u, double mu);

enum class StopReason { kMaxIters, kStopLoss, kStopTestError, kDiverged };

std::string to_string(StopReason reason);

struct TrajectoryRecord {
  std::vector<TrajectoryRow> rows;
  StopReason stop_reason = StopReason::kMaxIters;
  long long iterations = 0;  // index of the last iterate
  bool diverged = false;
  Matrix final_u;  // last finite iterate
};

/// Called with every iterate (t, U_t) in order, including U_0 and the final iterate.
using IterateObserver = std::function<void(long long, const Matrix&)>;

/// Runs gradient descent from init_factor(cfg). Diagnostics are recorded every
/// record_stride iterations and for the final iterate. A non-finite iterate aborts the
/// run; final_u then holds the last finite one.
TrajectoryRecord run_gd(const ProblemInstance& inst, const SolverConfig& cfg,
                        const IterateObserver& observer = {});

/// Same, from an explicit starting factor.
TrajectoryRecord run_gd_from(const ProblemInstance& inst, const SolverConfig& cfg, Matrix u0,
                             const IterateObserver& observer = {});

}  // namespace lowrank
