#pragma once

#include <algorithm>
#include <cstdint>

#include "lowrank/model.hpp"
#include "lowrank/rng.hpp"

namespace lowrank::testing {

inline Matrix random_symmetric(Index n, std::uint64_t seed) {
  Rng rng(seed);
  const Matrix g = gaussian_matrix(n, n, rng);
  return 0.5 * (g + g.transpose());
}

inline Matrix random_matrix(Index rows, Index cols, std::uint64_t seed) {
  Rng rng(seed);
  return gaussian_matrix(rows, cols, rng);
}

inline ProblemInstance small_instance(Index n, Index r_star, Index m, std::uint64_t seed,
                                      TruthSpec spec = {}) {
  return make_instance(make_ground_truth(n, r_star, spec, derive_seed(seed, streams::kGroundTruth)),
                       SensingOperator::gaussian(n, m, derive_seed(seed, streams::kSensing)));
}

inline double rel_diff(const Matrix& a, const Matrix& b) {
  const double scale = std::max(a.norm(), b.norm());
  return scale == 0.0 ? 0.0 : (a - b).norm() / scale;
}

}  // namespace lowrank::testing
