#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace lowrank {

using Rng = std::mt19937_64;

// Derives an independent stream seed from a base seed and a stream tag, so that
// e.g. the ground truth and the sensing ensemble of one instance never share a stream.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

// Fills a dense matrix with iid N(0, stddev^2) entries, column-major order.
Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng,
                                double stddev = 1.0);

// Named stream tags used by derive_seed.
namespace streams {
inline constexpr std::uint64_t kSensing = 1;
inline constexpr std::uint64_t kGroundTruth = 2;
inline constexpr std::uint64_t kInit = 3;
inline constexpr std::uint64_t kRip = 4;
}  // namespace streams

}  // namespace lowrank
