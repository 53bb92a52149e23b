#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "json.hpp"

#include "lowrank/harness/config.hpp"
#include "lowrank/monitors.hpp"
#include "lowrank/spectral.hpp"

namespace lowrank::harness {

namespace fs = std::filesystem;

/// Every seed a repetition uses, all derived from the two configured base seeds.
struct RunSeeds {
  std::uint64_t instance = 0;
  std::uint64_t ground_truth = 0;
  std::uint64_t sensing = 0;
  std::uint64_t rip = 0;
  std::uint64_t init = 0;
};

RunSeeds seeds_for(const ExperimentConfig& cfg, Index repetition);
nlohmann::json to_json(const RunSeeds& seeds);

ProblemInstance build_instance(const ExperimentConfig& cfg, Index repetition);

/// Configured alpha to absolute scale (multiplies by ||X|| under kRelativeToX).
double absolute_alpha(const ExperimentConfig& cfg, const GroundTruth& truth, double configured);

struct RunSpec {
  Index r = 1;
  double alpha = 1e-6;  // as configured
  Index repetition = 0;
};

struct RunResult {
  RunSpec spec;
  std::optional<fs::path> dir;
  double alpha_abs = 0.0;
  TrajectoryRecord record;
  PhaseReport phases;
  std::optional<MonitorReport> monitors;
  double wall_seconds = 0.0;
  nlohmann::json summary;  // RunSummary
};

/// One trajectory. Writes trajectory.csv, summary.json and (with monitors) monitor
/// output into `dir` when given. Stopping rules come from cfg.
RunResult execute_run(const ExperimentConfig& cfg, const RunSpec& spec, const std::optional<fs::path>& dir);

/// As execute_run on a prebuilt instance (which must match cfg and spec.repetition).
RunResult execute_run(const ExperimentConfig& cfg, const ProblemInstance& inst, const RunSpec& spec,
                      const std::optional<fs::path>& dir);

/// Output directory of a command: <root>/<name>-<config hash>.
fs::path command_dir(const ExperimentConfig& cfg, const fs::path& root);

/// Runs tasks[0..count) on up to `jobs` threads; results land by index, so output is
/// independent of jobs. The first exception (by task index) is rethrown after all finish.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& task);

struct AlphaPoint {
  double alpha = 0.0;  // as configured
  double mean_error = 0.0;
  double min_error = 0.0;
  double max_error = 0.0;
  Index reached_stop = 0;  // repetitions that met the stop rule
  Index repetitions = 0;
};

struct SweepAlphaResult {
  std::vector<RunResult> runs;
  std::vector<AlphaPoint> points;  // ascending alpha
  std::optional<double> slope;     // log-log least squares, absent for < 2 alphas
  bool strictly_decreasing = false;  // mean error strictly decreases as alpha decreases
  bool any_diverged = false;
  std::optional<fs::path> dir;
  nlohmann::json index;
};

/// Log-log least-squares slope of y against x; absent for fewer than two points.
std::optional<double> loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

SweepAlphaResult sweep_alpha(const ExperimentConfig& cfg, int jobs, const std::optional<fs::path>& root);

struct Aggregate {
  std::optional<double> mean;  // over repetitions that reached the threshold
  std::optional<long long> min;
  std::optional<long long> max;
  Index reached = 0;
  Index repetitions = 0;
};

struct RPoint {
  Index r = 0;
  Aggregate alignment;   // first t with angle_L_Lt <= alignment_angle
  Aggregate test_error;  // first t with ||UU^T - XX^T||_F^2 <= test_error_sq
};

struct SweepRResult {
  std::vector<RunResult> runs;
  std::vector<std::optional<long long>> iters_to_alignment;  // per run
  std::vector<std::optional<long long>> iters_to_test_error;
  std::vector<RPoint> points;  // in configured r order
  bool any_diverged = false;
  std::optional<fs::path> dir;
  nlohmann::json index;
};

SweepRResult sweep_r(const ExperimentConfig& cfg, int jobs, const std::optional<fs::path>& root);

struct CompareResult {
  PowerComparison comparison;
  SpectralPhaseBound bound;
  /// End of the window used for the agreement checks: t*_empirical when it is observed,
  /// otherwise the closed-form lower bound on t*.
  long long window_end = 0;
  bool window_from_empirical = false;
  double max_theta_gap_half_window = 0.0;  // max |theta_gd - theta_p| over t <= window_end / 2
  double max_err_over_bound = 0.0;        // max ||E_t|| / bound over 1 <= t <= window_end
  double max_theta_gap_horizon = 0.0;
  std::optional<fs::path> dir;
  nlohmann::json summary;
};

CompareResult compare_spectral(const ExperimentConfig& cfg, const std::optional<fs::path>& root);

struct LazySeries {
  double alpha = 0.0;  // as configured
  double loss_initial = 0.0;
  double loss_final = 0.0;
  double loss_decades = 0.0;  // log10(loss_initial / loss_final)
  double test_rel_initial = 0.0;
  double test_rel_final = 0.0;
  double test_rel_change = 0.0;  // |final - initial| / initial
  std::size_t length = 0;
};

struct LazyRichResult {
  RunResult small;
  RunResult large;
  LazySeries small_series;
  LazySeries large_series;
  std::optional<fs::path> dir;
  nlohmann::json summary;
};

LazyRichResult lazy_vs_rich(const ExperimentConfig& cfg, int jobs, const std::optional<fs::path>& root);

struct RipResult {
  std::vector<RipEstimate> estimates;
  std::optional<fs::path> dir;
  nlohmann::json summary;
};

RipResult rip_audit(const ExperimentConfig& cfg, const std::optional<fs::path>& root);

}  // namespace lowrank::harness
