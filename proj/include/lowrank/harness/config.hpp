#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "lowrank/model.hpp"
#include "lowrank/monitors.hpp"
#include "lowrank/sensing.hpp"
#include "lowrank/solver.hpp"

namespace lowrank::harness {

/// Raised for malformed or invalid experiment configs (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// How configured alpha values are read: as absolute scales or as multiples of ||X||.
enum class AlphaScale { kAbsolute, kRelativeToX };

struct MonitorSettings {
  bool enabled = false;
  std::vector<std::string> lemmas;  // empty = all
  double c_small = 0.01;
  ReportMode mode = ReportMode::kLogOnly;
  bool write_jsonl = true;
  Index rip_trials = 200;  // for the reported delta_hat
};

struct ExperimentConfig {
  std::string name = "custom";
  std::string experiment = "run";  // default subcommand for presets

  Index n = 60;
  Index r_star = 3;
  std::vector<Index> r{6};
  std::optional<Index> m;  // default 10 n r_star
  double mu = 0.25;
  std::vector<double> alpha{1e-6};
  AlphaScale alpha_scale = AlphaScale::kRelativeToX;
  InitKind init_kind = InitKind::kGaussianIid;
  TruthSpec truth{};
  EnsembleConvention ensemble = EnsembleConvention::kSymmetrized;

  std::uint64_t instance_seed = 1;
  std::uint64_t init_seed = 1;
  Index repetitions = 1;

  long long max_iters = 1000;
  long long record_stride = 1;
  std::optional<double> stop_loss;
  std::optional<double> stop_test_error_rel;

  PhaseThresholds phases{};

  // sweep-r
  double alignment_angle = 0.1;
  double test_error_sq_threshold = 1e-4;  // on ||UU^T - XX^T||_F^2

  // lazy-vs-rich (same scale convention as alpha)
  double alpha_small = 1e-3;
  double alpha_large = 0.5;

  // compare-spectral
  Index delta_trials = 200;
  double delta_safety = 2.0;

  // rip-estimate
  std::vector<Index> rip_ranks{1, 2, 4};
  Index rip_trials = 200;

  MonitorSettings monitors{};
  std::string output_dir = "runs";

  Index measurements() const { return m ? *m : 10 * n * r_star; }
};

/// Throws ConfigError with a message naming the offending field.
void validate(const ExperimentConfig& cfg);

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

/// Reads a JSON file (ConfigError on I/O or parse failure).
nlohmann::json read_json_file(const std::string& path);

/// Preset names: fig1, fig2, fig4, fig5, fig6, fig7, each as "<id>-full" and "<id>-desk".
std::vector<std::string> preset_names();
ExperimentConfig preset(const std::string& name);

/// Optional preset, then a JSON patch on top (RFC 7386 merge), then validation.
ExperimentConfig resolve_config(const std::optional<std::string>& preset_name,
                                const std::optional<nlohmann::json>& patch);

/// Stable 64-bit FNV-1a hash of the canonical JSON form, as 16 hex digits.
std::string config_hash(const nlohmann::json& canonical);

MonitorConfig monitor_config(const MonitorSettings& settings, double delta_hat);

std::string to_string(InitKind kind);
std::string to_string(AlphaScale scale);
std::string to_string(EnsembleConvention convention);
std::string to_string(TruthKind kind);

}  // namespace lowrank::harness
