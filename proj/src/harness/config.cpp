#include "lowrank/harness/config.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <fmt/format.h>

namespace lowrank::harness {

using nlohmann::json;

namespace {

// Full-scale initialization for the small-alpha presets: 1/(70 n^2) at n = 200.
constexpr double kFullScaleAlpha = 1.0 / (70.0 * 200.0 * 200.0);

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  require(j.is_object(), fmt::format("{} must be a JSON object", where));
  for (const auto& [key, value] : j.items()) {
    require(allowed.count(key) > 0, fmt::format("unknown key '{}' in {}", key, where));
  }
}

template <typename T>
T get(const json& j, const std::string& key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("{}.{}: {}", where, key, e.what()));
  }
}

template <typename T>
void read(const json& j, const std::string& key, T& out, const std::string& where = "config") {
  if (j.contains(key)) out = get<T>(j, key, where);
}

template <typename T>
void read_optional(const json& j, const std::string& key, std::optional<T>& out,
                   const std::string& where = "config") {
  if (!j.contains(key)) return;
  if (j.at(key).is_null()) {
    out.reset();
  } else {
    out = get<T>(j, key, where);
  }
}

// Accepts either a scalar or a list.
template <typename T>
void read_list(const json& j, const std::string& key, std::vector<T>& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (v.is_array()) {
    out = get<std::vector<T>>(j, key, "config");
  } else {
    out = {get<T>(j, key, "config")};
  }
}

template <typename E>
E parse_enum(const json& j, const std::string& key, const std::map<std::string, E>& names) {
  const auto name = get<std::string>(j, key, "config");
  auto it = names.find(name);
  if (it == names.end()) {
    std::string options;
    for (const auto& [k, v] : names) options += (options.empty() ? "" : ", ") + k;
    throw ConfigError(fmt::format("{}: unknown value '{}' (expected one of {})", key, name, options));
  }
  return it->second;
}

const std::map<std::string, InitKind> kInitNames{{"gaussian", InitKind::kGaussianIid},
                                                 {"orthonormal", InitKind::kOrthonormal}};
const std::map<std::string, AlphaScale> kScaleNames{{"absolute", AlphaScale::kAbsolute},
                                                    {"relative_to_x", AlphaScale::kRelativeToX}};
const std::map<std::string, EnsembleConvention> kEnsembleNames{
    {"symmetrized", EnsembleConvention::kSymmetrized},
    {"offdiagonal_unit", EnsembleConvention::kOffDiagonalUnit}};
const std::map<std::string, TruthKind> kTruthNames{{"orthonormal", TruthKind::kOrthonormal},
                                                   {"conditioned", TruthKind::kConditioned}};
const std::map<std::string, ReportMode> kModeNames{{"log", ReportMode::kLogOnly},
                                                   {"fail", ReportMode::kFailOnViolation}};

template <typename E>
std::string name_of(E value, const std::map<std::string, E>& names) {
  for (const auto& [k, v] : names) {
    if (v == value) return k;
  }
  return "?";
}

const std::set<std::string> kExperiments{"run",          "sweep-alpha",  "sweep-r",
                                         "compare-spectral", "lazy-vs-rich", "rip-estimate"};

bool positive(double v) { return v > 0.0 && std::isfinite(v); }

}  // namespace

std::string to_string(InitKind kind) { return name_of(kind, kInitNames); }
std::string to_string(AlphaScale scale) { return name_of(scale, kScaleNames); }
std::string to_string(EnsembleConvention convention) { return name_of(convention, kEnsembleNames); }
std::string to_string(TruthKind kind) { return name_of(kind, kTruthNames); }

void validate(const ExperimentConfig& c) {
  require(kExperiments.count(c.experiment) > 0, fmt::format("experiment: unknown '{}'", c.experiment));
  require(c.n >= 1, "n must be >= 1");
  require(c.r_star >= 1 && c.r_star <= c.n, "r_star must satisfy 1 <= r_star <= n");
  require(!c.r.empty(), "r must list at least one value");
  for (Index r : c.r) require(r >= 1, fmt::format("r values must be positive (got {})", r));
  require(c.measurements() >= 1, "m must be >= 1");
  require(c.mu >= 0.0 && std::isfinite(c.mu), "mu must be finite and >= 0");
  require(!c.alpha.empty(), "alpha must list at least one value");
  for (double a : c.alpha) require(positive(a), fmt::format("alpha values must be positive (got {})", a));
  if (c.init_kind == InitKind::kOrthonormal) {
    for (Index r : c.r) require(r == c.n, "orthonormal init requires r = n");
  }
  if (c.truth.kind == TruthKind::kConditioned) {
    require(c.truth.kappa >= 1.0 && std::isfinite(c.truth.kappa), "truth.kappa must be >= 1");
  }
  require(c.repetitions >= 1, "seeds.repetitions must be >= 1");
  require(c.max_iters >= 0, "max_iters must be >= 0");
  require(c.record_stride >= 1, "record_stride must be >= 1");
  require(!c.stop_loss || *c.stop_loss >= 0.0, "stopping.loss must be >= 0");
  require(!c.stop_test_error_rel || *c.stop_test_error_rel >= 0.0, "stopping.test_error_rel must be >= 0");
  require(positive(c.phases.angle) && positive(c.phases.final_error), "phase thresholds must be positive");
  require(positive(c.alignment_angle), "sweep_r.alignment_angle must be positive");
  require(positive(c.test_error_sq_threshold), "sweep_r.test_error_sq must be positive");
  require(positive(c.alpha_small) && positive(c.alpha_large), "lazy_vs_rich alphas must be positive");
  require(c.delta_trials >= 1, "spectral.delta_trials must be >= 1");
  require(positive(c.delta_safety), "spectral.safety_factor must be positive");
  require(!c.rip_ranks.empty(), "rip.ranks must list at least one rank");
  for (Index k : c.rip_ranks) require(k >= 1 && k <= c.n, fmt::format("rip rank {} outside [1, n]", k));
  require(c.rip_trials >= 1, "rip.trials must be >= 1");
  require(positive(c.monitors.c_small), "monitors.c_small must be positive");
  require(c.monitors.rip_trials >= 1, "monitors.rip_trials must be >= 1");
  for (const auto& name : c.monitors.lemmas) {
    try {
      lemma_from_string(name);
    } catch (const std::exception&) {
      throw ConfigError(fmt::format("monitors.lemmas: unknown lemma '{}'", name));
    }
  }
  require(!c.output_dir.empty(), "output_dir must not be empty");
}

ExperimentConfig config_from_json(const json& j) {
  check_keys(j, "config",
             {"name", "experiment", "n", "r_star", "r", "m", "mu", "alpha", "alpha_scale", "init_kind",
              "truth", "ensemble", "seeds", "max_iters", "record_stride", "stopping", "phases", "sweep_r",
              "lazy_vs_rich", "spectral", "rip", "monitors", "output_dir"});
  ExperimentConfig c;
  read(j, "name", c.name);
  read(j, "experiment", c.experiment);
  read(j, "n", c.n);
  read(j, "r_star", c.r_star);
  read_list(j, "r", c.r);
  read_optional(j, "m", c.m);
  read(j, "mu", c.mu);
  read_list(j, "alpha", c.alpha);
  if (j.contains("alpha_scale")) c.alpha_scale = parse_enum(j, "alpha_scale", kScaleNames);
  if (j.contains("init_kind")) c.init_kind = parse_enum(j, "init_kind", kInitNames);
  if (j.contains("ensemble")) c.ensemble = parse_enum(j, "ensemble", kEnsembleNames);
  if (j.contains("truth")) {
    const json& t = j.at("truth");
    check_keys(t, "truth", {"kind", "kappa"});
    if (t.contains("kind")) c.truth.kind = parse_enum(t, "kind", kTruthNames);
    read(t, "kappa", c.truth.kappa, "truth");
  }
  if (j.contains("seeds")) {
    const json& s = j.at("seeds");
    check_keys(s, "seeds", {"instance", "init", "repetitions"});
    read(s, "instance", c.instance_seed, "seeds");
    read(s, "init", c.init_seed, "seeds");
    read(s, "repetitions", c.repetitions, "seeds");
  }
  read(j, "max_iters", c.max_iters);
  read(j, "record_stride", c.record_stride);
  if (j.contains("stopping")) {
    const json& s = j.at("stopping");
    check_keys(s, "stopping", {"loss", "test_error_rel"});
    read_optional(s, "loss", c.stop_loss, "stopping");
    read_optional(s, "test_error_rel", c.stop_test_error_rel, "stopping");
  }
  if (j.contains("phases")) {
    const json& p = j.at("phases");
    check_keys(p, "phases", {"angle", "final_error"});
    read(p, "angle", c.phases.angle, "phases");
    read(p, "final_error", c.phases.final_error, "phases");
  }
  if (j.contains("sweep_r")) {
    const json& s = j.at("sweep_r");
    check_keys(s, "sweep_r", {"alignment_angle", "test_error_sq"});
    read(s, "alignment_angle", c.alignment_angle, "sweep_r");
    read(s, "test_error_sq", c.test_error_sq_threshold, "sweep_r");
  }
  if (j.contains("lazy_vs_rich")) {
    const json& s = j.at("lazy_vs_rich");
    check_keys(s, "lazy_vs_rich", {"alpha_small", "alpha_large"});
    read(s, "alpha_small", c.alpha_small, "lazy_vs_rich");
    read(s, "alpha_large", c.alpha_large, "lazy_vs_rich");
  }
  if (j.contains("spectral")) {
    const json& s = j.at("spectral");
    check_keys(s, "spectral", {"delta_trials", "safety_factor"});
    read(s, "delta_trials", c.delta_trials, "spectral");
    read(s, "safety_factor", c.delta_safety, "spectral");
  }
  if (j.contains("rip")) {
    const json& s = j.at("rip");
    check_keys(s, "rip", {"ranks", "trials"});
    read_list(s, "ranks", c.rip_ranks);
    read(s, "trials", c.rip_trials, "rip");
  }
  if (j.contains("monitors")) {
    const json& s = j.at("monitors");
    check_keys(s, "monitors", {"enabled", "lemmas", "c_small", "mode", "jsonl", "rip_trials"});
    read(s, "enabled", c.monitors.enabled, "monitors");
    read(s, "lemmas", c.monitors.lemmas, "monitors");
    read(s, "c_small", c.monitors.c_small, "monitors");
    if (s.contains("mode")) c.monitors.mode = parse_enum(s, "mode", kModeNames);
    read(s, "jsonl", c.monitors.write_jsonl, "monitors");
    read(s, "rip_trials", c.monitors.rip_trials, "monitors");
  }
  read(j, "output_dir", c.output_dir);
  validate(c);
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  return json{
      {"name", c.name},
      {"experiment", c.experiment},
      {"n", c.n},
      {"r_star", c.r_star},
      {"r", c.r},
      {"m", c.m ? json(*c.m) : json(nullptr)},
      {"mu", c.mu},
      {"alpha", c.alpha},
      {"alpha_scale", to_string(c.alpha_scale)},
      {"init_kind", to_string(c.init_kind)},
      {"truth", {{"kind", to_string(c.truth.kind)}, {"kappa", c.truth.kappa}}},
      {"ensemble", to_string(c.ensemble)},
      {"seeds", {{"instance", c.instance_seed}, {"init", c.init_seed}, {"repetitions", c.repetitions}}},
      {"max_iters", c.max_iters},
      {"record_stride", c.record_stride},
      {"stopping",
       {{"loss", c.stop_loss ? json(*c.stop_loss) : json(nullptr)},
        {"test_error_rel", c.stop_test_error_rel ? json(*c.stop_test_error_rel) : json(nullptr)}}},
      {"phases", {{"angle", c.phases.angle}, {"final_error", c.phases.final_error}}},
      {"sweep_r", {{"alignment_angle", c.alignment_angle}, {"test_error_sq", c.test_error_sq_threshold}}},
      {"lazy_vs_rich", {{"alpha_small", c.alpha_small}, {"alpha_large", c.alpha_large}}},
      {"spectral", {{"delta_trials", c.delta_trials}, {"safety_factor", c.delta_safety}}},
      {"rip", {{"ranks", c.rip_ranks}, {"trials", c.rip_trials}}},
      {"monitors",
       {{"enabled", c.monitors.enabled},
        {"lemmas", c.monitors.lemmas},
        {"c_small", c.monitors.c_small},
        {"mode", name_of(c.monitors.mode, kModeNames)},
        {"jsonl", c.monitors.write_jsonl},
        {"rip_trials", c.monitors.rip_trials}}},
      {"output_dir", c.output_dir},
  };
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config file '{}'", path));
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("{}: {}", path, e.what()));
  }
}

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const char* id : {"fig1", "fig2", "fig4", "fig5", "fig6", "fig7"}) {
    out.push_back(std::string(id) + "-full");
    out.push_back(std::string(id) + "-desk");
  }
  return out;
}

ExperimentConfig preset(const std::string& name) {
  const auto dash = name.rfind('-');
  require(dash != std::string::npos, fmt::format("unknown preset '{}'", name));
  const std::string id = name.substr(0, dash);
  const std::string scale = name.substr(dash + 1);
  require(scale == "full" || scale == "desk", fmt::format("unknown preset '{}'", name));
  const bool full = scale == "full";

  ExperimentConfig c;
  c.name = name;
  c.output_dir = "runs";
  if (full) {
    c.n = 200;
    c.r_star = 5;
  } else {
    c.n = 60;
    c.r_star = 3;
  }
  c.mu = 0.25;

  if (id == "fig1") {
    // Power-method comparison, r = r_star.
    c.experiment = "compare-spectral";
    if (full) c.r_star = 1;
    c.r = {c.r_star};
    c.alpha_scale = full ? AlphaScale::kAbsolute : AlphaScale::kRelativeToX;
    c.alpha = {full ? kFullScaleAlpha : 1e-6};
    c.max_iters = 150;
  } else if (id == "fig2") {
    c.experiment = "run";
    c.r = {full ? Index{60} : Index{6}};
    c.alpha_scale = full ? AlphaScale::kAbsolute : AlphaScale::kRelativeToX;
    c.alpha = {full ? kFullScaleAlpha : 1e-6};
    c.max_iters = full ? 2000 : 1000;
    c.stop_test_error_rel = 1e-6;
  } else if (id == "fig4") {
    c.experiment = "sweep-r";
    c.r = full ? std::vector<Index>{5, 10, 25, 50, 100, 200, 400} : std::vector<Index>{3, 6, 12};
    // Desk scale keeps ln(||X|| / alpha) at its full-scale value.
    c.alpha_scale = full ? AlphaScale::kAbsolute : AlphaScale::kRelativeToX;
    c.alpha = {kFullScaleAlpha};
    c.repetitions = full ? 1 : 5;
    c.max_iters = full ? 2000 : 1000;
  } else if (id == "fig5") {
    c.experiment = "sweep-alpha";
    c.r = {full ? Index{180} : Index{54}};
    c.alpha = full ? std::vector<double>{1e-2, 1e-3, 1e-4, 1e-5, 1e-6}
                    : std::vector<double>{1e-3, 1e-4, 1e-5, 1e-6};
    c.stop_loss = 0.5e-9;
    c.repetitions = full ? 1 : 5;
    c.max_iters = full ? 400000 : 3000;
    c.record_stride = full ? 100 : 10;
  } else if (id == "fig6") {
    c.experiment = "lazy-vs-rich";
    c.r = {full ? Index{180} : Index{54}};
    c.alpha_small = 1e-3;
    c.alpha_large = 0.5;
    c.max_iters = full ? 400000 : 8000;
    c.record_stride = full ? 100 : 10;
  } else if (id == "fig7") {
    c.experiment = "sweep-r";
    c.r = full ? std::vector<Index>{5, 10, 15, 20, 25, 30} : std::vector<Index>{3, 6, 9, 12, 18};
    c.alpha = {1e-3};
    c.repetitions = full ? 10 : 5;
    c.max_iters = full ? 5000 : 3000;
    c.test_error_sq_threshold = 1e-4;
  } else {
    throw ConfigError(fmt::format("unknown preset '{}'", name));
  }
  validate(c);
  return c;
}

ExperimentConfig resolve_config(const std::optional<std::string>& preset_name,
                                const std::optional<json>& patch) {
  json base = preset_name ? config_to_json(preset(*preset_name)) : config_to_json(ExperimentConfig{});
  if (patch) {
    require(patch->is_object(), "config must be a JSON object");
    base.merge_patch(*patch);
  }
  return config_from_json(base);
}

std::string config_hash(const json& canonical) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

MonitorConfig monitor_config(const MonitorSettings& s, double delta_hat) {
  MonitorConfig out;
  if (!s.lemmas.empty()) {
    out.enabled.clear();
    for (const auto& name : s.lemmas) out.enabled.insert(lemma_from_string(name));
  }
  out.c_small = s.c_small;
  out.delta_hat = delta_hat;
  out.report_mode = s.mode;
  return out;
}

}  // namespace lowrank::harness
