// Command-line front end: one subcommand per experiment, all sharing
// --config / --preset / --out / --jobs. Exit codes: 0 ok, 2 config error,
// 3 divergence, 1 anything else.
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <fmt/format.h>

#include "CLI11.hpp"

#include "lowrank/harness/config.hpp"
#include "lowrank/harness/experiments.hpp"
#include "lowrank/harness/output.hpp"

namespace {

using namespace lowrank;
using namespace lowrank::harness;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;

struct CommonOptions {
  std::string config_path;
  std::string preset_name;
  std::string out;
  int jobs = 1;
  bool monitors = false;
};

void add_common(CLI::App* sub, CommonOptions& o) {
  sub->add_option("--config", o.config_path, "JSON config (merged over the preset, if any)");
  sub->add_option("--preset", o.preset_name, "named preset, e.g. fig4-desk");
  sub->add_option("--out", o.out, "output root directory (overrides output_dir)");
  sub->add_option("--jobs", o.jobs, "worker threads for sweeps")->check(CLI::PositiveNumber);
  sub->add_flag("--monitors", o.monitors, "enable the lemma monitors");
}

ExperimentConfig load(const CommonOptions& o) {
  std::optional<std::string> preset_name;
  if (!o.preset_name.empty()) preset_name = o.preset_name;
  std::optional<nlohmann::json> patch;
  if (!o.config_path.empty()) patch = read_json_file(o.config_path);
  ExperimentConfig cfg = resolve_config(preset_name, patch);
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (o.monitors) cfg.monitors.enabled = true;
  return cfg;
}

void save_config(const ExperimentConfig& cfg, const fs::path& dir) {
  write_json(dir / "config.json", config_to_json(cfg));
}

int cmd_run(const ExperimentConfig& cfg) {
  if (cfg.r.size() > 1 || cfg.alpha.size() > 1) {
    fmt::print(stderr, "note: run uses the first r and alpha of the configured lists\n");
  }
  const fs::path dir = command_dir(cfg, cfg.output_dir);
  const RunResult res = execute_run(cfg, RunSpec{cfg.r.front(), cfg.alpha.front(), 0}, dir);
  save_config(cfg, dir);
  const auto& last = res.record.rows.back();
  fmt::print("{}\n  iterations {}  stop {}  loss {:.3e}  test_error_rel {:.3e}  ({:.2f} s)\n",
             dir.string(), res.record.iterations, to_string(res.record.stop_reason), last.loss,
             last.test_error_rel, res.wall_seconds);
  if (res.monitors) {
    fmt::print("  monitors: {} applicable checks, {} violations\n", res.monitors->applicable(),
               res.monitors->violations());
  }
  return res.record.diverged ? kExitDiverged : kExitOk;
}

int cmd_sweep_alpha(const ExperimentConfig& cfg, int jobs) {
  const SweepAlphaResult res = sweep_alpha(cfg, jobs, fs::path(cfg.output_dir));
  save_config(cfg, *res.dir);
  fmt::print("{}\n", res.dir->string());
  for (const AlphaPoint& p : res.points) {
    fmt::print("  alpha {:.3e}  mean test_error_rel {:.4e}  (reached stop {}/{})\n", p.alpha, p.mean_error,
               p.reached_stop, p.repetitions);
  }
  fmt::print("  slope {}\n", res.slope ? fmt::format("{:.4f}", *res.slope) : std::string("absent"));
  return res.any_diverged ? kExitDiverged : kExitOk;
}

int cmd_sweep_r(const ExperimentConfig& cfg, int jobs) {
  const SweepRResult res = sweep_r(cfg, jobs, fs::path(cfg.output_dir));
  save_config(cfg, *res.dir);
  fmt::print("{}\n", res.dir->string());
  auto show = [](const Aggregate& a) {
    return a.mean ? fmt::format("{:.1f} [{}, {}] ({}/{})", *a.mean, *a.min, *a.max, a.reached, a.repetitions)
                  : fmt::format("never (0/{})", a.repetitions);
  };
  for (const RPoint& p : res.points) {
    fmt::print("  r {:4d}  alignment {}  test error {}\n", p.r, show(p.alignment), show(p.test_error));
  }
  return res.any_diverged ? kExitDiverged : kExitOk;
}

int cmd_compare(const ExperimentConfig& cfg) {
  const CompareResult res = compare_spectral(cfg, fs::path(cfg.output_dir));
  save_config(cfg, *res.dir);
  fmt::print("{}\n  t*_lower {}  t*_empirical {}  max |theta_gd - theta_p| (t <= {}/2) {:.3e}\n",
             res.dir->string(), res.bound.t_star_lower,
             res.bound.t_star_empirical ? std::to_string(*res.bound.t_star_empirical) : "absent",
             res.window_end, res.max_theta_gap_half_window);
  return kExitOk;
}

int cmd_lazy(const ExperimentConfig& cfg, int jobs) {
  const LazyRichResult res = lazy_vs_rich(cfg, jobs, fs::path(cfg.output_dir));
  save_config(cfg, *res.dir);
  fmt::print("{}\n", res.dir->string());
  for (const LazySeries* s : {&res.small_series, &res.large_series}) {
    fmt::print("  alpha {:.3e}  loss decades {:.2f}  test_error_rel {:.3e} -> {:.3e}\n", s->alpha,
               s->loss_decades, s->test_rel_initial, s->test_rel_final);
  }
  return res.summary.at("diverged").get<bool>() ? kExitDiverged : kExitOk;
}

int cmd_rip(const ExperimentConfig& cfg) {
  const RipResult res = rip_audit(cfg, fs::path(cfg.output_dir));
  save_config(cfg, *res.dir);
  fmt::print("{}\n", res.dir->string());
  for (const RipEstimate& e : res.estimates) {
    fmt::print("  rank {}  delta >= {:.4f}  ({} trials)\n", e.rank, e.delta_lower, e.trials);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient descent for low-rank matrix sensing: runs, sweeps and audits"};
  app.require_subcommand(1);
  CommonOptions opts;
  const std::vector<std::string> names{"run", "sweep-alpha", "sweep-r", "compare-spectral", "lazy-vs-rich",
                                       "rip-estimate"};
  for (const auto& name : names) add_common(app.add_subcommand(name), opts);

  std::string presets_out;
  CLI::App* dump = app.add_subcommand("presets", "list presets, or write them as JSON files");
  dump->add_option("--out", presets_out, "directory to write <preset>.json files into");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (dump->parsed()) {
      for (const auto& name : preset_names()) {
        if (presets_out.empty()) {
          fmt::print("{}\n", name);
        } else {
          write_json(fs::path(presets_out) / (name + ".json"), config_to_json(preset(name)));
        }
      }
      return kExitOk;
    }
    const std::string cmd = app.get_subcommands().front()->get_name();
    const ExperimentConfig cfg = load(opts);
    if (cmd == "run") return cmd_run(cfg);
    if (cmd == "sweep-alpha") return cmd_sweep_alpha(cfg, opts.jobs);
    if (cmd == "sweep-r") return cmd_sweep_r(cfg, opts.jobs);
    if (cmd == "compare-spectral") return cmd_compare(cfg);
    if (cmd == "lazy-vs-rich") return cmd_lazy(cfg, opts.jobs);
    if (cmd == "rip-estimate") return cmd_rip(cfg);
  } catch (const ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitFailure;
  }
  return kExitFailure;
}
