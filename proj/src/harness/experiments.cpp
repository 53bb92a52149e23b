#include "lowrank/harness/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "lowrank/harness/output.hpp"
#include "lowrank/rng.hpp"

namespace lowrank::harness {

using nlohmann::json;

namespace {

json hashable(const ExperimentConfig& cfg) {
  json j = config_to_json(cfg);
  j.erase("output_dir");  // where results go must not change their name
  return j;
}

SolverConfig solver_config(const ExperimentConfig& cfg, const RunSpec& spec, double alpha_abs,
                           std::uint64_t init_seed) {
  SolverConfig sc;
  sc.r = spec.r;
  sc.mu = cfg.mu;
  sc.alpha = alpha_abs;
  sc.init_kind = cfg.init_kind;
  sc.max_iters = cfg.max_iters;
  sc.record_stride = cfg.record_stride;
  sc.stop_loss = cfg.stop_loss;
  sc.stop_test_error = cfg.stop_test_error_rel;
  sc.seed = init_seed;
  return sc;
}

// Per-run config recorded in the summary and hashed for the run directory name.
ExperimentConfig single_run_config(const ExperimentConfig& cfg, const RunSpec& spec) {
  ExperimentConfig one = cfg;
  one.r = {spec.r};
  one.alpha = {spec.alpha};
  return one;
}

fs::path run_dir(const fs::path& parent, const ExperimentConfig& cfg, const RunSpec& spec) {
  json key = hashable(single_run_config(cfg, spec));
  key["repetition"] = spec.repetition;
  return parent / fmt::format("run-{}", config_hash(key));
}

std::string rel(const std::optional<fs::path>& dir, const std::optional<fs::path>& base) {
  if (!dir || !base) return "";
  return fs::relative(*dir, *base).generic_string();
}

std::optional<long long> first_hit(const std::vector<TrajectoryRow>& rows,
                                   const std::function<bool(const TrajectoryRow&)>& pred) {
  for (const TrajectoryRow& row : rows) {
    if (pred(row)) return row.t;
  }
  return std::nullopt;
}

Aggregate aggregate(const std::vector<std::optional<long long>>& values) {
  Aggregate a;
  a.repetitions = static_cast<Index>(values.size());
  double sum = 0.0;
  for (const auto& v : values) {
    if (!v) continue;
    ++a.reached;
    sum += static_cast<double>(*v);
    a.min = a.min ? std::min(*a.min, *v) : *v;
    a.max = a.max ? std::max(*a.max, *v) : *v;
  }
  if (a.reached > 0) a.mean = sum / static_cast<double>(a.reached);
  return a;
}

json to_json(const Aggregate& a) {
  return json{{"mean", a.mean ? json(*a.mean) : json(nullptr)},
              {"min", optional_json(a.min)},
              {"max", optional_json(a.max)},
              {"reached", a.reached},
              {"repetitions", a.repetitions}};
}

LazySeries series_stats(const RunResult& run) {
  LazySeries s;
  s.alpha = run.spec.alpha;
  const auto& rows = run.record.rows;
  s.length = rows.size();
  if (rows.empty()) return s;
  s.loss_initial = rows.front().loss;
  s.loss_final = rows.back().loss;
  s.loss_decades = std::log10(s.loss_initial / s.loss_final);
  s.test_rel_initial = rows.front().test_error_rel;
  s.test_rel_final = rows.back().test_error_rel;
  s.test_rel_change = std::abs(s.test_rel_final - s.test_rel_initial) / s.test_rel_initial;
  return s;
}

json to_json(const LazySeries& s) {
  return json{{"alpha", s.alpha},
              {"length", s.length},
              {"loss_initial", number_or_null(s.loss_initial)},
              {"loss_final", number_or_null(s.loss_final)},
              {"loss_decades", number_or_null(s.loss_decades)},
              {"test_error_rel_initial", number_or_null(s.test_rel_initial)},
              {"test_error_rel_final", number_or_null(s.test_rel_final)},
              {"test_error_rel_change", number_or_null(s.test_rel_change)}};
}

json header(const std::string& kind, const ExperimentConfig& cfg) {
  return json{{"schema", kSchemaTag}, {"kind", kind}, {"config", config_to_json(cfg)}};
}

}  // namespace

RunSeeds seeds_for(const ExperimentConfig& cfg, Index repetition) {
  RunSeeds s;
  s.instance = derive_seed(cfg.instance_seed, static_cast<std::uint64_t>(repetition));
  s.ground_truth = derive_seed(s.instance, streams::kGroundTruth);
  s.sensing = derive_seed(s.instance, streams::kSensing);
  s.rip = derive_seed(s.instance, streams::kRip);
  s.init = derive_seed(cfg.init_seed, static_cast<std::uint64_t>(repetition));
  return s;
}

json to_json(const RunSeeds& s) {
  return json{{"instance", s.instance},
              {"ground_truth", s.ground_truth},
              {"sensing", s.sensing},
              {"rip", s.rip},
              {"init", s.init}};
}

ProblemInstance build_instance(const ExperimentConfig& cfg, Index repetition) {
  const RunSeeds s = seeds_for(cfg, repetition);
  return make_instance(make_ground_truth(cfg.n, cfg.r_star, cfg.truth, s.ground_truth),
                       SensingOperator::gaussian(cfg.n, cfg.measurements(), s.sensing, cfg.ensemble));
}

double absolute_alpha(const ExperimentConfig& cfg, const GroundTruth& truth, double configured) {
  return cfg.alpha_scale == AlphaScale::kRelativeToX ? configured * truth.spectral_norm() : configured;
}

RunResult execute_run(const ExperimentConfig& cfg, const RunSpec& spec, const std::optional<fs::path>& dir) {
  const ProblemInstance inst = build_instance(cfg, spec.repetition);
  return execute_run(cfg, inst, spec, dir);
}

RunResult execute_run(const ExperimentConfig& cfg, const ProblemInstance& inst, const RunSpec& spec,
                      const std::optional<fs::path>& dir) {
  const RunSeeds seeds = seeds_for(cfg, spec.repetition);
  RunResult out;
  out.spec = spec;
  out.dir = dir;
  out.alpha_abs = absolute_alpha(cfg, inst.truth(), spec.alpha);
  const SolverConfig sc = solver_config(cfg, spec, out.alpha_abs, seeds.init);
  validate(sc, inst.n());
  if (dir) fs::create_directories(*dir);

  std::optional<MonitorSuite> suite;
  std::ofstream jsonl;
  std::optional<MonitorConfig> mcfg;
  if (cfg.monitors.enabled) {
    const double delta_hat = delta1_estimate(inst.op(), cfg.monitors.rip_trials, seeds.rip);
    mcfg = monitor_config(cfg.monitors, delta_hat);
    std::function<void(const LemmaCheck&)> sink;
    if (dir && cfg.monitors.write_jsonl) {
      jsonl.open(*dir / "monitors.jsonl", std::ios::binary | std::ios::trunc);
      sink = [&jsonl](const LemmaCheck& check) { jsonl << json(check).dump() << '\n'; };
    }
    suite.emplace(inst, cfg.mu, out.alpha_abs, *mcfg, std::move(sink));
  }

  const auto start = std::chrono::steady_clock::now();
  out.record = run_gd(inst, sc, suite ? suite->observer() : IterateObserver{});
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out.phases = detect_phases(out.record.rows, inst.truth(), cfg.phases);
  if (suite) {
    out.monitors = suite->report();
    out.monitors->sink = nullptr;  // refers to the local stream
  }

  const TrajectoryRow& last = out.record.rows.back();
  out.summary = header("run", single_run_config(cfg, spec));
  out.summary["run"] = {{"r", spec.r},
                        {"alpha", spec.alpha},
                        {"alpha_abs", out.alpha_abs},
                        {"repetition", spec.repetition},
                        {"m", inst.op().m()}};
  out.summary["seeds"] = to_json(seeds);
  out.summary["final"] = {{"t", last.t},
                          {"loss", number_or_null(last.loss)},
                          {"test_error", number_or_null(last.test_error)},
                          {"test_error_rel", number_or_null(last.test_error_rel)}};
  out.summary["diverged"] = out.record.diverged;
  out.summary["stop_reason"] = to_string(out.record.stop_reason);
  out.summary["iterations"] = out.record.iterations;
  out.summary["phases"] = to_json(out.phases);
  out.summary["wall_time_s"] = out.wall_seconds;
  out.summary["monitors"] = out.monitors ? summary_json(*out.monitors, *mcfg) : json(nullptr);
  out.summary["instance"] = instance_metadata(inst);

  if (dir) {
    write_text(*dir / "trajectory.csv", trajectory_csv(out.record.rows));
    write_json(*dir / "summary.json", out.summary);
    if (out.monitors) write_json(*dir / "monitors_summary.json", summary_json(*out.monitors, *mcfg));
  }
  return out;
}

fs::path command_dir(const ExperimentConfig& cfg, const fs::path& root) {
  return root / fmt::format("{}-{}", cfg.name, config_hash(hashable(cfg)));
}

void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& task) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        task(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto threads = static_cast<std::size_t>(std::max(1, jobs));
  if (threads == 1 || count <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < std::min(threads, count); ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::optional<double> loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) return std::nullopt;
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log10(x[i]);
    my += std::log10(y[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log10(x[i]) - mx;
    sxy += dx * (std::log10(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) return std::nullopt;
  return sxy / sxx;
}

SweepAlphaResult sweep_alpha(const ExperimentConfig& cfg, int jobs, const std::optional<fs::path>& root) {
  SweepAlphaResult out;
  if (root) out.dir = command_dir(cfg, *root);
  std::vector<double> alphas = cfg.alpha;
  std::sort(alphas.begin(), alphas.end());
  alphas.erase(std::unique(alphas.begin(), alphas.end()), alphas.end());

  std::vector<RunSpec> specs;
  for (double a : alphas) {
    for (Index rep = 0; rep < cfg.repetitions; ++rep) specs.push_back({cfg.r.front(), a, rep});
  }
  out.runs.resize(specs.size());
  parallel_for(specs.size(), jobs, [&](std::size_t i) {
    std::optional<fs::path> dir;
    if (out.dir) dir = run_dir(*out.dir / "runs", cfg, specs[i]);
    out.runs[i] = execute_run(cfg, specs[i], dir);
  });

  std::vector<std::vector<std::string>> table;
  json runs = json::array();
  for (const RunResult& run : out.runs) {
    const TrajectoryRow& last = run.record.rows.back();
    out.any_diverged = out.any_diverged || run.record.diverged;
    table.push_back({format_number(run.spec.alpha), format_number(run.alpha_abs),
                     std::to_string(run.spec.repetition), format_number(last.test_error_rel),
                     format_number(last.loss), std::to_string(run.record.iterations),
                     to_string(run.record.stop_reason)});
    runs.push_back({{"dir", rel(run.dir, out.dir)},
                    {"alpha", run.spec.alpha},
                    {"alpha_abs", run.alpha_abs},
                    {"repetition", run.spec.repetition},
                    {"final_test_error_rel", number_or_null(last.test_error_rel)},
                    {"final_loss", number_or_null(last.loss)},
                    {"iterations", run.record.iterations},
                    {"stop_reason", to_string(run.record.stop_reason)}});
  }

  std::vector<double> xs, ys;
  for (std::size_t a = 0; a < alphas.size(); ++a) {
    AlphaPoint p;
    p.alpha = alphas[a];
    p.repetitions = cfg.repetitions;
    double sum = 0.0;
    p.min_error = INFINITY;
    p.max_error = -INFINITY;
    for (Index rep = 0; rep < cfg.repetitions; ++rep) {
      const RunResult& run = out.runs[a * static_cast<std::size_t>(cfg.repetitions) + static_cast<std::size_t>(rep)];
      const double e = run.record.rows.back().test_error_rel;
      sum += e;
      p.min_error = std::min(p.min_error, e);
      p.max_error = std::max(p.max_error, e);
      if (run.record.stop_reason == StopReason::kStopLoss || run.record.stop_reason == StopReason::kStopTestError) {
        ++p.reached_stop;
      }
    }
    p.mean_error = sum / static_cast<double>(cfg.repetitions);
    out.points.push_back(p);
    xs.push_back(p.alpha);
    ys.push_back(p.mean_error);
  }
  out.slope = loglog_slope(xs, ys);
  out.strictly_decreasing = true;
  for (std::size_t i = 1; i < out.points.size(); ++i) {
    // ascending alpha: errors must strictly increase
    if (!(out.points[i].mean_error > out.points[i - 1].mean_error)) out.strictly_decreasing = false;
  }

  json points = json::array();
  for (const AlphaPoint& p : out.points) {
    points.push_back({{"alpha", p.alpha},
                      {"mean_test_error_rel", number_or_null(p.mean_error)},
                      {"min_test_error_rel", number_or_null(p.min_error)},
                      {"max_test_error_rel", number_or_null(p.max_error)},
                      {"reached_stop", p.reached_stop},
                      {"repetitions", p.repetitions}});
  }
  out.index = header("sweep-alpha", cfg);
  out.index["points"] = points;
  out.index["slope"] = out.slope ? json(*out.slope) : json(nullptr);
  out.index["strictly_decreasing"] = out.strictly_decreasing;
  out.index["any_diverged"] = out.any_diverged;
  out.index["runs"] = runs;
  if (out.dir) {
    write_text(*out.dir / "alpha_table.csv",
               table_csv({"alpha", "alpha_abs", "repetition", "final_test_error_rel", "final_loss",
                          "iterations", "stop_reason"},
                         table));
    write_json(*out.dir / "index.json", out.index);
  }
  return out;
}

SweepRResult sweep_r(const ExperimentConfig& cfg, int jobs, const std::optional<fs::path>& root) {
  SweepRResult out;
  if (root) out.dir = command_dir(cfg, *root);
  std::vector<RunSpec> specs;
  for (Index r : cfg.r) {
    for (Index rep = 0; rep < cfg.repetitions; ++rep) specs.push_back({r, cfg.alpha.front(), rep});
  }
  out.runs.resize(specs.size());
  out.iters_to_alignment.resize(specs.size());
  out.iters_to_test_error.resize(specs.size());
  parallel_for(specs.size(), jobs, [&](std::size_t i) {
    const ProblemInstance inst = build_instance(cfg, specs[i].repetition);
    // ||UU^T - XX^T||_F^2 <= thr, expressed on the relative error the solver tracks.
    const double rel_threshold = std::sqrt(cfg.test_error_sq_threshold) / inst.target().norm();
    ExperimentConfig run_cfg = cfg;
    run_cfg.stop_test_error_rel =
        cfg.stop_test_error_rel ? std::min(*cfg.stop_test_error_rel, rel_threshold) : rel_threshold;
    std::optional<fs::path> dir;
    if (out.dir) dir = run_dir(*out.dir / "runs", cfg, specs[i]);
    out.runs[i] = execute_run(run_cfg, inst, specs[i], dir);
    const auto& rows = out.runs[i].record.rows;
    out.iters_to_alignment[i] =
        first_hit(rows, [&](const TrajectoryRow& row) { return row.angle_l_lt <= cfg.alignment_angle; });
    out.iters_to_test_error[i] =
        first_hit(rows, [&](const TrajectoryRow& row) { return row.test_error_rel <= rel_threshold; });
  });

  json runs = json::array();
  std::vector<std::vector<std::string>> table;
  for (std::size_t i = 0; i < out.runs.size(); ++i) {
    const RunResult& run = out.runs[i];
    out.any_diverged = out.any_diverged || run.record.diverged;
    auto cell = [](const std::optional<long long>& v) { return v ? std::to_string(*v) : std::string(); };
    table.push_back({std::to_string(run.spec.r), std::to_string(run.spec.repetition),
                     cell(out.iters_to_alignment[i]), cell(out.iters_to_test_error[i]),
                     std::to_string(run.record.iterations), to_string(run.record.stop_reason)});
    runs.push_back({{"dir", rel(run.dir, out.dir)},
                    {"r", run.spec.r},
                    {"repetition", run.spec.repetition},
                    {"iters_to_alignment", optional_json(out.iters_to_alignment[i])},
                    {"iters_to_test_error", optional_json(out.iters_to_test_error[i])},
                    {"iterations", run.record.iterations},
                    {"stop_reason", to_string(run.record.stop_reason)}});
  }
  json points = json::array();
  for (std::size_t k = 0; k < cfg.r.size(); ++k) {
    const auto first = k * static_cast<std::size_t>(cfg.repetitions);
    const auto last = first + static_cast<std::size_t>(cfg.repetitions);
    RPoint p;
    p.r = cfg.r[k];
    p.alignment = aggregate({out.iters_to_alignment.begin() + static_cast<std::ptrdiff_t>(first),
                             out.iters_to_alignment.begin() + static_cast<std::ptrdiff_t>(last)});
    p.test_error = aggregate({out.iters_to_test_error.begin() + static_cast<std::ptrdiff_t>(first),
                              out.iters_to_test_error.begin() + static_cast<std::ptrdiff_t>(last)});
    out.points.push_back(p);
    points.push_back({{"r", p.r},
                      {"iters_to_alignment", to_json(p.alignment)},
                      {"iters_to_test_error", to_json(p.test_error)}});
  }
  out.index = header("sweep-r", cfg);
  out.index["points"] = points;
  out.index["any_diverged"] = out.any_diverged;
  out.index["runs"] = runs;
  if (out.dir) {
    write_text(*out.dir / "r_table.csv",
               table_csv({"r", "repetition", "iters_to_alignment", "iters_to_test_error", "iterations",
                          "stop_reason"},
                         table));
    write_json(*out.dir / "index.json", out.index);
  }
  return out;
}

CompareResult compare_spectral(const ExperimentConfig& cfg, const std::optional<fs::path>& root) {
  CompareResult out;
  if (root) out.dir = command_dir(cfg, *root);
  const RunSpec spec{cfg.r.front(), cfg.alpha.front(), 0};
  const RunSeeds seeds = seeds_for(cfg, 0);
  const ProblemInstance inst = build_instance(cfg, 0);
  const double alpha_abs = absolute_alpha(cfg, inst.truth(), spec.alpha);
  const SolverConfig sc = solver_config(cfg, spec, alpha_abs, seeds.init);
  const double delta1 = delta1_estimate(inst.op(), cfg.delta_trials, seeds.rip, cfg.delta_safety);

  out.comparison = compare_gd_power(inst, sc, cfg.max_iters);
  out.bound = spectral_phase_bounds(inst, sc, delta1, out.comparison);
  out.window_from_empirical = out.bound.t_star_empirical.has_value();
  out.window_end = out.window_from_empirical ? *out.bound.t_star_empirical : out.bound.t_star_lower;

  const auto& c = out.comparison;
  for (std::size_t i = 0; i < c.t.size(); ++i) {
    const double gap = std::abs(c.theta_gd[i] - c.theta_p[i]);
    out.max_theta_gap_horizon = std::max(out.max_theta_gap_horizon, gap);
    if (2 * c.t[i] <= out.window_end) out.max_theta_gap_half_window = std::max(out.max_theta_gap_half_window, gap);
    if (c.t[i] >= 1 && c.t[i] <= out.window_end) {
      out.max_err_over_bound = std::max(out.max_err_over_bound, c.err_norm[i] / out.bound.e_bound[i]);
    }
  }

  json bound = to_json(out.bound);
  bound["window_end"] = out.window_end;
  bound["window_source"] = out.window_from_empirical ? "t_star_empirical" : "t_star_lower";
  bound["max_theta_gap_half_window"] = out.max_theta_gap_half_window;
  bound["max_err_over_bound"] = out.max_err_over_bound;
  bound["max_theta_gap_horizon"] = out.max_theta_gap_horizon;
  bound["truncated_at"] = optional_json(c.truncated_at);
  out.summary = header("compare-spectral", cfg);
  out.summary["seeds"] = to_json(seeds);
  out.summary["alpha_abs"] = alpha_abs;
  out.summary["bound"] = bound;
  out.summary["instance"] = instance_metadata(inst);
  if (out.dir) {
    write_text(*out.dir / "comparison.csv", comparison_csv(c, out.bound.e_bound));
    json standalone = bound;
    standalone["schema"] = kSchemaTag;
    write_json(*out.dir / "spectral_bound.json", standalone);
    write_json(*out.dir / "summary.json", out.summary);
  }
  return out;
}

LazyRichResult lazy_vs_rich(const ExperimentConfig& cfg, int jobs, const std::optional<fs::path>& root) {
  LazyRichResult out;
  if (root) out.dir = command_dir(cfg, *root);
  ExperimentConfig run_cfg = cfg;  // fixed budget: no early stopping
  run_cfg.stop_loss.reset();
  run_cfg.stop_test_error_rel.reset();
  const RunSpec small{cfg.r.front(), cfg.alpha_small, 0};
  const RunSpec large{cfg.r.front(), cfg.alpha_large, 0};
  parallel_for(2, jobs, [&](std::size_t i) {
    std::optional<fs::path> dir;
    if (out.dir) dir = *out.dir / (i == 0 ? "alpha_small" : "alpha_large");
    (i == 0 ? out.small : out.large) = execute_run(run_cfg, i == 0 ? small : large, dir);
  });
  out.small_series = series_stats(out.small);
  out.large_series = series_stats(out.large);
  out.summary = header("lazy-vs-rich", cfg);
  out.summary["budget"] = cfg.max_iters;
  out.summary["alpha_small"] = to_json(out.small_series);
  out.summary["alpha_large"] = to_json(out.large_series);
  out.summary["diverged"] = out.small.record.diverged || out.large.record.diverged;
  if (out.dir) write_json(*out.dir / "lazy_vs_rich.json", out.summary);
  return out;
}

RipResult rip_audit(const ExperimentConfig& cfg, const std::optional<fs::path>& root) {
  RipResult out;
  if (root) out.dir = command_dir(cfg, *root);
  const RunSeeds seeds = seeds_for(cfg, 0);
  const SensingOperator op = SensingOperator::gaussian(cfg.n, cfg.measurements(), seeds.sensing, cfg.ensemble);
  json estimates = json::array();
  for (Index rank : cfg.rip_ranks) {
    out.estimates.push_back(
        estimate_rip(op, rank, cfg.rip_trials, derive_seed(seeds.rip, static_cast<std::uint64_t>(rank))));
    estimates.push_back(out.estimates.back());
  }
  out.summary = header("rip-estimate", cfg);
  out.summary["seeds"] = to_json(seeds);
  out.summary["estimates"] = estimates;
  if (out.dir) write_json(*out.dir / "rip.json", out.summary);
  return out;
}

}  // namespace lowrank::harness
