#include "lowrank/harness/output.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <fmt/format.h>

namespace lowrank::harness {

using nlohmann::json;

std::string format_number(double v) {
  // fmt never consults the global locale unless asked to ('L').
  return fmt::format("{:.15e}", v);
}

std::string trajectory_csv(const std::vector<TrajectoryRow>& rows) {
  std::string out = kTrajectoryHeader;
  out += '\n';
  for (const TrajectoryRow& r : rows) {
    out += std::to_string(r.t);
    for (double v : {r.loss, r.test_error, r.test_error_rel, r.sigma_rstar, r.sigma_rstar_plus1,
                     r.spec_norm, r.angle_l_lt, r.angle_x_lt, r.signal_sigma_min, r.noise_spec,
                     r.angle_x_signal, r.sigma_min_vxu}) {
      out += ',';
      out += format_number(v);
    }
    out += '\n';
  }
  return out;
}

std::string comparison_csv(const PowerComparison& cmp, const std::vector<double>& e_bound) {
  std::string out = kComparisonHeader;
  out += '\n';
  for (std::size_t i = 0; i < cmp.t.size(); ++i) {
    const double bound = i < e_bound.size() ? e_bound[i] : std::nan("");
    out += fmt::format("{},{},{},{},{}\n", cmp.t[i], format_number(cmp.theta_gd[i]),
                       format_number(cmp.theta_p[i]), format_number(cmp.err_norm[i]),
                       format_number(bound));
  }
  return out;
}

std::string table_csv(const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) {
    out += (i ? "," : "") + header[i];
  }
  out += '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      out += (i ? "," : "") + row[i];
    }
    out += '\n';
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error(fmt::format("failed to write {}", path.string()));
}

void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json optional_json(const std::optional<long long>& v) { return v ? json(*v) : json(nullptr); }

json to_json(const PhaseReport& p) {
  json lengths = nullptr;
  if (auto l = p.phase_lengths()) lengths = *l;
  return json{{"t_spectral_end", optional_json(p.t_spectral_end)},
              {"t1", optional_json(p.t1)},
              {"t_hat", optional_json(p.t_hat)},
              {"all_detected", p.all_detected()},
              {"ordered", p.ordered()},
              {"phase_lengths", lengths}};
}

json to_json(const TrajectoryRow& r) {
  return json{{"t", r.t},
              {"loss", number_or_null(r.loss)},
              {"test_error", number_or_null(r.test_error)},
              {"test_error_rel", number_or_null(r.test_error_rel)},
              {"sigma_rstar", number_or_null(r.sigma_rstar)},
              {"sigma_rstar_plus1", number_or_null(r.sigma_rstar_plus1)},
              {"spec_norm", number_or_null(r.spec_norm)},
              {"angle_L_Lt", number_or_null(r.angle_l_lt)},
              {"angle_X_Lt", number_or_null(r.angle_x_lt)},
              {"signal_sigma_min", number_or_null(r.signal_sigma_min)},
              {"noise_spec", number_or_null(r.noise_spec)},
              {"angle_X_signal", number_or_null(r.angle_x_signal)},
              {"sigma_min_VXU", number_or_null(r.sigma_min_vxu)}};
}

json to_json(const SpectralPhaseBound& b) {
  return json{{"t_star_lower", b.t_star_lower},
              {"warning", b.warning ? json(*b.warning) : json(nullptr)},
              {"t_star_empirical", optional_json(b.t_star_empirical)},
              {"delta1_hat", b.delta1_hat}};
}

}  // namespace lowrank::harness
