#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "lowrank/diagnostics.hpp"
#include "lowrank/spectral.hpp"

namespace lowrank::harness {

inline constexpr const char* kSchemaTag = "lowrank-phases/v1";

/// Fixed trajectory header; never reordered under kSchemaTag.
inline constexpr const char* kTrajectoryHeader =
    "t,loss,test_error,test_error_rel,sigma_rstar,sigma_rstar_plus1,spec_norm,angle_L_Lt,angle_X_Lt,"
    "signal_sigma_min,noise_spec,angle_X_signal,sigma_min_VXU";

inline constexpr const char* kComparisonHeader = "t,theta_gd,theta_p,err_norm,err_bound";

/// Scientific notation with 16 significant digits ("%.15e"); '.' decimal regardless of locale.
std::string format_number(double v);

std::string trajectory_csv(const std::vector<TrajectoryRow>& rows);
std::string comparison_csv(const PowerComparison& cmp, const std::vector<double>& e_bound);

/// Generic table: header names and rows of already formatted cells.
std::string table_csv(const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows);

void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

/// Finite numbers as JSON numbers; NaN/inf as null (callers flag divergence separately).
nlohmann::json number_or_null(double v);
nlohmann::json optional_json(const std::optional<long long>& v);

nlohmann::json to_json(const PhaseReport& phases);
nlohmann::json to_json(const TrajectoryRow& row);
nlohmann::json to_json(const SpectralPhaseBound& bound);

}  // namespace lowrank::harness
