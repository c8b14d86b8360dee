#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "simce/config.hpp"
#include "simce/estimator.hpp"

namespace simce {

// Design artifact: the configuration it was built for, the scheme, the
// hyperparameters, the phase tensor (row-major S, L, N, radians), per-user and
// average NMSE, and the objective trace. Digital stages are not stored; they
// are a deterministic function of the phases and are recomputed on load.
struct StoredDesign {
  std::string scheme;
  SimulationConfig config;
  EstimatorDesign design;
};

inline constexpr const char* kDesignFormat = "simce-estimator-design";
inline constexpr int kDesignFormatVersion = 1;

nlohmann::json design_to_json(const StoredDesign& stored);
StoredDesign design_from_json(const nlohmann::json& doc);

void save_design(const std::filesystem::path& path, const StoredDesign& stored);
StoredDesign load_design(const std::filesystem::path& path);

}  // namespace simce
