#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include <json.hpp>

#include "simce/channel.hpp"
#include "simce/estimator.hpp"
#include "simce/monte_carlo.hpp"
#include "simce/wave_model.hpp"

namespace simce {

struct EstimatorConfig {
  std::optional<int> subphases;      // defaults to ceil(N / M)
  std::optional<int> codebook_size;  // defaults to 10 L N
  double low_rank_threshold = 0.9999;
  DesignHyper hyper;
};

// Everything one experiment cell needs. Defaults reproduce the reference
// scenario: 28 GHz, 8x8 atoms, 6 layers in 5 cm, 4 antennas, users at
// 50/60/70/80 m, 1 W pilots of length K, -110 dBm noise.
struct SimulationConfig {
  GeometryConfig geometry;
  UsersConfig users;
  PilotConfig pilot;
  std::optional<double> effective_snr_db;  // re-solves the noise variance when set
  EstimatorConfig estimator;
  int trials = 1000;
  TrainingPath training_path = TrainingPath::kReduced;
  std::uint64_t seed = 1;

  int atoms() const { return geometry.nx * geometry.nz; }
  int resolved_subphases() const;
  int resolved_codebook_size() const;
};

// Strict: unknown keys and ill-typed values raise ConfigError naming the key.
SimulationConfig parse_config(const nlohmann::json& doc);
SimulationConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const SimulationConfig& config);

// Built model for one configuration.
struct Scenario {
  SimulationConfig config;
  SimGeometry geometry;
  WaveModel model;
  ChannelStats stats;
  int subphases = 0;
};

Scenario build_scenario(const SimulationConfig& config);

}  // namespace simce
