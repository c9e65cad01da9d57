#pragma once

#include "vinemap/pipeline.hpp"
#include "vinemap/simulator.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace vinemap {

struct SimulationConfig {
  std::uint64_t seed = 1;
  WorldConfig world;
  TrajectoryConfig trajectory;
  NoiseConfig noise;
  SensorRig rig;
};

struct EvaluationConfig {
  double r_match = 0.5;
  std::vector<LandmarkClass> classes{LandmarkClass::kPole, LandmarkClass::kTrunk};
  /// Class whose per-landmark errors feed the ablation summary.
  LandmarkClass ablation_class = LandmarkClass::kPole;
};

struct AppConfig {
  SimulationConfig simulation;
  PipelineConfig pipeline;
  EvaluationConfig evaluation;
};

/// Parses a JSON document over the defaults. Unknown fields and invalid
/// values raise ConfigError naming the offending field path.
AppConfig parse_config(std::string_view json_text);
AppConfig load_config(const std::string& path);

/// Canonical JSON of the effective configuration (sorted keys, fixed
/// formatting), suitable for hashing.
std::string config_to_json(const AppConfig& config);
std::string config_hash(const AppConfig& config);

}  // namespace vinemap
