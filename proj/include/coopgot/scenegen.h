#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "coopgot/scene.h"
#include "coopgot/visibility.h"
#include "json.hpp"

namespace coopgot {

struct ScenarioConfig {
  int n_objects_min = 5;
  int n_objects_max = 15;
  double duration = 20.0;
  double speed_min = 0.0;
  double speed_max = 12.0;
  double turn_prob = 0.3;
  // Chance per scene of planting a truck between CAV-1 and another object.
  double occluder_prob = 0.5;
  double crossing_prob = 0.3;
  double bounds = 80.0;
  double rate_hz = 10.0;

  // Throws InvalidConfig.
  void validate() const;
};

nlohmann::json to_json(const ScenarioConfig& cfg);
ScenarioConfig scenario_config_from_json(const nlohmann::json& j);

// Extra clearance the generator keeps beyond the collision disc so that
// one-decimal rendering of ground truth never crosses it.
inline constexpr double kGeneratorClearance = 0.2;
inline constexpr int kMaxResamples = 20;

// Deterministic in (cfg, seed, detector). Throws GenerationFailed when the
// occlusion requirement cannot be met within kMaxResamples attempts.
Scene generate_scene(const ScenarioConfig& cfg, std::uint64_t seed,
                     const DetectorConfig& detector = {});

std::string seq_id_for_seed(std::uint64_t seed);

// Keyframes every 0.5 s from 0.5 s up to duration - 3 s.
std::vector<double> eligible_keyframes(const Scene& scene);

struct Violation {
  std::string code;
  std::string detail;
  std::vector<std::string> ids;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  bool has(const std::string& code) const;
};

ValidationReport validate_scene(const Scene& scene);

// True when no CAV ever comes within the collision disc of another agent.
bool ground_truth_collision_free(const Scene& scene);

}  // namespace coopgot
