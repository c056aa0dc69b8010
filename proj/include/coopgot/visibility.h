#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "coopgot/geometry.h"
#include "coopgot/scene.h"
#include "json.hpp"

namespace coopgot {

// Simulated single-vehicle detector. A target counts as occluded when at
// least `blocked_fraction` of the sight segments to its sample points cross
// another agent's box.
struct DetectorConfig {
  double range_m = 70.0;
  double blocked_fraction = 0.75;
  int n_target_samples = 9;
  double dropout_prob = 0.0;
  std::uint64_t seed = 0;

  // Throws InvalidConfig.
  void validate() const;
};

nlohmann::json to_json(const DetectorConfig& cfg);
DetectorConfig detector_config_from_json(const nlohmann::json& j);

struct OcclusionResult {
  bool occluded = false;
  double blocked_fraction = 0.0;
};

struct Detection {
  // Ground-truth identity. Curation and metrics use it; answerers must not.
  std::string object_id;
  Pose2 center;
  double length = 0.0;
  double width = 0.0;
};

struct DetectionSet {
  std::string cav_id;
  double t = 0.0;
  std::vector<Detection> detections;

  bool contains(const std::string& object_id) const;
};

// Center first, then perimeter points spread over the four edges starting
// at each corner. n = 9 gives center, 4 corners and 4 edge midpoints.
std::vector<Vec2> target_sample_points(const BBox2& box, int n);

// Throws UnknownId for missing ids or observer == target.
OcclusionResult is_occluded(const Scene& scene, double t, const std::string& observer_id,
                            const std::string& target_id, const DetectorConfig& cfg = {});

// Throws UnknownId, or OutOfRange when t is not a sample time of the scene.
DetectionSet detect(const Scene& scene, double t, const std::string& cav_id,
                    const DetectorConfig& cfg);

// Unoccluded agents (excluding the observer) nearest to cav_id, ascending by
// center distance with id tie-break, truncated to k.
std::vector<std::string> nearest_unoccluded(const Scene& scene, double t,
                                            const std::string& cav_id, int k = 3,
                                            const DetectorConfig& cfg = {});

nlohmann::json to_json(const DetectionSet& set);

}  // namespace coopgot
