#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "coopgot/geometry.h"
#include "json.hpp"

namespace coopgot {

// Uniformly sampled world-frame pose sequence.
struct Trajectory {
  double t0 = 0.0;
  double dt_sample = 0.1;
  std::vector<Pose2> poses;

  double duration() const {
    return poses.empty() ? 0.0 : static_cast<double>(poses.size() - 1) * dt_sample;
  }
  double t_end() const { return t0 + duration(); }
};

// Linear in position, shortest-arc in yaw. Throws OutOfRange outside the span.
Pose2 interpolate_pose(const Trajectory& traj, double t);

// Poses at t_now + k*dt for k = 1..n.
std::vector<Pose2> future_waypoints(const Trajectory& traj, double t_now, int n = 6,
                                    double dt = 0.5);

enum class ObjectKind { kVehicle, kCav };

struct TrackedObject {
  std::string id;
  double length = 4.5;
  double width = 1.9;
  Trajectory trajectory;
  ObjectKind kind = ObjectKind::kVehicle;

  BBox2 box_at(double t) const { return {interpolate_pose(trajectory, t), length, width}; }
  Pose2 pose_at(double t) const { return interpolate_pose(trajectory, t); }
};

struct Scene {
  std::string seq_id;
  double rate_hz = 10.0;
  double duration = 0.0;
  std::uint64_t seed = 0;
  std::vector<TrackedObject> cavs;
  std::vector<TrackedObject> objects;

  // CAVs first, then objects.
  std::vector<const TrackedObject*> agents() const;
  // Throws UnknownId.
  const TrackedObject& agent(const std::string& id) const;
  bool has_agent(const std::string& id) const;
};

// Disc radius used by the collision predicate: half the longer box side
// plus roughly half an ego vehicle width.
inline constexpr double kCollisionMargin = 1.0;
inline double collision_radius(double length, double width) {
  return 0.5 * std::max(length, width) + kCollisionMargin;
}
inline double collision_radius(const TrackedObject& o) { return collision_radius(o.length, o.width); }

// Millisecond key for a timestamp; used in ids and ledgers.
inline std::int64_t time_ms(double t) { return static_cast<std::int64_t>(std::llround(t * 1000.0)); }

nlohmann::json scene_to_json(const Scene& scene);
// Throws IoError on malformed documents.
Scene scene_from_json(const nlohmann::json& doc);

void write_scene_file(const Scene& scene, const std::filesystem::path& path,
                      const nlohmann::json& header);
Scene read_scene_file(const std::filesystem::path& path);
// Reads every *.json scene in a directory, sorted by file name.
std::vector<Scene> read_scene_dir(const std::filesystem::path& dir);

}  // namespace coopgot
