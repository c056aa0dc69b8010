#pragma once

#include <array>
#include <cmath>
#include <numbers>

namespace coopgot {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2 a, Vec2 b) = default;

  double norm() const { return std::hypot(x, y); }
};

inline double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }

// Wraps an angle into (-pi, pi].
double wrap_angle(double radians);

inline double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

// Planar pose; yaw is counter-clockwise from +x.
struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;

  Vec2 position() const { return {x, y}; }
  friend bool operator==(const Pose2&, const Pose2&) = default;
};

// Expresses a world pose in the frame of `ego`.
Pose2 to_ego_frame(const Pose2& p_world, const Pose2& ego);
Vec2 to_ego_frame(Vec2 p_world, const Pose2& ego);
// Inverse of to_ego_frame.
Pose2 from_ego_frame(const Pose2& p_ego, const Pose2& ego);
Vec2 from_ego_frame(Vec2 p_ego, const Pose2& ego);

// Oriented BEV box. Length runs along the center yaw.
struct BBox2 {
  Pose2 center;
  double length = 0.0;
  double width = 0.0;
};

// Corners in counter-clockwise order, starting at the front-left corner.
std::array<Vec2, 4> bbox_corners(const BBox2& b);

bool point_in_box(Vec2 p, const BBox2& b);

// True if the closed segment [a, b] touches the box interior or boundary.
bool segment_intersects_box(Vec2 a, Vec2 b, const BBox2& box);

// Separating-axis test for two oriented boxes. Touching counts as overlap.
bool boxes_overlap(const BBox2& a, const BBox2& b);

// Minimum distance from point p to the segment [a, b].
double point_segment_distance(Vec2 p, Vec2 a, Vec2 b);

}  // namespace coopgot
