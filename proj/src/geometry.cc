#include "coopgot/geometry.h"

#include <algorithm>
#include <limits>

namespace coopgot {

double wrap_angle(double radians) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double a = std::remainder(radians, kTwoPi);
  if (a <= -std::numbers::pi) a += kTwoPi;
  return a;
}

Vec2 to_ego_frame(Vec2 p_world, const Pose2& ego) {
  const double c = std::cos(ego.yaw);
  const double s = std::sin(ego.yaw);
  const double dx = p_world.x - ego.x;
  const double dy = p_world.y - ego.y;
  return {c * dx + s * dy, -s * dx + c * dy};
}

Pose2 to_ego_frame(const Pose2& p_world, const Pose2& ego) {
  const Vec2 p = to_ego_frame(p_world.position(), ego);
  return {p.x, p.y, wrap_angle(p_world.yaw - ego.yaw)};
}

Vec2 from_ego_frame(Vec2 p_ego, const Pose2& ego) {
  const double c = std::cos(ego.yaw);
  const double s = std::sin(ego.yaw);
  return {ego.x + c * p_ego.x - s * p_ego.y, ego.y + s * p_ego.x + c * p_ego.y};
}

Pose2 from_ego_frame(const Pose2& p_ego, const Pose2& ego) {
  const Vec2 p = from_ego_frame(p_ego.position(), ego);
  return {p.x, p.y, wrap_angle(p_ego.yaw + ego.yaw)};
}

std::array<Vec2, 4> bbox_corners(const BBox2& b) {
  const double hl = 0.5 * b.length;
  const double hw = 0.5 * b.width;
  const std::array<Vec2, 4> local = {{{hl, hw}, {-hl, hw}, {-hl, -hw}, {hl, -hw}}};
  std::array<Vec2, 4> out;
  for (std::size_t i = 0; i < 4; ++i) out[i] = from_ego_frame(local[i], b.center);
  return out;
}

bool point_in_box(Vec2 p, const BBox2& b) {
  const Vec2 local = to_ego_frame(p, b.center);
  return std::abs(local.x) <= 0.5 * b.length && std::abs(local.y) <= 0.5 * b.width;
}

bool segment_intersects_box(Vec2 a, Vec2 b, const BBox2& box) {
  // Liang-Barsky clipping in the box frame.
  const Vec2 p0 = to_ego_frame(a, box.center);
  const Vec2 p1 = to_ego_frame(b, box.center);
  const Vec2 d = p1 - p0;
  const double hl = 0.5 * box.length;
  const double hw = 0.5 * box.width;
  double t_enter = 0.0;
  double t_exit = 1.0;
  const auto clip = [&](double denom, double numer) {
    // Constraint: denom * t <= numer.
    if (denom == 0.0) return numer >= 0.0;
    const double t = numer / denom;
    if (denom > 0.0) {
      t_exit = std::min(t_exit, t);
    } else {
      t_enter = std::max(t_enter, t);
    }
    return t_enter <= t_exit;
  };
  return clip(d.x, hl - p0.x) && clip(-d.x, hl + p0.x) && clip(d.y, hw - p0.y) &&
         clip(-d.y, hw + p0.y);
}

bool boxes_overlap(const BBox2& a, const BBox2& b) {
  const auto ca = bbox_corners(a);
  const auto cb = bbox_corners(b);
  const std::array<double, 4> yaws = {a.center.yaw, a.center.yaw + std::numbers::pi / 2,
                                      b.center.yaw, b.center.yaw + std::numbers::pi / 2};
  for (double yaw : yaws) {
    const Vec2 axis{std::cos(yaw), std::sin(yaw)};
    double a_min = std::numeric_limits<double>::infinity();
    double a_max = -a_min;
    double b_min = a_min;
    double b_max = -a_min;
    for (const Vec2& c : ca) {
      a_min = std::min(a_min, dot(c, axis));
      a_max = std::max(a_max, dot(c, axis));
    }
    for (const Vec2& c : cb) {
      b_min = std::min(b_min, dot(c, axis));
      b_max = std::max(b_max, dot(c, axis));
    }
    if (a_max < b_min || b_max < a_min) return false;
  }
  return true;
}

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = dot(ab, ab);
  if (len2 == 0.0) return distance(p, a);
  const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  return distance(p, a + t * ab);
}

}  // namespace coopgot
