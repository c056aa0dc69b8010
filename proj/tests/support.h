#pragma once

// Hand-built scenes and independent reference computations shared by the
// unit and acceptance tests.

#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "coopgot/geometry.h"
#include "coopgot/rng.h"
#include "coopgot/scene.h"
#include "coopgot/visibility.h"

namespace coopgot::testing {

// Sampled trajectory from a pose function over [0, duration].
inline Trajectory sample_traj(const std::function<Pose2(double)>& f, double duration, double rate = 10.0) {
  Trajectory tr;
  tr.t0 = 0.0;
  tr.dt_sample = 1.0 / rate;
  const int n = static_cast<int>(std::lround(duration * rate));
  for (int i = 0; i <= n; ++i) tr.poses.push_back(f(i / rate));
  return tr;
}

inline Trajectory line_traj(Vec2 p0, double yaw, double speed, double duration, double rate = 10.0) {
  return sample_traj(
      [=](double t) {
        return Pose2{p0.x + speed * t * std::cos(yaw), p0.y + speed * t * std::sin(yaw), yaw};
      },
      duration, rate);
}

// Closed-form circular arc starting at p0 heading yaw0.
inline Pose2 arc_pose(Vec2 p0, double yaw0, double speed, double yaw_rate, double t) {
  const double r = speed / yaw_rate;
  const double th = yaw0 + yaw_rate * t;
  return {p0.x + r * (std::sin(th) - std::sin(yaw0)), p0.y - r * (std::cos(th) - std::cos(yaw0)), th};
}

inline Trajectory arc_traj(Vec2 p0, double yaw0, double speed, double yaw_rate, double duration,
                           double rate = 10.0) {
  return sample_traj([=](double t) { return arc_pose(p0, yaw0, speed, yaw_rate, t); }, duration, rate);
}

inline TrackedObject make_agent(const std::string& id, Trajectory tr, ObjectKind kind = ObjectKind::kVehicle,
                                double length = 4.5, double width = 1.9) {
  TrackedObject o;
  o.id = id;
  o.trajectory = std::move(tr);
  o.kind = kind;
  o.length = length;
  o.width = width;
  return o;
}

inline TrackedObject parked(const std::string& id, Vec2 p, double yaw, double duration, double length = 4.5,
                            double width = 1.9) {
  return make_agent(id, line_traj(p, yaw, 0.0, duration), ObjectKind::kVehicle, length, width);
}

// Two CAVs: cav_1 at the origin heading +x at `ego_speed`, cav_2 parked far away
// unless replaced.
inline Scene two_cav_scene(double duration = 10.0, double ego_speed = 0.0) {
  Scene s;
  s.seq_id = "seq_900001";
  s.seed = 900001;
  s.duration = duration;
  s.rate_hz = 10.0;
  s.cavs.push_back(make_agent("cav_1", line_traj({0, 0}, 0.0, ego_speed, duration), ObjectKind::kCav));
  s.cavs.push_back(make_agent("cav_2", line_traj({-60, 60}, 0.0, 0.0, duration), ObjectKind::kCav));
  return s;
}

// Polygon of a box from first principles (not bbox_corners).
inline std::array<Vec2, 4> box_polygon(const BBox2& b) {
  const double c = std::cos(b.center.yaw), s = std::sin(b.center.yaw);
  const double hl = b.length / 2, hw = b.width / 2;
  std::array<Vec2, 4> out;
  const double sx[4] = {1, -1, -1, 1}, sy[4] = {1, 1, -1, -1};
  for (int i = 0; i < 4; ++i) {
    out[i] = {b.center.x + sx[i] * hl * c - sy[i] * hw * s, b.center.y + sx[i] * hl * s + sy[i] * hw * c};
  }
  return out;
}

inline bool segments_cross(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  auto orient = [](Vec2 p, Vec2 q, Vec2 r) { return (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x); };
  const double o1 = orient(a, b, c), o2 = orient(a, b, d), o3 = orient(c, d, a), o4 = orient(c, d, b);
  return ((o1 > 0) != (o2 > 0)) && ((o3 > 0) != (o4 > 0));
}

inline bool inside_polygon(Vec2 p, const std::array<Vec2, 4>& poly) {
  int sign = 0;
  for (int i = 0; i < 4; ++i) {
    const Vec2 a = poly[i], b = poly[(i + 1) % 4];
    const double c = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    const int s = c > 0 ? 1 : (c < 0 ? -1 : 0);
    if (s == 0) continue;
    if (sign == 0) sign = s;
    if (s != sign) return false;
  }
  return true;
}

// Convex polygons intersect iff an edge pair crosses or one holds a vertex of the other.
inline bool polygons_intersect(const BBox2& a, const BBox2& b) {
  const auto pa = box_polygon(a), pb = box_polygon(b);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      if (segments_cross(pa[i], pa[(i + 1) % 4], pb[j], pb[(j + 1) % 4])) return true;
    }
  }
  return inside_polygon(pa[0], pb) || inside_polygon(pb[0], pa);
}

// Liang-Barsky clip of segment p->q against the box in its own frame.
inline bool clip_segment(Vec2 p, Vec2 q, const BBox2& b) {
  const double c = std::cos(b.center.yaw), s = std::sin(b.center.yaw);
  auto local = [&](Vec2 v) {
    const double dx = v.x - b.center.x, dy = v.y - b.center.y;
    return Vec2{c * dx + s * dy, -s * dx + c * dy};
  };
  const Vec2 a = local(p), d = local(q) - local(p);
  double t0 = 0.0, t1 = 1.0;
  const double hl = b.length / 2, hw = b.width / 2;
  const double pk[4] = {-d.x, d.x, -d.y, d.y};
  const double qk[4] = {a.x + hl, hl - a.x, a.y + hw, hw - a.y};
  for (int i = 0; i < 4; ++i) {
    if (pk[i] == 0.0) {
      if (qk[i] < 0) return false;
      continue;
    }
    const double r = qk[i] / pk[i];
    if (pk[i] < 0) t0 = std::max(t0, r);
    else t1 = std::min(t1, r);
    if (t0 > t1) return false;
  }
  return true;
}

// Fraction of `n` sight lines to points spaced uniformly by arc length around
// the target's boundary that cross any blocker.
inline double dense_blocked_fraction(Vec2 eye, const BBox2& target, const std::vector<BBox2>& blockers, int n = 360) {
  const auto poly = box_polygon(target);
  const double per = 2 * (target.length + target.width);
  int blocked = 0;
  for (int i = 0; i < n; ++i) {
    double s = per * (i + 0.5) / n;
    Vec2 p{};
    for (int e = 0; e < 4; ++e) {
      const Vec2 a = poly[e], b = poly[(e + 1) % 4];
      const double len = distance(a, b);
      if (s <= len || e == 3) {
        p = a + (s / len) * (b - a);
        break;
      }
      s -= len;
    }
    for (const auto& bl : blockers) {
      if (clip_segment(eye, p, bl)) {
        ++blocked;
        break;
      }
    }
  }
  return static_cast<double>(blocked) / n;
}


struct OcclusionAgreement {
  int trials = 0;
  int bool_agree = 0;
  int fraction_within = 0;  // |library - dense| <= 0.15
  int occluded_dense = 0;
  double max_fraction_gap = 0.0;
};

enum class Layout {
  kUniform,   // occluder and target placed independently ahead of the observer
  kShadowed,  // occluder always between observer and target region
};

// Observer at the origin plus one occluder (car or truck) and one car
// target with random poses. Overlapping layouts are redrawn.
inline OcclusionAgreement occlusion_agreement(int trials, std::uint64_t seed, Layout layout = Layout::kUniform,
                                              double kappa = 0.75) {
  Rng rng(seed);
  OcclusionAgreement r;
  DetectorConfig cfg;
  cfg.blocked_fraction = kappa;
  while (r.trials < trials) {
    BBox2 occ, tgt;
    if (layout == Layout::kUniform) {
      const bool truck = rng.bernoulli(0.3);
      occ = {{rng.uniform(3, 40), rng.uniform(-20, 20), rng.uniform(-3.14159, 3.14159)}, truck ? 10.0 : 4.5,
             truck ? 2.5 : 1.9};
      tgt = {{rng.uniform(3, 40), rng.uniform(-20, 20), rng.uniform(-3.14159, 3.14159)}, 4.5, 1.9};
    } else {
      const bool truck = rng.bernoulli(0.5);
      occ = {{rng.uniform(6, 16), rng.uniform(-3, 3), rng.uniform(-3.14159, 3.14159)}, truck ? 10.0 : 4.5,
             truck ? 2.5 : 1.9};
      tgt = {{rng.uniform(18, 35), rng.uniform(-8, 8), rng.uniform(-3.14159, 3.14159)}, 4.5, 1.9};
    }
    const BBox2 obs{{0, 0, 0}, 4.5, 1.9};
    if (polygons_intersect(occ, tgt) || polygons_intersect(occ, obs) || polygons_intersect(tgt, obs)) continue;
    Scene s = two_cav_scene(1.0);
    s.objects.push_back(parked("obj_occ", occ.center.position(), occ.center.yaw, 1.0, occ.length, occ.width));
    s.objects.push_back(parked("obj_tgt", tgt.center.position(), tgt.center.yaw, 1.0, tgt.length, tgt.width));
    const auto lib = is_occluded(s, 0.0, "cav_1", "obj_tgt", cfg);
    const BBox2 far{{-60, 60, 0}, 4.5, 1.9};
    const double dense = dense_blocked_fraction({0, 0}, tgt, {occ, far});
    const bool dense_occ = dense >= kappa;
    ++r.trials;
    r.occluded_dense += dense_occ;
    r.bool_agree += (lib.occluded == dense_occ);
    const double gap = std::abs(lib.blocked_fraction - dense);
    r.fraction_within += gap <= 0.15;
    r.max_fraction_gap = std::max(r.max_fraction_gap, gap);
  }
  return r;
}

}  // namespace coopgot::testing
