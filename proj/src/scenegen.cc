#include "coopgot/scenegen.h"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <numbers>
#include <optional>

#include "coopgot/errors.h"
#include "coopgot/rng.h"

namespace coopgot {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kPlacementTries = 30;

struct Control {
  double speed;
  double yaw_rate;
};

using ControlFn = std::function<Control(double)>;

// Midpoint-heading unicycle step: every chord has length speed * dt exactly,
// so sampled speeds never leave the commanded range.
Trajectory integrate(const Pose2& start, double duration, double dt, const ControlFn& control) {
  Trajectory traj;
  traj.t0 = 0.0;
  traj.dt_sample = dt;
  const auto steps = static_cast<std::size_t>(std::llround(duration / dt));
  traj.poses.reserve(steps + 1);
  Pose2 p = start;
  p.yaw = wrap_angle(p.yaw);
  traj.poses.push_back(p);
  for (std::size_t k = 0; k < steps; ++k) {
    const Control c = control(static_cast<double>(k) * dt);
    const double mid = p.yaw + 0.5 * c.yaw_rate * dt;
    p.x += c.speed * dt * std::cos(mid);
    p.y += c.speed * dt * std::sin(mid);
    p.yaw = wrap_angle(p.yaw + c.yaw_rate * dt);
    traj.poses.push_back(p);
  }
  return traj;
}

struct Dims {
  double length;
  double width;
};

Dims sample_dims(Rng& rng) {
  const double u = rng.uniform();
  if (u < 0.6) return {4.5, 1.9};
  if (u < 0.8) return {5.5, 2.2};
  return {9.0, 2.6};
}

double sample_speed(Rng& rng, const ScenarioConfig& cfg, double lo, double hi) {
  lo = std::clamp(lo, cfg.speed_min, cfg.speed_max);
  hi = std::clamp(hi, lo, cfg.speed_max);
  return rng.uniform(lo, hi);
}

enum class CavTemplate { kStraight, kLaneChange, kLeftTurn, kRightTurn, kDecelerateToStop };

Trajectory cav_trajectory(Rng& rng, const ScenarioConfig& cfg, const Pose2& start, double dt) {
  const auto kind = static_cast<CavTemplate>(rng.uniform_int(0, 4));
  const double d = cfg.duration;
  const double smin = cfg.speed_min;
  switch (kind) {
    case CavTemplate::kStraight: {
      const double v = sample_speed(rng, cfg, 4.0, 0.9 * cfg.speed_max);
      return integrate(start, d, dt, [v](double) { return Control{v, 0.0}; });
    }
    case CavTemplate::kLaneChange: {
      const double v = sample_speed(rng, cfg, 4.0, 0.9 * cfg.speed_max);
      const double t_lc = rng.uniform(1.0, d - 5.0);
      const double period = 4.0;
      double amp = 3.5 * 2.0 * kPi / (std::max(v, 1.0) * period * period);
      amp = std::min(amp, 0.4) * rng.sign();
      return integrate(start, d, dt, [=](double t) {
        if (t < t_lc || t >= t_lc + period) return Control{v, 0.0};
        return Control{v, amp * std::sin(2.0 * kPi * (t - t_lc) / period)};
      });
    }
    case CavTemplate::kLeftTurn:
    case CavTemplate::kRightTurn: {
      const double v = sample_speed(rng, cfg, 3.0, 7.0);
      const double radius = rng.uniform(12.0, 25.0);
      const double rate = (kind == CavTemplate::kLeftTurn ? 1.0 : -1.0) * v / radius;
      const double t_turn = rng.uniform(1.0, d - 4.0);
      const double turn_time = rate == 0.0 ? 0.0 : (kPi / 2.0) / std::abs(rate);
      return integrate(start, d, dt, [=](double t) {
        const bool turning = t >= t_turn && t < t_turn + turn_time;
        return Control{v, turning ? rate : 0.0};
      });
    }
    case CavTemplate::kDecelerateToStop: {
      const double v0 = sample_speed(rng, cfg, 4.0, 0.9 * cfg.speed_max);
      const double t_brake = rng.uniform(2.0, d - 4.0);
      const double decel = rng.uniform(1.0, 3.0);
      return integrate(start, d, dt, [=](double t) {
        const double v = t < t_brake ? v0 : std::max(smin, v0 - decel * (t - t_brake));
        return Control{v, 0.0};
      });
    }
  }
  return {};
}

Trajectory constant_motion(const Pose2& start, double speed, double yaw_rate, double duration,
                           double dt) {
  return integrate(start, duration, dt, [=](double) { return Control{speed, yaw_rate}; });
}

Pose2 offset_pose(const Pose2& base, double lon, double lat, double yaw_offset) {
  const Vec2 p = from_ego_frame(Vec2{lon, lat}, base);
  return {p.x, p.y, wrap_angle(base.yaw + yaw_offset)};
}

bool within_bounds(const Pose2& p, double bounds) {
  return std::abs(p.x) <= bounds && std::abs(p.y) <= bounds;
}

// A candidate conflicts if it enters any CAV's collision disc (plus
// clearance) or overlaps any already placed object box at any sample.
bool conflicts(const TrackedObject& cand, const std::vector<TrackedObject>& cavs,
               const std::vector<TrackedObject>& objects) {
  const auto& poses = cand.trajectory.poses;
  for (std::size_t k = 0; k < poses.size(); ++k) {
    const BBox2 box{poses[k], cand.length, cand.width};
    for (const auto& cav : cavs) {
      if (&cav == &cand) continue;
      const double r = collision_radius(cand) + kGeneratorClearance;
      const double r_cav = collision_radius(cav) + kGeneratorClearance;
      const double dist = distance(poses[k].position(), cav.trajectory.poses[k].position());
      if (dist < std::max(r, r_cav) || boxes_overlap(box, {cav.trajectory.poses[k], cav.length, cav.width})) {
        return true;
      }
    }
    for (const auto& o : objects) {
      if (boxes_overlap(box, {o.trajectory.poses[k], o.length, o.width})) return true;
    }
  }
  return false;
}

std::string object_id(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "obj_%02d", index);
  return buf;
}

struct Attempt {
  Rng rng;
  const ScenarioConfig& cfg;
  const DetectorConfig& detector;
  double dt;
  Scene scene;
  int next_object = 0;

  TrackedObject make_object(Dims dims, Trajectory traj) {
    TrackedObject o;
    o.id = object_id(next_object);
    o.length = dims.length;
    o.width = dims.width;
    o.trajectory = std::move(traj);
    o.kind = ObjectKind::kVehicle;
    return o;
  }

  bool place_cavs() {
    TrackedObject cav1;
    cav1.id = "cav_1";
    cav1.kind = ObjectKind::kCav;
    const double spread = cfg.bounds / 4.0;
    const Pose2 start1{rng.uniform(-spread, spread), rng.uniform(-spread, spread),
                       rng.uniform(-kPi, kPi)};
    cav1.trajectory = cav_trajectory(rng, cfg, start1, dt);
    scene.cavs.push_back(cav1);

    for (int tries = 0; tries < kPlacementTries; ++tries) {
      TrackedObject cav2;
      cav2.id = "cav_2";
      cav2.kind = ObjectKind::kCav;
      Pose2 start2;
      switch (rng.uniform_int(0, 2)) {
        case 0:  // same direction, ahead or behind
          start2 = offset_pose(start1, rng.sign() * rng.uniform(12.0, 35.0),
                               3.5 * static_cast<double>(rng.uniform_int(-1, 1)), 0.0);
          break;
        case 1:  // oncoming
          start2 = offset_pose(start1, rng.uniform(30.0, 70.0), rng.sign() * rng.uniform(3.5, 7.0), kPi);
          break;
        default: {  // side street, facing the CAV-1 travel line
          const double side = rng.sign();
          start2 = offset_pose(start1, rng.uniform(15.0, 45.0), side * rng.uniform(15.0, 30.0),
                               -side * kPi / 2.0);
          break;
        }
      }
      cav2.trajectory = cav_trajectory(rng, cfg, start2, dt);
      scene.cavs.push_back(cav2);
      if (!conflicts(scene.cavs[1], scene.cavs, {})) return true;
      scene.cavs.pop_back();
    }
    return false;
  }

  bool try_add(TrackedObject cand) {
    if (!within_bounds(cand.trajectory.poses.front(), cfg.bounds)) return false;
    if (conflicts(cand, scene.cavs, scene.objects)) return false;
    scene.objects.push_back(std::move(cand));
    ++next_object;
    return true;
  }

  // Truck between CAV-1 and a target at a random eligible keyframe; both
  // share one constant velocity.
  bool place_occluder_pair() {
    const auto keyframes = eligible_keyframes(scene);
    if (keyframes.empty()) return false;
    const TrackedObject& cav1 = scene.cavs[0];
    for (int tries = 0; tries < kPlacementTries; ++tries) {
      const double tk = keyframes[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<int>(keyframes.size()) - 1))];
      const Pose2 eye = cav1.pose_at(tk);
      const double bearing = eye.yaw + rng.uniform(-0.5, 0.5);
      const double d_target = rng.uniform(22.0, 40.0);
      const double d_truck = d_target * rng.uniform(0.4, 0.6);
      const bool broadside = rng.bernoulli(0.5);
      const double heading = wrap_angle(bearing + (broadside ? rng.sign() * kPi / 2.0 : 0.0));
      const double speed = sample_speed(rng, cfg, cfg.speed_min, 6.0);
      const Vec2 dir{std::cos(bearing), std::sin(bearing)};
      const Vec2 motion{std::cos(heading), std::sin(heading)};
      const Dims target_dims = rng.bernoulli(0.7) ? Dims{4.5, 1.9} : Dims{5.5, 2.2};
      const auto start_at = [&](Vec2 at_tk) {
        const Vec2 p = at_tk - (speed * tk) * motion;
        return Pose2{p.x, p.y, heading};
      };
      const Pose2 truck_start = start_at(eye.position() + d_truck * dir);
      const Pose2 target_start = start_at(eye.position() + d_target * dir);

      TrackedObject truck = make_object({9.0, 2.6}, constant_motion(truck_start, speed, 0.0, cfg.duration, dt));
      TrackedObject target = make_object(target_dims, constant_motion(target_start, speed, 0.0, cfg.duration, dt));
      target.id = object_id(next_object + 1);
      if (conflicts(truck, scene.cavs, scene.objects)) continue;
      std::vector<TrackedObject> with_truck = scene.objects;
      with_truck.push_back(truck);
      if (conflicts(target, scene.cavs, with_truck)) continue;

      scene.objects.push_back(truck);
      scene.objects.push_back(target);
      if (is_occluded(scene, tk, cav1.id, target.id, detector).occluded) {
        next_object += 2;
        return true;
      }
      scene.objects.pop_back();
      scene.objects.pop_back();
    }
    return false;
  }

  bool place_crossing_object() {
    const TrackedObject& cav1 = scene.cavs[0];
    for (int tries = 0; tries < kPlacementTries; ++tries) {
      const double tc = rng.uniform(2.0, cfg.duration - 2.0);
      const Pose2 cross = cav1.pose_at(tc);
      const double heading = wrap_angle(cross.yaw + rng.sign() * kPi / 2.0 + rng.uniform(-0.35, 0.35));
      const double speed = sample_speed(rng, cfg, 2.0, cfg.speed_max);
      const double pass_time = tc + rng.sign() * rng.uniform(2.5, 5.0);
      const Vec2 motion{std::cos(heading), std::sin(heading)};
      const Vec2 p0 = cross.position() - (speed * pass_time) * motion;
      TrackedObject o = make_object(sample_dims(rng),
                                    constant_motion({p0.x, p0.y, heading}, speed, 0.0, cfg.duration, dt));
      if (try_add(std::move(o))) return true;
    }
    return false;
  }

  bool place_ambient_object() {
    for (int tries = 0; tries < kPlacementTries; ++tries) {
      const TrackedObject& anchor_cav = scene.cavs[static_cast<std::size_t>(rng.bernoulli(0.7) ? 0 : 1)];
      const double tau = rng.uniform(0.0, 0.5 * cfg.duration);
      const Pose2 anchor = anchor_cav.pose_at(tau);
      const double u = rng.uniform();
      const double yaw_offset = u < 0.5 ? 0.0 : (u < 0.8 ? kPi : rng.uniform(-kPi, kPi));
      Pose2 start = offset_pose(anchor, rng.uniform(-25.0, 25.0), rng.sign() * rng.uniform(3.5, 20.0),
                                yaw_offset + rng.uniform(-0.1, 0.1));
      const double speed = rng.bernoulli(0.2) ? cfg.speed_min : sample_speed(rng, cfg, cfg.speed_min, cfg.speed_max);
      const double yaw_rate = rng.bernoulli(cfg.turn_prob) ? rng.sign() * rng.uniform(0.05, 0.25) : 0.0;
      TrackedObject o = make_object(sample_dims(rng), constant_motion(start, speed, yaw_rate, cfg.duration, dt));
      if (try_add(std::move(o))) return true;
    }
    return false;
  }

  bool run() {
    scene.rate_hz = cfg.rate_hz;
    scene.duration = cfg.duration;
    if (!place_cavs()) return false;
    int n = rng.uniform_int(cfg.n_objects_min, cfg.n_objects_max);
    const bool want_occluder = rng.bernoulli(cfg.occluder_prob);
    if (want_occluder) {
      if (n < 2 || !place_occluder_pair()) return false;
      n -= 2;
    }
    for (int i = 0; i < n; ++i) {
      if (rng.bernoulli(cfg.crossing_prob)) {
        place_crossing_object();
      } else {
        place_ambient_object();
      }
    }
    if (want_occluder) return has_occlusion(scene);
    return true;
  }

  bool has_occlusion(const Scene& s) const {
    for (double t : eligible_keyframes(s)) {
      for (const auto& cav : s.cavs) {
        for (const TrackedObject* a : s.agents()) {
          if (a->id == cav.id) continue;
          if (is_occluded(s, t, cav.id, a->id, detector).occluded) return true;
        }
      }
    }
    return false;
  }
};

}  // namespace

void ScenarioConfig::validate() const {
  const auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(turn_prob) || !prob(occluder_prob) || !prob(crossing_prob)) {
    throw InvalidConfig("scenario probabilities must lie in [0,1]");
  }
  if (!(duration >= 6.0)) throw InvalidConfig("scenario duration must be >= 6 s");
  if (n_objects_min < 0 || n_objects_max < n_objects_min) {
    throw InvalidConfig("scenario n_objects range is invalid");
  }
  if (!(speed_min >= 0.0 && speed_max >= speed_min)) {
    throw InvalidConfig("scenario speed_range is invalid");
  }
  if (!(bounds > 0.0)) throw InvalidConfig("scenario bounds must be positive");
  if (!(rate_hz > 0.0)) throw InvalidConfig("scenario rate_hz must be positive");
}

nlohmann::json to_json(const ScenarioConfig& cfg) {
  return {{"n_objects", {cfg.n_objects_min, cfg.n_objects_max}},
          {"duration", cfg.duration},
          {"speed_range", {cfg.speed_min, cfg.speed_max}},
          {"turn_prob", cfg.turn_prob},
          {"occluder_prob", cfg.occluder_prob},
          {"crossing_prob", cfg.crossing_prob},
          {"bounds", cfg.bounds},
          {"rate_hz", cfg.rate_hz}};
}

ScenarioConfig scenario_config_from_json(const nlohmann::json& j) {
  ScenarioConfig cfg;
  try {
    if (j.contains("n_objects")) {
      const auto& n = j.at("n_objects");
      if (n.is_array()) {
        cfg.n_objects_min = n.at(0).get<int>();
        cfg.n_objects_max = n.at(1).get<int>();
      } else {
        cfg.n_objects_min = cfg.n_objects_max = n.get<int>();
      }
    }
    cfg.duration = j.value("duration", cfg.duration);
    if (j.contains("speed_range")) {
      cfg.speed_min = j.at("speed_range").at(0).get<double>();
      cfg.speed_max = j.at("speed_range").at(1).get<double>();
    }
    cfg.turn_prob = j.value("turn_prob", cfg.turn_prob);
    cfg.occluder_prob = j.value("occluder_prob", cfg.occluder_prob);
    cfg.crossing_prob = j.value("crossing_prob", cfg.crossing_prob);
    cfg.bounds = j.value("bounds", cfg.bounds);
    cfg.rate_hz = j.value("rate_hz", cfg.rate_hz);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfig(std::string("scenario config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::string seq_id_for_seed(std::uint64_t seed) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "seq_%06llu", static_cast<unsigned long long>(seed));
  return buf;
}

Scene generate_scene(const ScenarioConfig& cfg, std::uint64_t seed, const DetectorConfig& detector) {
  cfg.validate();
  const double dt = 1.0 / cfg.rate_hz;
  for (int attempt = 0; attempt < kMaxResamples; ++attempt) {
    Attempt a{Rng(mix_seed(seed, static_cast<std::uint64_t>(attempt))), cfg, detector, dt, {}, 0};
    if (a.run()) {
      a.scene.seq_id = seq_id_for_seed(seed);
      a.scene.seed = seed;
      return std::move(a.scene);
    }
  }
  throw GenerationFailed("scene constraints unsatisfiable for seed " + std::to_string(seed) +
                         " after " + std::to_string(kMaxResamples) + " resamples");
}

std::vector<double> eligible_keyframes(const Scene& scene) {
  std::vector<double> out;
  for (int k = 1;; ++k) {
    const double t = 0.5 * k;
    if (t > scene.duration - 3.0 + 1e-9) break;
    out.push_back(t);
  }
  return out;
}

bool ValidationReport::has(const std::string& code) const {
  return std::any_of(violations.begin(), violations.end(),
                     [&](const Violation& v) { return v.code == code; });
}

ValidationReport validate_scene(const Scene& scene) {
  ValidationReport report;
  if (scene.cavs.size() != 2) {
    report.violations.push_back({"cav_count", "expected 2 CAVs, found " + std::to_string(scene.cavs.size()), {}});
  }
  const auto agents = scene.agents();
  for (std::size_t i = 0; i < agents.size(); ++i) {
    for (std::size_t j = i + 1; j < agents.size(); ++j) {
      if (agents[i]->id == agents[j]->id) {
        report.violations.push_back({"duplicate_id", "id appears twice", {agents[i]->id}});
      }
    }
  }
  const auto expected_samples = static_cast<std::size_t>(std::llround(scene.duration * scene.rate_hz)) + 1;
  bool sampling_ok = true;
  for (const TrackedObject* a : agents) {
    if (!(a->length >= a->width && a->width > 0.0)) {
      report.violations.push_back({"dims", "require length >= width > 0", {a->id}});
    }
    const Trajectory& tr = a->trajectory;
    if (tr.poses.size() != expected_samples || std::abs(tr.dt_sample * scene.rate_hz - 1.0) > 1e-9 ||
        tr.t0 != 0.0) {
      report.violations.push_back({"sampling", "trajectory not uniformly sampled over the scene", {a->id}});
      sampling_ok = false;
    }
    const bool finite = std::all_of(tr.poses.begin(), tr.poses.end(), [](const Pose2& p) {
      return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.yaw);
    });
    if (!finite) {
      report.violations.push_back({"non_finite", "non-finite pose value", {a->id}});
      sampling_ok = false;
    }
  }
  if (!sampling_ok) return report;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    for (std::size_t j = i + 1; j < agents.size(); ++j) {
      if (agents[i]->trajectory.poses.empty() || agents[j]->trajectory.poses.empty()) continue;
      const BBox2 a{agents[i]->trajectory.poses.front(), agents[i]->length, agents[i]->width};
      const BBox2 b{agents[j]->trajectory.poses.front(), agents[j]->length, agents[j]->width};
      if (boxes_overlap(a, b)) {
        report.violations.push_back(
            {"interpenetration", "boxes overlap at t0", {agents[i]->id, agents[j]->id}});
      }
    }
  }
  return report;
}

bool ground_truth_collision_free(const Scene& scene) {
  const auto agents = scene.agents();
  for (const auto& cav : scene.cavs) {
    for (std::size_t k = 0; k < cav.trajectory.poses.size(); ++k) {
      const Vec2 p = cav.trajectory.poses[k].position();
      for (const TrackedObject* a : agents) {
        if (a->id == cav.id || k >= a->trajectory.poses.size()) continue;
        if (distance(p, a->trajectory.poses[k].position()) < collision_radius(*a)) return false;
      }
    }
  }
  return true;
}

}  // namespace coopgot
