#include "coopgot/visibility.h"

#include <algorithm>

#include "coopgot/errors.h"
#include "coopgot/rng.h"

namespace coopgot {
namespace {

struct FrameAgent {
  const TrackedObject* object;
  BBox2 box;
};

std::vector<FrameAgent> frame_at(const Scene& scene, double t) {
  std::vector<FrameAgent> frame;
  for (const TrackedObject* a : scene.agents()) frame.push_back({a, a->box_at(t)});
  return frame;
}

std::size_t index_of(const std::vector<FrameAgent>& frame, const std::string& id) {
  for (std::size_t i = 0; i < frame.size(); ++i) {
    if (frame[i].object->id == id) return i;
  }
  throw UnknownId("unknown agent id '" + id + "'");
}

OcclusionResult occlusion_in_frame(const std::vector<FrameAgent>& frame, std::size_t observer,
                                   std::size_t target, const DetectorConfig& cfg) {
  const Vec2 eye = frame[observer].box.center.position();
  const auto samples = target_sample_points(frame[target].box, cfg.n_target_samples);
  int blocked = 0;
  for (const Vec2& p : samples) {
    for (std::size_t i = 0; i < frame.size(); ++i) {
      if (i == observer || i == target) continue;
      if (segment_intersects_box(eye, p, frame[i].box)) {
        ++blocked;
        break;
      }
    }
  }
  OcclusionResult r;
  r.blocked_fraction = static_cast<double>(blocked) / static_cast<double>(samples.size());
  r.occluded = r.blocked_fraction >= cfg.blocked_fraction;
  return r;
}

void require_sample_time(const Scene& scene, double t) {
  const double u = t * scene.rate_hz;
  if (t < -1e-9 || t > scene.duration + 1e-9 || std::abs(u - std::round(u)) > 1e-6) {
    throw OutOfRange("t=" + std::to_string(t) + " is not a sample time of " + scene.seq_id);
  }
}

}  // namespace

void DetectorConfig::validate() const {
  if (!(blocked_fraction >= 0.0 && blocked_fraction <= 1.0)) {
    throw InvalidConfig("detector blocked_fraction must lie in [0,1]");
  }
  if (n_target_samples < 5) throw InvalidConfig("detector n_target_samples must be >= 5");
  if (!(dropout_prob >= 0.0 && dropout_prob <= 1.0)) {
    throw InvalidConfig("detector dropout_prob must lie in [0,1]");
  }
  if (!(range_m > 0.0)) throw InvalidConfig("detector range_m must be positive");
}

nlohmann::json to_json(const DetectorConfig& cfg) {
  return {{"range_m", cfg.range_m},
          {"blocked_fraction", cfg.blocked_fraction},
          {"n_target_samples", cfg.n_target_samples},
          {"dropout_prob", cfg.dropout_prob},
          {"seed", cfg.seed}};
}

DetectorConfig detector_config_from_json(const nlohmann::json& j) {
  DetectorConfig cfg;
  cfg.range_m = j.value("range_m", cfg.range_m);
  cfg.blocked_fraction = j.value("blocked_fraction", cfg.blocked_fraction);
  cfg.n_target_samples = j.value("n_target_samples", cfg.n_target_samples);
  cfg.dropout_prob = j.value("dropout_prob", cfg.dropout_prob);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.validate();
  return cfg;
}

bool DetectionSet::contains(const std::string& object_id) const {
  return std::any_of(detections.begin(), detections.end(),
                     [&](const Detection& d) { return d.object_id == object_id; });
}

std::vector<Vec2> target_sample_points(const BBox2& box, int n) {
  std::vector<Vec2> points;
  points.reserve(static_cast<std::size_t>(n));
  points.push_back(box.center.position());
  const auto corners = bbox_corners(box);
  const int perimeter = n - 1;
  for (int edge = 0; edge < 4; ++edge) {
    const int count = perimeter / 4 + (edge < perimeter % 4 ? 1 : 0);
    const Vec2 a = corners[static_cast<std::size_t>(edge)];
    const Vec2 b = corners[static_cast<std::size_t>((edge + 1) % 4)];
    for (int j = 0; j < count; ++j) {
      const double s = static_cast<double>(j) / static_cast<double>(count);
      points.push_back(a + s * (b - a));
    }
  }
  return points;
}

OcclusionResult is_occluded(const Scene& scene, double t, const std::string& observer_id,
                            const std::string& target_id, const DetectorConfig& cfg) {
  if (observer_id == target_id) throw UnknownId("observer and target must differ: " + observer_id);
  const auto frame = frame_at(scene, t);
  return occlusion_in_frame(frame, index_of(frame, observer_id), index_of(frame, target_id), cfg);
}

DetectionSet detect(const Scene& scene, double t, const std::string& cav_id,
                    const DetectorConfig& cfg) {
  require_sample_time(scene, t);
  const auto frame = frame_at(scene, t);
  const std::size_t observer = index_of(frame, cav_id);
  DetectionSet set{cav_id, t, {}};
  const Vec2 eye = frame[observer].box.center.position();
  for (std::size_t i = 0; i < frame.size(); ++i) {
    if (i == observer) continue;
    const FrameAgent& a = frame[i];
    if (distance(eye, a.box.center.position()) > cfg.range_m) continue;
    if (occlusion_in_frame(frame, observer, i, cfg).occluded) continue;
    if (cfg.dropout_prob > 0.0) {
      std::uint64_t s = mix_seed(cfg.seed, fnv1a64(cav_id));
      s = mix_seed(s, static_cast<std::uint64_t>(time_ms(t)));
      s = mix_seed(s, fnv1a64(a.object->id));
      if (Rng(s).bernoulli(cfg.dropout_prob)) continue;
    }
    set.detections.push_back({a.object->id, a.box.center, a.box.length, a.box.width});
  }
  return set;
}

std::vector<std::string> nearest_unoccluded(const Scene& scene, double t,
                                            const std::string& cav_id, int k,
                                            const DetectorConfig& cfg) {
  const auto frame = frame_at(scene, t);
  const std::size_t observer = index_of(frame, cav_id);
  const Vec2 eye = frame[observer].box.center.position();
  std::vector<std::pair<double, std::string>> visible;
  for (std::size_t i = 0; i < frame.size(); ++i) {
    if (i == observer) continue;
    if (occlusion_in_frame(frame, observer, i, cfg).occluded) continue;
    visible.emplace_back(distance(eye, frame[i].box.center.position()), frame[i].object->id);
  }
  std::sort(visible.begin(), visible.end());
  std::vector<std::string> out;
  for (std::size_t i = 0; i < visible.size() && static_cast<int>(i) < k; ++i) {
    out.push_back(visible[i].second);
  }
  return out;
}

nlohmann::json to_json(const DetectionSet& set) {
  nlohmann::json dets = nlohmann::json::array();
  for (const auto& d : set.detections) {
    dets.push_back({{"object_id", d.object_id},
                    {"center", {d.center.x, d.center.y, d.center.yaw}},
                    {"dims", {d.length, d.width}}});
  }
  return {{"cav_id", set.cav_id}, {"t", set.t}, {"detections", std::move(dets)}};
}

}  // namespace coopgot
