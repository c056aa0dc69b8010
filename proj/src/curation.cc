#include "coopgot/curation.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <tuple>

#include "coopgot/errors.h"
#include "coopgot/parallel.h"
#include "coopgot/scenegen.h"

namespace coopgot {
namespace {

// Sum of wrapped heading differences over the segments of `pts` that are at
// least min_seg long. Zero when fewer than two such segments exist.
double heading_change(const std::vector<Vec2>& pts, double min_seg) {
  std::vector<double> headings;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const Vec2 d = pts[i + 1] - pts[i];
    if (d.norm() >= min_seg) headings.push_back(std::atan2(d.y, d.x));
  }
  double total = 0.0;
  for (std::size_t i = 1; i < headings.size(); ++i) total += wrap_angle(headings[i] - headings[i - 1]);
  return total;
}

bool all_coincide(const std::vector<Vec2>& pts) {
  for (const Vec2& p : pts) {
    if (p.x != pts.front().x || p.y != pts.front().y) return false;
  }
  return true;
}

std::string positions_text(const Waypoints6& w) {
  std::string out;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (i) out += ", ";
    out += format_position(w[i]);
  }
  return out;
}

Waypoints6 waypoints_from_json(const nlohmann::json& j) {
  Waypoints6 w;
  if (j.size() != 6) throw IoError("expected 6 waypoints");
  for (std::size_t i = 0; i < 6; ++i) w[i] = {j.at(i).at(0).get<double>(), j.at(i).at(1).get<double>()};
  return w;
}

nlohmann::json waypoints_to_json(const Waypoints6& w) {
  nlohmann::json a = nlohmann::json::array();
  for (const Vec2& p : w) a.push_back({quantize_coord(p.x), quantize_coord(p.y)});
  return a;
}

Waypoints6 to_waypoints6(const std::vector<Pose2>& poses, const Pose2& ego) {
  Waypoints6 w;
  for (std::size_t i = 0; i < 6; ++i) w[i] = to_ego_frame(poses.at(i).position(), ego);
  return w;
}

}  // namespace

void CurationConfig::validate() const {
  for (std::size_t i = 1; i < speed_bounds.size(); ++i) {
    if (!(speed_bounds[i] > speed_bounds[i - 1])) throw InvalidConfig("speed_bounds must be strictly increasing");
  }
  if (speed_bounds[0] < 0.0) throw InvalidConfig("speed_bounds must be non-negative");
  if (!(steer_bounds_deg[1] > steer_bounds_deg[0]) || steer_bounds_deg[0] < 0.0) {
    throw InvalidConfig("steer_bounds_deg must be strictly increasing and non-negative");
  }
  if (!(notable_radius > match_radius)) throw InvalidConfig("notable_radius must exceed match_radius");
  if (match_radius <= 0.0) throw InvalidConfig("match_radius must be positive");
  if (k_max < 1) throw InvalidConfig("k_max must be >= 1");
  if (waypoint_dt <= 0.0) throw InvalidConfig("waypoint_dt must be positive");
  if (stationary_displacement < 0.0 || turn_threshold_deg < 0.0 || min_segment < 0.0) {
    throw InvalidConfig("thresholds must be non-negative");
  }
}

nlohmann::json to_json(const CurationConfig& c) {
  return {{"notable_radius", c.notable_radius},
          {"k_max", c.k_max},
          {"waypoint_dt", c.waypoint_dt},
          {"match_radius", c.match_radius},
          {"stationary_displacement", c.stationary_displacement},
          {"turn_threshold_deg", c.turn_threshold_deg},
          {"speed_bounds", c.speed_bounds},
          {"steer_bounds_deg", c.steer_bounds_deg},
          {"segment_distance", c.segment_distance},
          {"min_segment", c.min_segment}};
}

CurationConfig curation_config_from_json(const nlohmann::json& j) {
  CurationConfig c;
  try {
    c.notable_radius = j.value("notable_radius", c.notable_radius);
    c.k_max = j.value("k_max", c.k_max);
    c.waypoint_dt = j.value("waypoint_dt", c.waypoint_dt);
    c.match_radius = j.value("match_radius", c.match_radius);
    c.stationary_displacement = j.value("stationary_displacement", c.stationary_displacement);
    c.turn_threshold_deg = j.value("turn_threshold_deg", c.turn_threshold_deg);
    if (j.contains("speed_bounds")) c.speed_bounds = j.at("speed_bounds").get<std::array<double, 4>>();
    if (j.contains("steer_bounds_deg")) c.steer_bounds_deg = j.at("steer_bounds_deg").get<std::array<double, 2>>();
    c.segment_distance = j.value("segment_distance", c.segment_distance);
    c.min_segment = j.value("min_segment", c.min_segment);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfig(std::string("curation config: ") + e.what());
  }
  c.validate();
  return c;
}

Waypoints6 reference_waypoints(const Scene& scene, double t, const std::string& ego, double dt) {
  const TrackedObject& e = scene.agent(ego);
  return to_waypoints6(future_waypoints(e.trajectory, t, 6, dt), e.pose_at(t));
}

double distance_to_reference(Vec2 p, const Waypoints6& ref, bool segment) {
  double best = std::numeric_limits<double>::infinity();
  if (!segment) {
    for (const Vec2& w : ref) best = std::min(best, distance(p, w));
    return best;
  }
  Vec2 prev{0.0, 0.0};
  for (const Vec2& w : ref) {
    best = std::min(best, point_segment_distance(p, prev, w));
    prev = w;
  }
  return best;
}

std::vector<NotableObject> notable_objects(const Scene& scene, double t, const std::string& ego,
                                           NotableMode mode, const CurationConfig& cfg,
                                           const DetectorConfig& detector) {
  const Pose2 ego_pose = scene.agent(ego).pose_at(t);
  const Waypoints6 ref = reference_waypoints(scene, t, ego, cfg.waypoint_dt);
  const DetectionSet seen = detect(scene, t, ego, detector);

  std::vector<NotableObject> visible, invisible;
  for (const TrackedObject* a : scene.agents()) {
    if (a->id == ego) continue;
    const Vec2 p = to_ego_frame(a->pose_at(t).position(), ego_pose);
    const double d = distance_to_reference(p, ref, cfg.segment_distance);
    if (d > cfg.notable_radius) continue;
    (seen.contains(a->id) ? visible : invisible).push_back({a->id, p, d});
  }
  auto rank = [&](std::vector<NotableObject>& v) {
    std::sort(v.begin(), v.end(), [](const NotableObject& a, const NotableObject& b) {
      return std::tie(a.distance, a.id) < std::tie(b.distance, b.id);
    });
    if (v.size() > static_cast<std::size_t>(cfg.k_max)) v.resize(cfg.k_max);
  };
  rank(visible);
  rank(invisible);
  if (mode == NotableMode::kVisible) return visible;
  if (mode == NotableMode::kInvisible) return invisible;
  std::vector<NotableObject> all = visible;
  all.insert(all.end(), invisible.begin(), invisible.end());
  std::sort(all.begin(), all.end(), [](const NotableObject& a, const NotableObject& b) {
    return std::tie(a.distance, a.id) < std::tie(b.distance, b.id);
  });
  return all;
}

MotionClass classify_motion(const Waypoints6& waypoints, const CurationConfig& cfg) {
  const std::vector<Vec2> pts(waypoints.begin(), waypoints.end());
  if (cfg.stationary_displacement <= 0.0 && all_coincide(pts)) {
    throw DegenerateInput("all waypoints coincide and the stationary threshold is zero");
  }
  if (distance(pts.front(), pts.back()) < cfg.stationary_displacement) return MotionClass::kStationary;
  const double turn = rad_to_deg(heading_change(pts, cfg.min_segment));
  if (turn > cfg.turn_threshold_deg) return MotionClass::kLeft;
  if (turn < -cfg.turn_threshold_deg) return MotionClass::kRight;
  return MotionClass::kForward;
}

ActionClass classify_action(const Waypoints6& waypoints, const CurationConfig& cfg) {
  std::vector<Vec2> pts{{0.0, 0.0}};
  pts.insert(pts.end(), waypoints.begin(), waypoints.end());
  if (cfg.speed_bounds[0] <= 0.0 && all_coincide(pts)) {
    throw DegenerateInput("all waypoints coincide with the origin and the stop threshold is zero");
  }
  double path = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) path += distance(pts[i], pts[i + 1]);
  const double speed = path / 6.0 / cfg.waypoint_dt;

  ActionClass out;
  const auto& b = cfg.speed_bounds;
  if (speed >= b[3]) {
    out.speed = SpeedClass::kFast;
  } else if (speed >= b[2]) {
    out.speed = SpeedClass::kModerate;
  } else if (speed >= b[1]) {
    out.speed = SpeedClass::kSlow;
  } else if (speed >= b[0]) {
    out.speed = SpeedClass::kVerySlow;
  } else {
    out.speed = SpeedClass::kStop;
  }
  if (out.speed == SpeedClass::kStop) {
    out.steer = SteerClass::kStraight;
    return out;
  }
  const double turn = rad_to_deg(heading_change(pts, cfg.min_segment));
  const double mag = std::abs(turn);
  if (mag < cfg.steer_bounds_deg[0]) {
    out.steer = SteerClass::kStraight;
  } else if (mag < cfg.steer_bounds_deg[1]) {
    out.steer = turn > 0 ? SteerClass::kSlightlyLeft : SteerClass::kSlightlyRight;
  } else {
    out.steer = turn > 0 ? SteerClass::kLeft : SteerClass::kRight;
  }
  return out;
}

std::vector<CavPlan> cav_notability(const Scene& scene, double t, const std::string& ego,
                                    const CurationConfig& cfg) {
  const Pose2 ego_pose = scene.agent(ego).pose_at(t);
  const Waypoints6 ref = reference_waypoints(scene, t, ego, cfg.waypoint_dt);
  std::vector<CavPlan> out;
  for (const TrackedObject& c : scene.cavs) {
    if (c.id == ego) continue;
    CavPlan p;
    p.cav_id = c.id;
    p.position = to_ego_frame(c.pose_at(t).position(), ego_pose);
    p.notable = distance_to_reference(p.position, ref, cfg.segment_distance) <= cfg.notable_radius;
    p.plan = to_waypoints6(future_waypoints(c.trajectory, t, 6, cfg.waypoint_dt), ego_pose);
    out.push_back(std::move(p));
  }
  return out;
}

PredictionList merge_prediction(const PredictionList& q5, const std::vector<CavPlan>& q6,
                                const CurationConfig& cfg) {
  PredictionList out = q5;
  for (const CavPlan& cav : q6) {
    if (!cav.notable) continue;
    bool matched = false;
    for (PredictionEntry& e : out.entries) {
      if (distance(e.start, cav.position) <= cfg.match_radius) {
        e.waypoints = cav.plan;
        e.motion = classify_motion(cav.plan, cfg);
        matched = true;
      }
    }
    if (!matched) out.entries.push_back({cav.position, cav.plan, classify_motion(cav.plan, cfg)});
  }
  return out;
}

std::string make_uid(const std::string& seq_id, double t, const std::string& ego, QType q) {
  return seq_id + "_" + std::to_string(time_ms(t)) + "_" + ego + "_" + qtype_name(q);
}

std::string question_text(QType q, const nlohmann::json& payload) {
  const std::string ego = payload.value("ego_cav", std::string("the ego CAV"));
  std::string ref;
  if (payload.contains("reference")) ref = positions_text(waypoints_from_json(payload.at("reference")));
  std::string cavs;
  if (payload.contains("cavs")) {
    for (const auto& c : payload.at("cavs")) {
      if (!cavs.empty()) cavs += "; ";
      cavs += c.at("cav_id").get<std::string>() + " at " +
              format_position({c.at("position").at(0).get<double>(), c.at("position").at(1).get<double>()}) +
              " plans " + positions_text(waypoints_from_json(c.at("plan")));
    }
  }
  switch (q) {
    case QType::kQ1:
      return "Which objects visible to " + ego + " are within 10 meters of its planned trajectory " + ref +
             "? List at most 3 positions.";
    case QType::kQ2:
      return "Which objects closest to " + ego + " are not occluded by other objects? List at most 3 positions.";
    case QType::kQ3:
      return "Which objects invisible to " + ego + " but seen by other CAVs are within 10 meters of its planned trajectory " +
             ref + "? List at most 3 positions.";
    case QType::kQ4:
      return "Which objects are notable for " + ego + " given its planned trajectory " + ref + "?";
    case QType::kQ5:
      return "Predict the next 3 seconds of each notable object as 6 waypoints and classify its motion.";
    case QType::kQ6:
      return "Other CAVs share their plans: " + cavs + ". Which of them are notable for " + ego +
             " with planned trajectory " + ref + "?";
    case QType::kQ7:
      return "Update the predictions of notable objects using the plans shared by notable CAVs: " + cavs + ".";
    case QType::kQ8:
      return "What speed and steering should " + ego + " use over the next 3 seconds?";
    case QType::kQ9:
      return "Suggest the future trajectory of " + ego + " as 6 waypoints over the next 3 seconds.";
  }
  return {};
}

std::vector<QaPair> curate_frame(const Scene& scene, double t, const std::string& ego,
                                 const CurationConfig& cfg, const DetectorConfig& detector,
                                 const GraphConfig& graph) {
  const TrackedObject& e = scene.agent(ego);
  const Pose2 ego_pose = e.pose_at(t);
  const Waypoints6 ref = reference_waypoints(scene, t, ego, cfg.waypoint_dt);

  std::map<QType, Answer> gt;
  auto as_list = [](const std::vector<NotableObject>& v) {
    ObjectList l;
    for (const auto& o : v) l.objects.push_back(o.position);
    return l;
  };
  const auto q1 = notable_objects(scene, t, ego, NotableMode::kVisible, cfg, detector);
  const auto q3 = notable_objects(scene, t, ego, NotableMode::kInvisible, cfg, detector);
  const auto q4 = notable_objects(scene, t, ego, NotableMode::kAll, cfg, detector);
  gt[QType::kQ1] = {QType::kQ1, as_list(q1)};
  gt[QType::kQ3] = {QType::kQ3, as_list(q3)};
  gt[QType::kQ4] = {QType::kQ4, as_list(q4)};

  ObjectList q2;
  for (const auto& id : nearest_unoccluded(scene, t, ego, cfg.k_max, detector)) {
    q2.objects.push_back(to_ego_frame(scene.agent(id).pose_at(t).position(), ego_pose));
  }
  gt[QType::kQ2] = {QType::kQ2, q2};

  PredictionList q5;
  for (const auto& o : q4) {
    const Waypoints6 w = to_waypoints6(future_waypoints(scene.agent(o.id).trajectory, t, 6, cfg.waypoint_dt), ego_pose);
    q5.entries.push_back({o.position, w, classify_motion(w, cfg)});
  }
  gt[QType::kQ5] = {QType::kQ5, q5};

  const auto plans = cav_notability(scene, t, ego, cfg);
  CavNotability q6;
  for (const auto& p : plans) q6.entries.push_back({p.cav_id, p.notable});
  gt[QType::kQ6] = {QType::kQ6, q6};
  gt[QType::kQ7] = {QType::kQ7, merge_prediction(q5, plans, cfg)};
  gt[QType::kQ8] = {QType::kQ8, classify_action(ref, cfg)};
  gt[QType::kQ9] = {QType::kQ9, Trajectory6{ref}};

  nlohmann::json base = {{"ego_cav", ego}, {"reference", waypoints_to_json(ref)}};
  nlohmann::json cavs = nlohmann::json::array();
  for (const auto& p : plans) {
    cavs.push_back({{"cav_id", p.cav_id},
                    {"position", {quantize_coord(p.position.x), quantize_coord(p.position.y)}},
                    {"plan", waypoints_to_json(p.plan)}});
  }

  std::map<QType, std::string> text;
  for (auto& [q, a] : gt) {
    a = quantize(a);
    text[q] = render_answer(a);
  }

  std::vector<QaPair> out;
  for (QType q : kAllQTypes) {
    if (!graph.has_node(q)) continue;
    QaPair qa;
    qa.seq_id = scene.seq_id;
    qa.t = t;
    qa.ego_cav = ego;
    qa.qtype = q;
    qa.uid = make_uid(scene.seq_id, t, ego, q);
    qa.payload = base;
    if (q == QType::kQ6 || q == QType::kQ7) qa.payload["cavs"] = cavs;
    qa.question = question_text(q, qa.payload);
    std::vector<std::string> parent_texts;
    for (QType p : graph.parents(q)) parent_texts.push_back(text.at(p));
    qa.context = compose_context(parent_texts);
    qa.gt = gt.at(q);
    qa.gt_text = text.at(q);
    out.push_back(std::move(qa));
  }
  return out;
}

QaPair curate_sample(const Scene& scene, double t, const std::string& ego, QType q,
                     const CurationConfig& cfg, const DetectorConfig& detector, const GraphConfig& graph) {
  GraphConfig g = graph;
  if (!g.has_node(q)) g = full_graph();
  for (auto& qa : curate_frame(scene, t, ego, cfg, detector, g)) {
    if (qa.qtype == q) return qa;
  }
  throw UnknownNode("qtype not curated: " + qtype_name(q));
}

Split parse_split(const std::string& s) {
  if (s == "all") return Split::kAll;
  if (s == "train") return Split::kTrain;
  if (s == "test") return Split::kTest;
  throw InvalidConfig("unknown split '" + s + "' (expected all, train or test)");
}

bool scene_in_split(const Scene& scene, Split split) {
  if (split == Split::kAll) return true;
  const bool even = scene.seed % 2 == 0;
  return split == Split::kTrain ? even : !even;
}

std::vector<QaPair> curate_scenes(const std::vector<Scene>& scenes, const CurationConfig& cfg,
                                  const DetectorConfig& detector, const GraphConfig& graph, int workers) {
  cfg.validate();
  validate_graph(graph);
  struct Job {
    const Scene* scene;
    double t;
    std::string ego;
  };
  std::vector<Job> jobs;
  for (const Scene& s : scenes) {
    for (double t : eligible_keyframes(s)) {
      for (const auto& c : s.cavs) jobs.push_back({&s, t, c.id});
    }
  }
  std::vector<std::vector<QaPair>> results(jobs.size());
  parallel_for(jobs.size(), workers, [&](std::size_t i) {
    results[i] = curate_frame(*jobs[i].scene, jobs[i].t, jobs[i].ego, cfg, detector, graph);
  });
  std::vector<QaPair> out;
  for (auto& r : results) {
    for (auto& qa : r) out.push_back(std::move(qa));
  }
  std::stable_sort(out.begin(), out.end(), [](const QaPair& a, const QaPair& b) {
    return std::make_tuple(a.seq_id, time_ms(a.t), a.ego_cav, a.qtype) <
           std::make_tuple(b.seq_id, time_ms(b.t), b.ego_cav, b.qtype);
  });
  return out;
}

std::size_t expected_pair_count(const std::vector<Scene>& scenes, const GraphConfig& graph) {
  std::size_t n = 0;
  for (const Scene& s : scenes) n += eligible_keyframes(s).size() * s.cavs.size() * graph.nodes.size();
  return n;
}

nlohmann::json to_json(const QaPair& qa) {
  return {{"uid", qa.uid},
          {"seq_id", qa.seq_id},
          {"t", qa.t},
          {"ego_cav", qa.ego_cav},
          {"qtype", qtype_index(qa.qtype)},
          {"question", qa.question},
          {"context", qa.context},
          {"payload", qa.payload},
          {"gt", {{"structured", to_json(qa.gt)}, {"text", qa.gt_text}}}};
}

QaPair qa_from_json(const nlohmann::json& j) {
  try {
    QaPair qa;
    qa.uid = j.at("uid").get<std::string>();
    qa.seq_id = j.at("seq_id").get<std::string>();
    qa.t = j.at("t").get<double>();
    qa.ego_cav = j.at("ego_cav").get<std::string>();
    qa.qtype = qtype_from_int(j.at("qtype").get<int>());
    qa.question = j.at("question").get<std::string>();
    qa.context = j.at("context").get<std::string>();
    qa.payload = j.at("payload");
    qa.gt = answer_from_json(j.at("gt").at("structured"), qa.qtype);
    qa.gt_text = j.at("gt").at("text").get<std::string>();
    return qa;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed QA record: ") + e.what());
  }
}

void write_qa_file(const std::filesystem::path& path, const nlohmann::json& header,
                   const std::vector<QaPair>& pairs) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << nlohmann::json{{"header", header}}.dump() << '\n';
  for (const auto& qa : pairs) out << to_json(qa).dump() << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

QaFile read_qa_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  QaFile f;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (j.contains("header")) {
      f.header = j.at("header");
      continue;
    }
    f.pairs.push_back(qa_from_json(j));
  }
  return f;
}

std::size_t curate_dataset(const std::vector<Scene>& scenes, const CurationConfig& cfg,
                           const DetectorConfig& detector, const GraphConfig& graph,
                           const std::filesystem::path& out, const nlohmann::json& header, int workers) {
  const auto pairs = curate_scenes(scenes, cfg, detector, graph, workers);
  write_qa_file(out, header, pairs);
  return pairs.size();
}

}  // namespace coopgot
