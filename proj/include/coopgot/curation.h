#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "coopgot/answer.h"
#include "coopgot/graph.h"
#include "coopgot/scene.h"
#include "coopgot/visibility.h"
#include "json.hpp"

namespace coopgot {

struct CurationConfig {
  double notable_radius = 10.0;
  int k_max = 3;
  double waypoint_dt = 0.5;
  double match_radius = 2.0;
  double stationary_displacement = 1.0;
  double turn_threshold_deg = 20.0;
  // Lower bounds of very slow, slow, moderate, fast (m/s).
  std::array<double, 4> speed_bounds = {0.2, 1.5, 4.0, 8.0};
  // Total heading change (deg) separating straight / slight / full turns.
  std::array<double, 2> steer_bounds_deg = {5.0, 20.0};
  // Distance to the reference polyline (origin + waypoints) instead of to
  // the waypoints themselves.
  bool segment_distance = false;
  double min_segment = 0.05;

  // Throws InvalidConfig.
  void validate() const;
};

nlohmann::json to_json(const CurationConfig& cfg);
CurationConfig curation_config_from_json(const nlohmann::json& j);

enum class NotableMode { kVisible, kInvisible, kAll };

struct NotableObject {
  std::string id;
  Vec2 position;  // ego frame
  double distance = 0.0;
};

// Ego's ground-truth future as six ego-frame points.
Waypoints6 reference_waypoints(const Scene& scene, double t, const std::string& ego,
                               double dt = 0.5);

double distance_to_reference(Vec2 p, const Waypoints6& ref, bool segment);

// Throws OutOfRange / UnknownId.
std::vector<NotableObject> notable_objects(const Scene& scene, double t, const std::string& ego,
                                           NotableMode mode, const CurationConfig& cfg,
                                           const DetectorConfig& detector = {});

// Throws DegenerateInput.
MotionClass classify_motion(const Waypoints6& waypoints, const CurationConfig& cfg);
// Waypoints are ego-frame; the origin is prepended. Throws DegenerateInput.
ActionClass classify_action(const Waypoints6& waypoints, const CurationConfig& cfg);

struct CavPlan {
  std::string cav_id;
  bool notable = false;
  Vec2 position;  // ego frame
  Waypoints6 plan;  // ego frame
};

std::vector<CavPlan> cav_notability(const Scene& scene, double t, const std::string& ego,
                                    const CurationConfig& cfg);

PredictionList merge_prediction(const PredictionList& q5, const std::vector<CavPlan>& q6,
                                const CurationConfig& cfg);

struct QaPair {
  std::string uid;
  std::string seq_id;
  double t = 0.0;
  std::string ego_cav;
  QType qtype = QType::kQ1;
  std::string question;
  std::string context;
  nlohmann::json payload;
  Answer gt;
  std::string gt_text;
};

std::string make_uid(const std::string& seq_id, double t, const std::string& ego, QType q);

// All nine QA pairs for one (scene, keyframe, ego) with contexts taken from
// the ground-truth answers of the parents in `graph`.
std::vector<QaPair> curate_frame(const Scene& scene, double t, const std::string& ego,
                                 const CurationConfig& cfg, const DetectorConfig& detector,
                                 const GraphConfig& graph);

QaPair curate_sample(const Scene& scene, double t, const std::string& ego, QType q,
                     const CurationConfig& cfg, const DetectorConfig& detector = {},
                     const GraphConfig& graph = full_graph());

enum class Split { kAll, kTrain, kTest };
Split parse_split(const std::string& s);
bool scene_in_split(const Scene& scene, Split split);

// Canonical (seq_id, t, ego, qtype) order. Deterministic for any worker count.
std::vector<QaPair> curate_scenes(const std::vector<Scene>& scenes, const CurationConfig& cfg,
                                  const DetectorConfig& detector, const GraphConfig& graph,
                                  int workers = 1);

// Expected count for curate_scenes with this graph.
std::size_t expected_pair_count(const std::vector<Scene>& scenes, const GraphConfig& graph);

nlohmann::json to_json(const QaPair& qa);
QaPair qa_from_json(const nlohmann::json& j);

// Header line first, one record per line. Throws IoError.
void write_qa_file(const std::filesystem::path& path, const nlohmann::json& header,
                   const std::vector<QaPair>& pairs);
struct QaFile {
  nlohmann::json header;
  std::vector<QaPair> pairs;
};
QaFile read_qa_file(const std::filesystem::path& path);

std::size_t curate_dataset(const std::vector<Scene>& scenes, const CurationConfig& cfg,
                           const DetectorConfig& detector, const GraphConfig& graph,
                           const std::filesystem::path& out, const nlohmann::json& header,
                           int workers = 1);

std::string question_text(QType q, const nlohmann::json& payload);

}  // namespace coopgot
