#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "coopgot/answer.h"
#include "coopgot/curation.h"
#include "coopgot/engine.h"
#include "coopgot/scene.h"
#include "json.hpp"

namespace coopgot {

struct MatchPair {
  int pred = 0;
  int gt = 0;
  double distance = 0.0;
};

struct MatchResult {
  std::vector<MatchPair> pairs;
  std::vector<int> unmatched_pred;
  std::vector<int> unmatched_gt;
};

// Greedy global matching: all pairs ascending by (distance, pred, gt),
// accepted when both ends are free and distance <= tau.
MatchResult match_points(const std::vector<Vec2>& pred, const std::vector<Vec2>& gt, double tau);

struct F1Counts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision() const;
  double recall() const;
  // Percentage; 0 when tp == 0.
  double f1() const;
};

using PointSample = std::pair<std::vector<Vec2>, std::vector<Vec2>>;  // (pred, gt)
F1Counts f1_counts(const std::vector<PointSample>& samples, double tau);
double f1_micro(const std::vector<PointSample>& samples, double tau);

struct TrajL2 {
  double at_1s = 0.0;
  double at_2s = 0.0;
  double at_3s = 0.0;
  double avg = 0.0;
};
// Throws LengthMismatch unless both have six waypoints.
TrajL2 traj_l2(const std::vector<Vec2>& pred, const std::vector<Vec2>& gt);
TrajL2 traj_l2(const Waypoints6& pred, const Waypoints6& gt);

struct PredictionL2 {
  double mean_l2 = 0.0;
  double coverage = 1.0;
  std::size_t matched = 0;
  std::size_t total_gt = 0;
};
using PredictionSample = std::pair<PredictionList, PredictionList>;  // (pred, gt)
PredictionL2 prediction_l2(const std::vector<PredictionSample>& samples, double tau);

// |dspeed| + |dsteer|. Throws RangeError for indices outside 0..4.
int action_l1(std::pair<int, int> pred, std::pair<int, int> gt);
int action_l1(const ActionClass& pred, const ActionClass& gt);

// Percentage. Throws EmptyInput.
double binary_accuracy(const std::vector<std::pair<bool, bool>>& samples);

struct CollisionSample {
  Waypoints6 plan;  // ego frame
  const Scene* scene = nullptr;
  double t = 0.0;
  std::string ego;
};

struct CollisionRates {
  double cr_1s = 0.0;
  double cr_2s = 0.0;
  double cr_3s = 0.0;
  double avg = 0.0;
};

// Earliest colliding waypoint index (1-based), or 0. Throws OutOfRange.
int first_collision(const CollisionSample& s, double dt = 0.5);
CollisionRates collision_rate(const std::vector<CollisionSample>& samples,
                              std::array<double, 3> horizons = {1.0, 2.0, 3.0}, double dt = 0.5);

enum class FusionMethod { kNoFusion, kEarly, kIntermediate, kLlm };
// Throws UnknownMethod.
FusionMethod parse_fusion_method(const std::string& s);
std::string to_string(FusionMethod m);

struct CostConfig {
  double no_fusion = 0.0;
  double early_fusion_pointcloud = 1.9208;
  double intermediate_feature = 0.4008;
  double llm_scene_feature = 0.4008;
  double llm_object_overhead = 0.0060;
  // Throws InvalidConfig.
  void validate() const;
};
nlohmann::json to_json(const CostConfig& c);
CostConfig cost_config_from_json(const nlohmann::json& j);

// MB per CAV per keyframe. Each ledger transfer costs the method's payload;
// reuse events cost nothing.
double comm_cost(const RunLog& log, FusionMethod method, const CostConfig& costs);
double comm_cost(const std::vector<FeatureEvent>& ledger, FusionMethod method, const CostConfig& costs);

struct EvalConfig {
  double match_radius = 2.0;
  std::array<double, 3> horizons = {1.0, 2.0, 3.0};
  double waypoint_dt = 0.5;
};

struct MetricsReport {
  std::string label;
  // qtype name ("Q1".."Q9", or "all") -> metric -> value.
  std::map<std::string, std::map<std::string, double>> cells;

  std::optional<double> get(const std::string& qtype, const std::string& metric) const;
  std::string to_csv() const;
  std::string to_markdown() const;
};

// Throws CoverageGap naming the first curated uid without an answer.
MetricsReport aggregate_report(const std::vector<AnswerRecord>& answers, const std::vector<QaPair>& pairs,
                               const std::vector<Scene>& scenes, const EvalConfig& cfg,
                               const std::string& label = "run");

// Reads one or more reports from CSV text.
std::vector<MetricsReport> reports_from_csv(const std::string& csv);
std::string reports_to_markdown(const std::vector<MetricsReport>& reports);

struct ReportDelta {
  std::string qtype;
  std::string metric;
  std::optional<double> a;
  std::optional<double> b;
};
std::vector<ReportDelta> compare_reports(const MetricsReport& a, const MetricsReport& b);
std::string deltas_to_csv(const std::vector<ReportDelta>& d);
std::string deltas_to_markdown(const std::vector<ReportDelta>& d, const std::string& a_label,
                               const std::string& b_label);

}  // namespace coopgot
