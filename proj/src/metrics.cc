#include "coopgot/metrics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <set>
#include <sstream>

#include "coopgot/errors.h"

namespace coopgot {
namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

const char* kTableMetric[] = {"f1", "f1", "f1", "f1", "l2", "accuracy", "l2", "l1", "l2_avg"};

}  // namespace

MatchResult match_points(const std::vector<Vec2>& pred, const std::vector<Vec2>& gt, double tau) {
  std::vector<MatchPair> all;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    for (std::size_t j = 0; j < gt.size(); ++j) {
      const double d = distance(pred[i], gt[j]);
      if (d <= tau) all.push_back({static_cast<int>(i), static_cast<int>(j), d});
    }
  }
  std::sort(all.begin(), all.end(), [](const MatchPair& a, const MatchPair& b) {
    return std::tie(a.distance, a.pred, a.gt) < std::tie(b.distance, b.pred, b.gt);
  });
  std::vector<bool> used_p(pred.size()), used_g(gt.size());
  MatchResult r;
  for (const auto& m : all) {
    if (used_p[m.pred] || used_g[m.gt]) continue;
    used_p[m.pred] = used_g[m.gt] = true;
    r.pairs.push_back(m);
  }
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!used_p[i]) r.unmatched_pred.push_back(static_cast<int>(i));
  }
  for (std::size_t j = 0; j < gt.size(); ++j) {
    if (!used_g[j]) r.unmatched_gt.push_back(static_cast<int>(j));
  }
  return r;
}

double F1Counts::precision() const { return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp); }
double F1Counts::recall() const { return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn); }
double F1Counts::f1() const {
  if (tp == 0) return 0.0;
  const double p = precision(), r = recall();
  return 100.0 * 2.0 * p * r / (p + r);
}

F1Counts f1_counts(const std::vector<PointSample>& samples, double tau) {
  F1Counts c;
  for (const auto& [pred, gt] : samples) {
    const MatchResult m = match_points(pred, gt, tau);
    c.tp += m.pairs.size();
    c.fp += m.unmatched_pred.size();
    c.fn += m.unmatched_gt.size();
  }
  return c;
}

double f1_micro(const std::vector<PointSample>& samples, double tau) { return f1_counts(samples, tau).f1(); }

TrajL2 traj_l2(const std::vector<Vec2>& pred, const std::vector<Vec2>& gt) {
  if (pred.size() != 6 || gt.size() != 6) {
    throw LengthMismatch("trajectories need 6 waypoints (got " + std::to_string(pred.size()) + " and " +
                         std::to_string(gt.size()) + ")");
  }
  TrajL2 r;
  r.at_1s = distance(pred[1], gt[1]);
  r.at_2s = distance(pred[3], gt[3]);
  r.at_3s = distance(pred[5], gt[5]);
  r.avg = (r.at_1s + r.at_2s + r.at_3s) / 3.0;
  return r;
}

TrajL2 traj_l2(const Waypoints6& pred, const Waypoints6& gt) {
  return traj_l2(std::vector<Vec2>(pred.begin(), pred.end()), std::vector<Vec2>(gt.begin(), gt.end()));
}

PredictionL2 prediction_l2(const std::vector<PredictionSample>& samples, double tau) {
  PredictionL2 r;
  double sum = 0.0;
  for (const auto& [pred, gt] : samples) {
    std::vector<Vec2> ps, gs;
    for (const auto& e : pred.entries) ps.push_back(e.start);
    for (const auto& e : gt.entries) gs.push_back(e.start);
    const MatchResult m = match_points(ps, gs, tau);
    r.total_gt += gs.size();
    for (const auto& pair : m.pairs) {
      double l2 = 0.0;
      for (std::size_t k = 0; k < 6; ++k) {
        l2 += distance(pred.entries[pair.pred].waypoints[k], gt.entries[pair.gt].waypoints[k]);
      }
      sum += l2 / 6.0;
      ++r.matched;
    }
  }
  r.mean_l2 = r.matched ? sum / static_cast<double>(r.matched) : 0.0;
  r.coverage = r.total_gt ? static_cast<double>(r.matched) / static_cast<double>(r.total_gt) : 1.0;
  return r;
}

int action_l1(std::pair<int, int> pred, std::pair<int, int> gt) {
  for (int v : {pred.first, pred.second, gt.first, gt.second}) {
    if (v < 0 || v > 4) throw RangeError("action index out of range: " + std::to_string(v));
  }
  return std::abs(pred.first - gt.first) + std::abs(pred.second - gt.second);
}

int action_l1(const ActionClass& pred, const ActionClass& gt) {
  return action_l1({static_cast<int>(pred.speed), static_cast<int>(pred.steer)},
                   {static_cast<int>(gt.speed), static_cast<int>(gt.steer)});
}

double binary_accuracy(const std::vector<std::pair<bool, bool>>& samples) {
  if (samples.empty()) throw EmptyInput("binary_accuracy needs at least one sample");
  std::size_t ok = 0;
  for (const auto& [p, g] : samples) ok += p == g ? 1 : 0;
  return 100.0 * static_cast<double>(ok) / static_cast<double>(samples.size());
}

int first_collision(const CollisionSample& s, double dt) {
  if (s.scene == nullptr) throw OutOfRange("collision sample without a scene");
  const Pose2 ego = s.scene->agent(s.ego).pose_at(s.t);
  for (int k = 1; k <= 6; ++k) {
    const Vec2 w = from_ego_frame(s.plan[k - 1], ego);
    const double tk = s.t + k * dt;
    for (const TrackedObject* a : s.scene->agents()) {
      if (a->id == s.ego) continue;
      if (distance(w, a->pose_at(tk).position()) < collision_radius(*a)) return k;
    }
  }
  return 0;
}

CollisionRates collision_rate(const std::vector<CollisionSample>& samples, std::array<double, 3> horizons, double dt) {
  CollisionRates r;
  if (samples.empty()) return r;
  std::array<std::size_t, 3> hits{};
  for (const auto& s : samples) {
    const int k = first_collision(s, dt);
    if (k == 0) continue;
    for (std::size_t h = 0; h < 3; ++h) {
      if (k * dt <= horizons[h] + 1e-9) ++hits[h];
    }
  }
  const double n = static_cast<double>(samples.size());
  r.cr_1s = 100.0 * static_cast<double>(hits[0]) / n;
  r.cr_2s = 100.0 * static_cast<double>(hits[1]) / n;
  r.cr_3s = 100.0 * static_cast<double>(hits[2]) / n;
  r.avg = (r.cr_1s + r.cr_2s + r.cr_3s) / 3.0;
  return r;
}

FusionMethod parse_fusion_method(const std::string& s) {
  if (s == "no_fusion" || s == "none") return FusionMethod::kNoFusion;
  if (s == "early" || s == "early_fusion") return FusionMethod::kEarly;
  if (s == "intermediate" || s == "intermediate_fusion") return FusionMethod::kIntermediate;
  if (s == "llm" || s == "llm_fusion") return FusionMethod::kLlm;
  throw UnknownMethod("unknown fusion method '" + s + "'");
}

std::string to_string(FusionMethod m) {
  switch (m) {
    case FusionMethod::kNoFusion:
      return "no_fusion";
    case FusionMethod::kEarly:
      return "early";
    case FusionMethod::kIntermediate:
      return "intermediate";
    case FusionMethod::kLlm:
      return "llm";
  }
  return "unknown";
}

void CostConfig::validate() const {
  for (double v : {no_fusion, early_fusion_pointcloud, intermediate_feature, llm_scene_feature, llm_object_overhead}) {
    if (!(v >= 0.0)) throw InvalidConfig("cost constants must be >= 0");
  }
}

nlohmann::json to_json(const CostConfig& c) {
  return {{"no_fusion", c.no_fusion},
          {"early_fusion_pointcloud", c.early_fusion_pointcloud},
          {"intermediate_feature", c.intermediate_feature},
          {"llm_scene_feature", c.llm_scene_feature},
          {"llm_object_overhead", c.llm_object_overhead}};
}

CostConfig cost_config_from_json(const nlohmann::json& j) {
  CostConfig c;
  try {
    c.no_fusion = j.value("no_fusion", c.no_fusion);
    c.early_fusion_pointcloud = j.value("early_fusion_pointcloud", c.early_fusion_pointcloud);
    c.intermediate_feature = j.value("intermediate_feature", c.intermediate_feature);
    c.llm_scene_feature = j.value("llm_scene_feature", c.llm_scene_feature);
    c.llm_object_overhead = j.value("llm_object_overhead", c.llm_object_overhead);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfig(std::string("cost config: ") + e.what());
  }
  c.validate();
  return c;
}

double comm_cost(const std::vector<FeatureEvent>& ledger, FusionMethod method, const CostConfig& costs) {
  double per_transfer = 0.0;
  switch (method) {
    case FusionMethod::kNoFusion:
      per_transfer = costs.no_fusion;
      break;
    case FusionMethod::kEarly:
      per_transfer = costs.early_fusion_pointcloud;
      break;
    case FusionMethod::kIntermediate:
      per_transfer = costs.intermediate_feature;
      break;
    case FusionMethod::kLlm:
      per_transfer = costs.llm_scene_feature + costs.llm_object_overhead;
      break;
  }
  std::set<std::tuple<std::string, std::int64_t, std::string>> cav_keyframes;
  std::size_t transfers = 0;
  for (const auto& e : ledger) {
    cav_keyframes.insert({e.seq_id, e.keyframe_ms, e.cav_id});
    if (!e.reuse) ++transfers;
  }
  if (cav_keyframes.empty()) return 0.0;
  return per_transfer * (static_cast<double>(transfers) / static_cast<double>(cav_keyframes.size()));
}

double comm_cost(const RunLog& log, FusionMethod method, const CostConfig& costs) {
  return comm_cost(log.ledger, method, costs);
}

std::optional<double> MetricsReport::get(const std::string& qtype, const std::string& metric) const {
  const auto it = cells.find(qtype);
  if (it == cells.end()) return std::nullopt;
  const auto jt = it->second.find(metric);
  if (jt == it->second.end()) return std::nullopt;
  return jt->second;
}

MetricsReport aggregate_report(const std::vector<AnswerRecord>& answers, const std::vector<QaPair>& pairs,
                               const std::vector<Scene>& scenes, const EvalConfig& cfg, const std::string& label) {
  std::map<std::string, const AnswerRecord*> by_uid;
  for (const auto& a : answers) by_uid[a.uid] = &a;
  std::map<std::string, const Scene*> by_seq;
  for (const auto& s : scenes) by_seq[s.seq_id] = &s;

  std::map<QType, std::vector<PointSample>> lists;
  std::map<QType, std::vector<PredictionSample>> preds;
  std::vector<std::pair<bool, bool>> flags;
  std::vector<int> l1s;
  std::vector<TrajL2> l2s;
  std::vector<CollisionSample> plans;
  std::map<QType, std::size_t> total, failed;

  for (const auto& qa : pairs) {
    const auto it = by_uid.find(qa.uid);
    if (it == by_uid.end()) throw CoverageGap("no answer for curated sample " + qa.uid);
    const AnswerRecord& a = *it->second;
    ++total[qa.qtype];
    const bool ok = !a.failed && a.parsed.has_value() && variant_matches(qa.qtype, a.parsed->value);
    if (!ok) ++failed[qa.qtype];
    switch (qa.qtype) {
      case QType::kQ1:
      case QType::kQ2:
      case QType::kQ3:
      case QType::kQ4:
        lists[qa.qtype].push_back({ok ? a.parsed->as<ObjectList>().objects : std::vector<Vec2>{},
                                   qa.gt.as<ObjectList>().objects});
        break;
      case QType::kQ5:
      case QType::kQ7:
        preds[qa.qtype].push_back({ok ? a.parsed->as<PredictionList>() : PredictionList{}, qa.gt.as<PredictionList>()});
        break;
      case QType::kQ6:
        for (const auto& g : qa.gt.as<CavNotability>().entries) {
          bool p = !g.notable;
          if (ok) {
            for (const auto& e : a.parsed->as<CavNotability>().entries) {
              if (e.cav_id == g.cav_id) p = e.notable;
            }
          }
          flags.push_back({p, g.notable});
        }
        break;
      case QType::kQ8:
        if (ok) l1s.push_back(action_l1(a.parsed->as<ActionClass>(), qa.gt.as<ActionClass>()));
        break;
      case QType::kQ9:
        if (ok) {
          const auto& w = a.parsed->as<Trajectory6>().waypoints;
          l2s.push_back(traj_l2(w, qa.gt.as<Trajectory6>().waypoints));
          const auto sit = by_seq.find(qa.seq_id);
          if (sit == by_seq.end()) throw IoError("scene not found for sequence " + qa.seq_id);
          plans.push_back({w, sit->second, qa.t, qa.ego_cav});
        }
        break;
    }
  }

  MetricsReport r;
  r.label = label;
  for (const auto& [q, n] : total) {
    auto& c = r.cells[qtype_name(q)];
    c["n"] = static_cast<double>(n);
    c["parse_failure_rate"] = n ? static_cast<double>(failed[q]) / static_cast<double>(n) : 0.0;
  }
  for (const auto& [q, s] : lists) {
    const F1Counts f = f1_counts(s, cfg.match_radius);
    auto& c = r.cells[qtype_name(q)];
    c["f1"] = f.f1();
    c["precision"] = 100.0 * f.precision();
    c["recall"] = 100.0 * f.recall();
    c["tp"] = static_cast<double>(f.tp);
    c["fp"] = static_cast<double>(f.fp);
    c["fn"] = static_cast<double>(f.fn);
  }
  for (const auto& [q, s] : preds) {
    const PredictionL2 p = prediction_l2(s, cfg.match_radius);
    auto& c = r.cells[qtype_name(q)];
    c["l2"] = p.mean_l2;
    c["coverage"] = p.coverage;
  }
  if (!flags.empty()) r.cells["Q6"]["accuracy"] = binary_accuracy(flags);
  if (total.count(QType::kQ8)) {
    double sum = 0.0;
    for (int v : l1s) sum += v;
    r.cells["Q8"]["l1"] = l1s.empty() ? 0.0 : sum / static_cast<double>(l1s.size());
  }
  if (total.count(QType::kQ9)) {
    TrajL2 m;
    for (const auto& l : l2s) {
      m.at_1s += l.at_1s;
      m.at_2s += l.at_2s;
      m.at_3s += l.at_3s;
    }
    const double n = l2s.empty() ? 1.0 : static_cast<double>(l2s.size());
    auto& c = r.cells["Q9"];
    c["l2_1s"] = m.at_1s / n;
    c["l2_2s"] = m.at_2s / n;
    c["l2_3s"] = m.at_3s / n;
    c["l2_avg"] = (c["l2_1s"] + c["l2_2s"] + c["l2_3s"]) / 3.0;
    const CollisionRates cr = collision_rate(plans, cfg.horizons, cfg.waypoint_dt);
    c["cr_1s"] = cr.cr_1s;
    c["cr_2s"] = cr.cr_2s;
    c["cr_3s"] = cr.cr_3s;
    c["cr_avg"] = cr.avg;
  }
  return r;
}

std::string MetricsReport::to_csv() const {
  std::string out = "label,qtype,metric,value\n";
  std::string safe = label;
  std::replace(safe.begin(), safe.end(), ',', ';');
  for (const auto& [q, metrics] : cells) {
    for (const auto& [m, v] : metrics) out += safe + "," + q + "," + m + "," + fmt("%.6f", v) + "\n";
  }
  return out;
}

std::vector<MetricsReport> reports_from_csv(const std::string& csv) {
  std::vector<MetricsReport> out;
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("label,", 0) == 0) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 4) throw IoError("bad report row: " + line);
    if (out.empty() || out.back().label != f[0]) {
      auto it = std::find_if(out.begin(), out.end(), [&](const MetricsReport& r) { return r.label == f[0]; });
      if (it == out.end()) {
        out.push_back({f[0], {}});
      } else {
        std::rotate(it, it + 1, out.end());
      }
    }
    char* end = nullptr;
    const double v = std::strtod(f[3].c_str(), &end);
    if (end == f[3].c_str()) throw IoError("bad value in report row: " + line);
    out.back().cells[f[1]][f[2]] = v;
  }
  return out;
}

std::string MetricsReport::to_markdown() const { return reports_to_markdown({*this}); }

std::string reports_to_markdown(const std::vector<MetricsReport>& reports) {
  auto cell = [](const MetricsReport& r, const std::string& q, const std::string& m, const char* spec) {
    const auto v = r.get(q, m);
    return v ? fmt(spec, *v) : std::string("-");
  };
  std::string out;
  out += "| Graph | Q1 F1 | Q2 F1 | Q3 F1 | Q4 F1 | Q5 L2 | Q6 Acc | Q7 L2 | Q8 L1 | Q9 L2 |\n";
  out += "|---|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : reports) {
    out += "| " + r.label;
    for (int q = 1; q <= 9; ++q) {
      const bool pct = q <= 4 || q == 6;
      out += " | " + cell(r, "Q" + std::to_string(q), kTableMetric[q - 1], pct ? "%.1f" : "%.2f");
    }
    out += " |\n";
  }
  out += "\n| Graph | L2 1s | L2 2s | L2 3s | L2 avg | CR 1s | CR 2s | CR 3s | CR avg | Comm (MB) |\n";
  out += "|---|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : reports) {
    out += "| " + r.label;
    for (const char* m : {"l2_1s", "l2_2s", "l2_3s", "l2_avg"}) out += " | " + cell(r, "Q9", m, "%.2f");
    for (const char* m : {"cr_1s", "cr_2s", "cr_3s", "cr_avg"}) out += " | " + cell(r, "Q9", m, "%.2f");
    out += " | " + cell(r, "all", "comm_mb", "%.4f") + " |\n";
  }
  out += "\n| Graph | QA | Failure rate | Coverage |\n|---|---|---|---|\n";
  for (const auto& r : reports) {
    for (const auto& [q, metrics] : r.cells) {
      if (q == "all") continue;
      out += "| " + r.label + " | " + q + " | " + cell(r, q, "parse_failure_rate", "%.3f") + " | " +
             cell(r, q, "coverage", "%.3f") + " |\n";
    }
  }
  return out;
}

std::vector<ReportDelta> compare_reports(const MetricsReport& a, const MetricsReport& b) {
  std::set<std::pair<std::string, std::string>> keys;
  for (const auto* r : {&a, &b}) {
    for (const auto& [q, m] : r->cells) {
      for (const auto& [name, v] : m) keys.insert({q, name});
    }
  }
  std::vector<ReportDelta> out;
  for (const auto& [q, m] : keys) out.push_back({q, m, a.get(q, m), b.get(q, m)});
  return out;
}

std::string deltas_to_csv(const std::vector<ReportDelta>& d) {
  std::string out = "qtype,metric,a,b,delta\n";
  for (const auto& x : d) {
    out += x.qtype + "," + x.metric + "," + (x.a ? fmt("%.6f", *x.a) : "") + "," + (x.b ? fmt("%.6f", *x.b) : "") +
           "," + (x.a && x.b ? fmt("%.6f", *x.b - *x.a) : "") + "\n";
  }
  return out;
}

std::string deltas_to_markdown(const std::vector<ReportDelta>& d, const std::string& a_label,
                               const std::string& b_label) {
  std::string out = "| QA | Metric | " + a_label + " | " + b_label + " | Delta |\n|---|---|---|---|---|\n";
  for (const auto& x : d) {
    out += "| " + x.qtype + " | " + x.metric + " | " + (x.a ? fmt("%.4f", *x.a) : "-") + " | " +
           (x.b ? fmt("%.4f", *x.b) : "-") + " | " + (x.a && x.b ? fmt("%+.4f", *x.b - *x.a) : "-") + " |\n";
  }
  return out;
}

}  // namespace coopgot
