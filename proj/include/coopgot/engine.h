#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "coopgot/answer.h"
#include "coopgot/answerers.h"
#include "coopgot/curation.h"
#include "coopgot/graph.h"
#include "coopgot/scene.h"
#include "json.hpp"

namespace coopgot {

enum class RunMode { kInference, kTeacher };
RunMode parse_run_mode(const std::string& s);
std::string to_string(RunMode m);

struct NodeResult {
  std::string uid;
  QType qtype = QType::kQ1;
  std::string context;  // exactly what the answerer received
  std::string answer_text;
  std::optional<Answer> parsed;
  bool failed = false;
  std::string error;
  // Parents whose failure left their slot in `context` empty.
  std::vector<QType> unavailable_parents;
  double wall_ms = 0.0;
};

// One perception-feature access. Transfers cost bandwidth; reuses do not.
struct FeatureEvent {
  std::string seq_id;
  std::int64_t keyframe_ms = 0;
  std::string cav_id;
  std::int64_t timestep_ms = 0;
  bool reuse = false;
  friend auto operator<=>(const FeatureEvent&, const FeatureEvent&) = default;
};

struct SampleResult {
  std::string seq_id;
  double t = 0.0;
  std::string ego;
  std::vector<NodeResult> nodes;  // topological order
  std::vector<FeatureEvent> accesses;

  const NodeResult* node(QType q) const;
};

struct RunLog {
  std::string graph;
  std::string answerer;
  RunMode mode = RunMode::kInference;
  std::vector<SampleResult> samples;
  // Deduplicated per (seq, keyframe, cav, timestep), sorted.
  std::vector<FeatureEvent> ledger;

  std::size_t node_count() const;
  std::size_t failure_count() const;
  nlohmann::json to_json(bool include_timing = false) const;
  static RunLog from_json(const nlohmann::json& j);
};

// Uid -> curated pair.
using QaIndex = std::map<std::string, const QaPair*>;
QaIndex index_pairs(const std::vector<QaPair>& pairs);

// Throws MissingSample when any graph node lacks a curated pair.
SampleResult run_sample(const GraphConfig& graph, const Scene& scene, double t, const std::string& ego,
                        Answerer& answerer, RunMode mode, const QaIndex& qa_index);

// Folds the accesses of every sample into the keyframe-level ledger.
std::vector<FeatureEvent> build_ledger(const std::vector<SampleResult>& samples);

// Groups pairs by (seq, t, ego) and runs each group. Output order is
// canonical regardless of worker count. Throws IoError, MissingSample.
RunLog run_dataset(const GraphConfig& graph, const std::vector<QaPair>& pairs, const std::vector<Scene>& scenes,
                   Answerer& answerer, RunMode mode, int workers = 1);

struct AnswerRecord {
  std::string uid;
  QType qtype = QType::kQ1;
  std::string answer_text;
  std::optional<Answer> parsed;
  bool failed = false;
};

std::vector<AnswerRecord> answer_records(const RunLog& log);
nlohmann::json to_json(const AnswerRecord& r);
AnswerRecord answer_record_from_json(const nlohmann::json& j);

void write_answers_file(const std::filesystem::path& path, const nlohmann::json& header,
                        const std::vector<AnswerRecord>& records);
struct AnswersFile {
  nlohmann::json header;
  std::vector<AnswerRecord> records;
};
AnswersFile read_answers_file(const std::filesystem::path& path);

}  // namespace coopgot
