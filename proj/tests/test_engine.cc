#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <set>

#include "coopgot/answerers.h"
#include "coopgot/curation.h"
#include "coopgot/engine.h"
#include "coopgot/errors.h"
#include "coopgot/metrics.h"
#include "coopgot/scenegen.h"
#include "doctest.h"
#include "support.h"

using namespace coopgot;
using namespace coopgot::testing;

namespace {

struct Dataset {
  std::vector<Scene> scenes;
  std::vector<QaPair> pairs;
};

Dataset small_dataset(const GraphConfig& graph, int n = 2) {
  Dataset d;
  for (int seed = 1; seed <= n; ++seed) d.scenes.push_back(generate_scene({}, seed));
  d.pairs = curate_scenes(d.scenes, {}, {}, graph, 2);
  return d;
}

// Returns a fixed string for one qtype and defers to `inner` otherwise.
class OverrideAnswerer : public Answerer {
 public:
  OverrideAnswerer(std::shared_ptr<Answerer> inner, QType q, std::string text)
      : inner_(std::move(inner)), q_(q), text_(std::move(text)) {}
  std::string name() const override { return "override"; }
  std::string answer(const AnswerRequest& req) override { return req.qtype == q_ ? text_ : inner_->answer(req); }

 private:
  std::shared_ptr<Answerer> inner_;
  QType q_;
  std::string text_;
};

}  // namespace

TEST_SUITE("engine") {
  TEST_CASE("oracle answers equal ground truth in both modes") {
    const auto d = small_dataset(full_graph());
    OracleAnswerer oracle;
    const QaIndex idx = index_pairs(d.pairs);
    for (RunMode mode : {RunMode::kInference, RunMode::kTeacher}) {
      const RunLog log = run_dataset(full_graph(), d.pairs, d.scenes, oracle, mode, 2);
      CHECK(log.failure_count() == 0);
      CHECK(log.node_count() == d.pairs.size());
      for (const auto& s : log.samples) {
        for (const auto& n : s.nodes) {
          REQUIRE(n.parsed.has_value());
          CHECK(*n.parsed == idx.at(n.uid)->gt);
          CHECK(n.context == idx.at(n.uid)->context);
        }
      }
    }
  }

  TEST_CASE("teacher mode feeds curated contexts to any answerer") {
    const auto d = small_dataset(full_graph(), 1);
    HeuristicAnswerer heuristic;
    const QaIndex idx = index_pairs(d.pairs);
    const RunLog log = run_dataset(full_graph(), d.pairs, d.scenes, heuristic, RunMode::kTeacher);
    for (const auto& s : log.samples) {
      const NodeResult* q9 = s.node(QType::kQ9);
      REQUIRE(q9 != nullptr);
      CHECK(q9->context == idx.at(q9->uid)->context);
    }
  }

  TEST_CASE("inference contexts are rendered parent outputs") {
    const auto d = small_dataset(full_graph(), 1);
    HeuristicAnswerer heuristic;
    const RunLog log = run_dataset(full_graph(), d.pairs, d.scenes, heuristic, RunMode::kInference);
    const GraphConfig g = full_graph();
    std::size_t edges = 0;
    for (const auto& s : log.samples) {
      for (const auto& n : s.nodes) {
        std::vector<std::string> texts;
        for (QType p : g.parents(n.qtype)) {
          const NodeResult* pr = s.node(p);
          REQUIRE(pr != nullptr);
          if (pr->parsed) texts.push_back(render_answer(*pr->parsed));
          ++edges;
        }
        CHECK(n.context == compose_context(texts));
      }
    }
    CHECK(edges == log.samples.size() * g.edges.size());
  }

  TEST_CASE("transfer ledger per keyframe") {
    Scene s = two_cav_scene(5.0, 3.0);
    const auto pairs = curate_scenes({s}, {}, {}, full_graph());
    OracleAnswerer oracle;
    const QaIndex idx = index_pairs(pairs);
    const SampleResult one = run_sample(full_graph(), s, 1.0, "cav_1", oracle, RunMode::kInference, idx);
    const SampleResult two = run_sample(full_graph(), s, 1.0, "cav_2", oracle, RunMode::kInference, idx);
    const auto ledger = build_ledger({one, two});
    REQUIRE(ledger.size() == 4);
    int transfers = 0, reuses = 0;
    std::set<std::string> cavs;
    for (const auto& e : ledger) {
      CHECK(e.keyframe_ms == 1000);
      (e.reuse ? reuses : transfers) += 1;
      if (e.reuse) CHECK(e.timestep_ms == 500);
      else CHECK(e.timestep_ms == 1000);
      cavs.insert(e.cav_id);
    }
    CHECK(transfers == 2);
    CHECK(reuses == 2);
    CHECK(cavs.size() == 2);
  }

  TEST_CASE("transfers per keyframe do not depend on the graph") {
    for (const auto& g : {full_graph(), simplified_perception_graph(), simplified_prediction_graph()}) {
      const auto d = small_dataset(g, 1);
      OracleAnswerer oracle;
      const RunLog log = run_dataset(g, d.pairs, d.scenes, oracle, RunMode::kInference);
      std::size_t transfers = 0;
      for (const auto& e : log.ledger) transfers += !e.reuse;
      CHECK(transfers == eligible_keyframes(d.scenes[0]).size() * d.scenes[0].cavs.size());
    }
  }

  TEST_CASE("worker count does not change output") {
    const auto d = small_dataset(full_graph(), 3);
    HeuristicAnswerer heuristic;
    const RunLog a = run_dataset(full_graph(), d.pairs, d.scenes, heuristic, RunMode::kInference, 1);
    const RunLog b = run_dataset(full_graph(), d.pairs, d.scenes, heuristic, RunMode::kInference, 8);
    CHECK(a.to_json().dump() == b.to_json().dump());
    const auto dir = std::filesystem::temp_directory_path() / "coopgot_engine_workers";
    std::filesystem::create_directories(dir);
    write_answers_file(dir / "a.jsonl", {{"stage", "infer"}}, answer_records(a));
    write_answers_file(dir / "b.jsonl", {{"stage", "infer"}}, answer_records(b));
    auto slurp = [](const std::filesystem::path& p) {
      std::ifstream in(p);
      return std::string(std::istreambuf_iterator<char>(in), {});
    };
    CHECK(slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl"));
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("failed parents leave an empty recorded context") {
    const auto d = small_dataset(full_graph(), 1);
    OverrideAnswerer bad(std::make_shared<OracleAnswerer>(), QType::kQ4, "no idea");
    const RunLog log = run_dataset(full_graph(), d.pairs, d.scenes, bad, RunMode::kInference);
    CHECK(log.failure_count() == log.samples.size());
    for (const auto& s : log.samples) {
      CHECK(s.node(QType::kQ4)->failed);
      for (QType q : {QType::kQ5, QType::kQ6}) {
        CHECK(s.node(q)->context.empty());
        CHECK(s.node(q)->unavailable_parents == std::vector<QType>{QType::kQ4});
        CHECK_FALSE(s.node(q)->failed);
      }
    }
  }

  TEST_CASE("a flipped Q6 reaches the Q7 context") {
    const auto d = small_dataset(full_graph(), 1);
    const QaIndex idx = index_pairs(d.pairs);
    int changed = 0;
    for (const auto& qa : d.pairs) {
      if (qa.qtype != QType::kQ6) continue;
      CavNotability flipped = qa.gt.as<CavNotability>();
      for (auto& e : flipped.entries) e.notable = !e.notable;
      const std::string text = render_answer({QType::kQ6, flipped});
      const Scene& scene = d.scenes[0];
      OverrideAnswerer wrong(std::make_shared<OracleAnswerer>(), QType::kQ6, text);
      const SampleResult s = run_sample(full_graph(), scene, qa.t, qa.ego_cav, wrong, RunMode::kInference, idx);
      const std::string& ctx = s.node(QType::kQ7)->context;
      CHECK(ctx.find(text) != std::string::npos);
      CHECK(ctx != idx.at(s.node(QType::kQ7)->uid)->context);
      changed += 1;
      const SampleResult teacher = run_sample(full_graph(), scene, qa.t, qa.ego_cav, wrong, RunMode::kTeacher, idx);
      CHECK(teacher.node(QType::kQ7)->context == idx.at(teacher.node(QType::kQ7)->uid)->context);
    }
    CHECK(changed > 0);
  }

  TEST_CASE("missing curated pairs") {
    auto d = small_dataset(full_graph(), 1);
    d.pairs.erase(d.pairs.begin() + 4);
    OracleAnswerer oracle;
    CHECK_THROWS_AS(run_dataset(full_graph(), d.pairs, d.scenes, oracle, RunMode::kInference), MissingSample);
    const auto full = small_dataset(full_graph(), 1);
    CHECK_THROWS_AS(run_dataset(full_graph(), full.pairs, {}, oracle, RunMode::kInference), IoError);
  }

  TEST_CASE("run log and answers files round trip") {
    const auto d = small_dataset(simplified_prediction_graph(), 1);
    HeuristicAnswerer heuristic;
    const RunLog log = run_dataset(simplified_prediction_graph(), d.pairs, d.scenes, heuristic, RunMode::kInference);
    const RunLog back = RunLog::from_json(log.to_json());
    CHECK(back.to_json().dump() == log.to_json().dump());
    CHECK(back.ledger == log.ledger);

    const auto path = std::filesystem::temp_directory_path() / "coopgot_answers_rt.jsonl";
    const auto records = answer_records(log);
    CHECK(records.size() == d.pairs.size());
    write_answers_file(path, {{"stage", "infer"}, {"seed", 1}}, records);
    const AnswersFile f = read_answers_file(path);
    CHECK(f.header.at("seed") == 1);
    REQUIRE(f.records.size() == records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
      CHECK(f.records[i].uid == records[i].uid);
      CHECK(f.records[i].answer_text == records[i].answer_text);
      CHECK(f.records[i].parsed == records[i].parsed);
    }
    std::filesystem::remove(path);
    CHECK_THROWS_AS(read_answers_file(path), IoError);
  }

  TEST_CASE("run modes") {
    CHECK(parse_run_mode("teacher") == RunMode::kTeacher);
    CHECK(to_string(RunMode::kInference) == "inference");
    CHECK_THROWS_AS(parse_run_mode("x"), InvalidConfig);
  }
}
