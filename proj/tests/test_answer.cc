#include <fstream>
#include <sstream>

#include "coopgot/answer.h"
#include "coopgot/errors.h"
#include "coopgot/graph.h"
#include "coopgot/rng.h"
#include "doctest.h"

#ifndef COOPGOT_SOURCE_DIR
#define COOPGOT_SOURCE_DIR "."
#endif

using namespace coopgot;

namespace {

double coord(Rng& rng) {
  // Mix of large, small and exactly representable one-decimal values.
  switch (rng.uniform_int(0, 3)) {
    case 0:
      return rng.uniform(-80, 80);
    case 1:
      return rng.uniform(-0.2, 0.2);
    case 2:
      return rng.uniform_int(-800, 800) / 10.0;
    default:
      return rng.uniform(-1000, 1000);
  }
}

Vec2 pos(Rng& rng) { return {coord(rng), coord(rng)}; }

Waypoints6 six(Rng& rng) {
  Waypoints6 w;
  for (auto& p : w) p = pos(rng);
  return w;
}

Answer random_answer(Rng& rng) {
  const QType q = qtype_from_int(rng.uniform_int(1, 9));
  switch (q) {
    case QType::kQ1:
    case QType::kQ2:
    case QType::kQ3:
    case QType::kQ4: {
      ObjectList l;
      const int n = rng.uniform_int(0, 6);
      for (int i = 0; i < n; ++i) l.objects.push_back(pos(rng));
      return {q, l};
    }
    case QType::kQ5:
    case QType::kQ7: {
      PredictionList l;
      const int n = rng.uniform_int(0, 4);
      for (int i = 0; i < n; ++i) l.entries.push_back({pos(rng), six(rng), static_cast<MotionClass>(rng.uniform_int(0, 3))});
      return {q, l};
    }
    case QType::kQ6: {
      CavNotability c;
      const int n = rng.uniform_int(0, 3);
      for (int i = 0; i < n; ++i) c.entries.push_back({"cav_" + std::to_string(rng.uniform_int(1, 99)), rng.bernoulli(0.5)});
      return {q, c};
    }
    case QType::kQ8:
      return {q, ActionClass{static_cast<SpeedClass>(rng.uniform_int(0, 4)), static_cast<SteerClass>(rng.uniform_int(0, 4))}};
    case QType::kQ9:
      return {q, Trajectory6{six(rng)}};
  }
  return {};
}

std::vector<std::pair<QType, std::string>> doc_block(const std::string& tag) {
  std::ifstream in(std::string(COOPGOT_SOURCE_DIR) + "/docs/answer_grammar.md");
  REQUIRE(in.good());
  std::vector<std::pair<QType, std::string>> out;
  std::string line;
  bool inside = false;
  while (std::getline(in, line)) {
    if (line == "```" + tag) {
      inside = true;
      continue;
    }
    if (inside && line == "```") break;
    if (!inside) continue;
    const auto bar = line.find(" | ");
    REQUIRE(bar != std::string::npos);
    out.emplace_back(parse_qtype(line.substr(0, bar)), line.substr(bar + 3));
  }
  return out;
}

}  // namespace

TEST_SUITE("answer_grammar") {
  TEST_CASE("render templates") {
    CHECK(render_answer({QType::kQ1, ObjectList{{{3.2, -1.0}}}}) == "Notable objects: (3.2, -1.0).");
    CHECK(render_answer({QType::kQ1, ObjectList{}}) == "Notable objects: None.");
    CHECK(render_answer({QType::kQ8, ActionClass{SpeedClass::kVerySlow, SteerClass::kRight}}) ==
          "Suggested action: very slow, right.");
  }

  TEST_CASE("parse None and unknown keywords") {
    CHECK(parse_answer("Notable objects: None.", QType::kQ1) == Answer{QType::kQ1, ObjectList{}});
    try {
      parse_answer("Suggested action: warp speed, right.", QType::kQ8);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.offset() == std::string("Suggested action: ").size());
    }
  }

  TEST_CASE("round trip of random answers") {
    Rng rng(61);
    for (int i = 0; i < 10000; ++i) {
      const Answer a = random_answer(rng);
      const std::string text = render_answer(a);
      const Answer back = parse_answer(text, a.qtype);
      CHECK(back == quantize(a));
      CHECK(render_answer(back) == text);
    }
  }

  TEST_CASE("quantization error bound") {
    Rng rng(62);
    for (int i = 0; i < 10000; ++i) {
      const double v = rng.uniform(-200, 200);
      CHECK(std::abs(quantize_coord(v) - v) <= 0.05 + 1e-12);
    }
    CHECK(format_coord(-0.04) == "0.0");
    CHECK(format_coord(-0.05) != "-0.0");
  }

  TEST_CASE("whitespace and trailing prose") {
    const Answer a = parse_answer("  Suggested action:fast ,  straight.  Because the road is clear.", QType::kQ8);
    CHECK(a.as<ActionClass>() == ActionClass{SpeedClass::kFast, SteerClass::kStraight});
    CHECK(parse_answer("Notable objects: ( 1.0 ,2.0 ) ;(3.0, 4.0) .", QType::kQ1).as<ObjectList>().objects.size() == 2);
  }

  TEST_CASE("longest keyword wins") {
    CHECK(parse_answer("Suggested action: very slow, slightly right.", QType::kQ8).as<ActionClass>() ==
          ActionClass{SpeedClass::kVerySlow, SteerClass::kSlightlyRight});
    CHECK_FALSE(parse_answer("Other CAVs: cav_2 not notable.", QType::kQ6).as<CavNotability>().entries[0].notable);
  }

  TEST_CASE("documented examples parse and render back") {
    const auto ex = doc_block("examples");
    CHECK(ex.size() >= 10);
    for (const auto& [q, text] : ex) {
      INFO(text);
      CHECK(render_answer(parse_answer(text, q)) == text);
    }
  }

  TEST_CASE("documented rejects fail to parse") {
    const auto bad = doc_block("rejects");
    CHECK(bad.size() >= 5);
    for (const auto& [q, text] : bad) {
      INFO(text);
      CHECK_THROWS_AS(parse_answer(text, q), ParseError);
    }
  }

  TEST_CASE("json round trip") {
    Rng rng(63);
    for (int i = 0; i < 500; ++i) {
      const Answer a = quantize(random_answer(rng));
      CHECK(answer_from_json(to_json(a), a.qtype) == a);
    }
  }

  TEST_CASE("qtype names") {
    CHECK(parse_qtype("Q7") == QType::kQ7);
    CHECK(parse_qtype("3") == QType::kQ3);
    CHECK_THROWS_AS(parse_qtype("Q10"), UnknownNode);
    CHECK_THROWS_AS(parse_qtype("x"), UnknownNode);
  }
}

TEST_SUITE("graph") {
  TEST_CASE("full graph order") {
    const auto order = validate_graph(full_graph());
    CHECK(order == std::vector<QType>(kAllQTypes.begin(), kAllQTypes.end()));
  }

  TEST_CASE("cycle detection") {
    GraphConfig g{"cyc", {QType::kQ8, QType::kQ9}, {{QType::kQ9, QType::kQ8}, {QType::kQ8, QType::kQ9}}};
    CHECK_THROWS_AS(validate_graph(g), CyclicGraph);
    GraphConfig dangling{"d", {QType::kQ1}, {{QType::kQ1, QType::kQ2}}};
    CHECK_THROWS_AS(validate_graph(dangling), UnknownNode);
  }

  TEST_CASE("simplified graphs") {
    const auto pred = simplified_prediction_graph();
    CHECK(validate_graph(pred) ==
          std::vector<QType>{QType::kQ1, QType::kQ2, QType::kQ3, QType::kQ4, QType::kQ5, QType::kQ8, QType::kQ9});
    CHECK(pred.parents(QType::kQ8) == std::vector<QType>{QType::kQ5});
    const auto perc = simplified_perception_graph();
    CHECK(perc.parents(QType::kQ4).empty());
    CHECK_FALSE(perc.has_node(QType::kQ1));
    CHECK(validate_graph(perc).front() == QType::kQ4);
  }

  TEST_CASE("topological order matches a Kahn oracle on random DAGs") {
    Rng rng(64);
    for (int trial = 0; trial < 300; ++trial) {
      GraphConfig g{"rand", {}, {}};
      for (QType q : kAllQTypes) {
        if (rng.bernoulli(0.8)) g.nodes.push_back(q);
      }
      // Edges point from a lower to a higher rank in a random permutation.
      std::vector<QType> perm = g.nodes;
      for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.uniform_int(0, int(i) - 1)]);
      for (std::size_t i = 0; i < perm.size(); ++i) {
        for (std::size_t j = i + 1; j < perm.size(); ++j) {
          if (rng.bernoulli(0.25)) g.edges.emplace_back(perm[i], perm[j]);
        }
      }
      // Kahn's algorithm, picking the smallest ready node each round.
      std::vector<QType> want;
      std::vector<QType> left = g.nodes;
      while (!left.empty()) {
        QType best = QType::kQ9;
        bool found = false;
        for (QType q : left) {
          bool ready = true;
          for (const auto& [p, c] : g.edges) {
            if (c == q && std::find(left.begin(), left.end(), p) != left.end()) ready = false;
          }
          if (ready && (!found || q < best)) {
            best = q;
            found = true;
          }
        }
        REQUIRE(found);
        want.push_back(best);
        left.erase(std::find(left.begin(), left.end(), best));
      }
      CHECK(validate_graph(g) == want);
    }
  }

  TEST_CASE("graph files") {
    CHECK(load_graph("full").name == "full");
    CHECK_THROWS_AS(load_graph("no_such_graph"), UnknownNode);
    const auto j = to_json(simplified_prediction_graph());
    const auto g = graph_from_json(j);
    CHECK(g.nodes == simplified_prediction_graph().nodes);
    CHECK(g.edges == simplified_prediction_graph().edges);
  }

  TEST_CASE("context composition skips empty parents") {
    CHECK(compose_context({"a.", "", "b."}) == "a.\nb.");
    CHECK(compose_context({}).empty());
  }
}
