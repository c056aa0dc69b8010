#include "coopgot/engine.h"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <set>
#include <tuple>

#include "coopgot/errors.h"
#include "coopgot/parallel.h"

namespace coopgot {

RunMode parse_run_mode(const std::string& s) {
  if (s == "inference") return RunMode::kInference;
  if (s == "teacher") return RunMode::kTeacher;
  throw InvalidConfig("unknown mode '" + s + "' (inference or teacher)");
}

std::string to_string(RunMode m) { return m == RunMode::kTeacher ? "teacher" : "inference"; }

const NodeResult* SampleResult::node(QType q) const {
  for (const auto& n : nodes) {
    if (n.qtype == q) return &n;
  }
  return nullptr;
}

std::size_t RunLog::node_count() const {
  std::size_t n = 0;
  for (const auto& s : samples) n += s.nodes.size();
  return n;
}

std::size_t RunLog::failure_count() const {
  std::size_t n = 0;
  for (const auto& s : samples) {
    for (const auto& nd : s.nodes) n += nd.failed ? 1 : 0;
  }
  return n;
}

namespace {

nlohmann::json event_json(const FeatureEvent& e) {
  return {{"seq_id", e.seq_id},
          {"keyframe_ms", e.keyframe_ms},
          {"cav_id", e.cav_id},
          {"timestep_ms", e.timestep_ms},
          {"event", e.reuse ? "reuse" : "transfer"}};
}

FeatureEvent event_from(const nlohmann::json& j) {
  return {j.at("seq_id").get<std::string>(), j.at("keyframe_ms").get<std::int64_t>(),
          j.at("cav_id").get<std::string>(), j.at("timestep_ms").get<std::int64_t>(),
          j.at("event").get<std::string>() == "reuse"};
}

}  // namespace

nlohmann::json RunLog::to_json(bool include_timing) const {
  nlohmann::json js = nlohmann::json::array();
  for (const auto& s : samples) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : s.nodes) {
      nlohmann::json unavailable = nlohmann::json::array();
      for (QType q : n.unavailable_parents) unavailable.push_back(qtype_name(q));
      nlohmann::json jn = {{"uid", n.uid},
                           {"qtype", qtype_index(n.qtype)},
                           {"context", n.context},
                           {"answer_text", n.answer_text},
                           {"failed", n.failed},
                           {"error", n.error},
                           {"context_unavailable", unavailable}};
      if (include_timing) jn["wall_ms"] = n.wall_ms;
      nodes.push_back(jn);
    }
    js.push_back({{"seq_id", s.seq_id}, {"t", s.t}, {"ego_cav", s.ego}, {"nodes", nodes}});
  }
  nlohmann::json led = nlohmann::json::array();
  for (const auto& e : ledger) led.push_back(event_json(e));
  return {{"graph", graph},
          {"answerer", answerer},
          {"mode", coopgot::to_string(mode)},
          {"nodes", node_count()},
          {"parse_failures", failure_count()},
          {"samples", js},
          {"ledger", led}};
}

RunLog RunLog::from_json(const nlohmann::json& j) {
  try {
    RunLog log;
    log.graph = j.at("graph").get<std::string>();
    log.answerer = j.at("answerer").get<std::string>();
    log.mode = parse_run_mode(j.at("mode").get<std::string>());
    for (const auto& js : j.at("samples")) {
      SampleResult s;
      s.seq_id = js.at("seq_id").get<std::string>();
      s.t = js.at("t").get<double>();
      s.ego = js.at("ego_cav").get<std::string>();
      for (const auto& jn : js.at("nodes")) {
        NodeResult n;
        n.uid = jn.at("uid").get<std::string>();
        n.qtype = qtype_from_int(jn.at("qtype").get<int>());
        n.context = jn.at("context").get<std::string>();
        n.answer_text = jn.at("answer_text").get<std::string>();
        n.failed = jn.at("failed").get<bool>();
        n.error = jn.value("error", std::string());
        for (const auto& q : jn.value("context_unavailable", nlohmann::json::array())) {
          n.unavailable_parents.push_back(parse_qtype(q.get<std::string>()));
        }
        n.wall_ms = jn.value("wall_ms", 0.0);
        if (!n.failed) {
          try {
            n.parsed = parse_answer(n.answer_text, n.qtype);
          } catch (const ParseError&) {
          }
        }
        s.nodes.push_back(std::move(n));
      }
      log.samples.push_back(std::move(s));
    }
    for (const auto& e : j.at("ledger")) log.ledger.push_back(event_from(e));
    return log;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed run log: ") + e.what());
  }
}

QaIndex index_pairs(const std::vector<QaPair>& pairs) {
  QaIndex idx;
  for (const auto& qa : pairs) idx[qa.uid] = &qa;
  return idx;
}

SampleResult run_sample(const GraphConfig& graph, const Scene& scene, double t, const std::string& ego,
                        Answerer& answerer, RunMode mode, const QaIndex& qa_index) {
  const std::vector<QType> order = validate_graph(graph);
  SampleResult out;
  out.seq_id = scene.seq_id;
  out.t = t;
  out.ego = ego;

  std::vector<const QaPair*> curated;
  for (QType q : order) {
    const std::string uid = make_uid(scene.seq_id, t, ego, q);
    const auto it = qa_index.find(uid);
    if (it == qa_index.end()) throw MissingSample("no curated pair " + uid);
    curated.push_back(it->second);
  }

  std::map<QType, const NodeResult*> done;
  out.nodes.reserve(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const QType q = order[i];
    const QaPair& qa = *curated[i];
    NodeResult node;
    node.uid = qa.uid;
    node.qtype = q;
    if (mode == RunMode::kTeacher) {
      node.context = qa.context;
    } else {
      std::vector<std::string> texts;
      for (QType p : graph.parents(q)) {
        const NodeResult* pr = done.at(p);
        if (pr->failed || !pr->parsed) {
          node.unavailable_parents.push_back(p);
          continue;
        }
        texts.push_back(render_answer(*pr->parsed));
      }
      node.context = compose_context(texts);
    }

    AnswerRequest req;
    req.uid = qa.uid;
    req.qtype = q;
    req.question = qa.question;
    req.context = node.context;
    req.payload = &qa.payload;
    req.scene = &scene;
    req.t = t;
    req.ego = ego;
    req.curated = &qa;

    const auto start = std::chrono::steady_clock::now();
    try {
      node.answer_text = answerer.answer(req);
      node.parsed = parse_answer(node.answer_text, q);
    } catch (const ParseError& e) {
      node.failed = true;
      node.error = std::string("parse: ") + e.what();
    } catch (const ExternalError& e) {
      node.failed = true;
      node.error = std::string("external: ") + e.what();
    }
    node.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

    // Every node reads the shared features of both CAVs for the current and
    // the previous timestep.
    for (const auto& c : scene.cavs) {
      out.accesses.push_back({scene.seq_id, time_ms(t), c.id, time_ms(t), false});
      out.accesses.push_back({scene.seq_id, time_ms(t), c.id, time_ms(t - 0.5), true});
    }
    out.nodes.push_back(std::move(node));
    done[q] = &out.nodes.back();
  }
  return out;
}

std::vector<FeatureEvent> build_ledger(const std::vector<SampleResult>& samples) {
  std::set<FeatureEvent> seen;
  std::set<std::tuple<std::string, std::int64_t, std::string, std::int64_t>> keys;
  std::vector<FeatureEvent> out;
  for (const auto& s : samples) {
    for (const auto& a : s.accesses) seen.insert(a);
  }
  for (const auto& e : seen) {
    // A timestep is either transferred or reused within one keyframe batch.
    if (keys.insert({e.seq_id, e.keyframe_ms, e.cav_id, e.timestep_ms}).second) out.push_back(e);
  }
  return out;
}

RunLog run_dataset(const GraphConfig& graph, const std::vector<QaPair>& pairs, const std::vector<Scene>& scenes,
                   Answerer& answerer, RunMode mode, int workers) {
  validate_graph(graph);
  std::map<std::string, const Scene*> by_seq;
  for (const auto& s : scenes) by_seq[s.seq_id] = &s;

  struct Group {
    std::string seq_id;
    std::int64_t t_ms;
    double t;
    std::string ego;
  };
  std::map<std::tuple<std::string, std::int64_t, std::string>, Group> groups;
  for (const auto& qa : pairs) {
    if (!graph.has_node(qa.qtype)) continue;
    groups.try_emplace({qa.seq_id, time_ms(qa.t), qa.ego_cav}, Group{qa.seq_id, time_ms(qa.t), qa.t, qa.ego_cav});
  }
  std::vector<Group> jobs;
  for (auto& [k, g] : groups) {
    if (!by_seq.count(g.seq_id)) throw IoError("scene not found for sequence " + g.seq_id);
    jobs.push_back(g);
  }

  const QaIndex index = index_pairs(pairs);
  RunLog log;
  log.graph = graph.name;
  log.answerer = answerer.name();
  log.mode = mode;
  log.samples.resize(jobs.size());
  parallel_for(jobs.size(), workers, [&](std::size_t i) {
    const Group& g = jobs[i];
    log.samples[i] = run_sample(graph, *by_seq.at(g.seq_id), g.t, g.ego, answerer, mode, index);
  });
  log.ledger = build_ledger(log.samples);
  return log;
}

std::vector<AnswerRecord> answer_records(const RunLog& log) {
  std::vector<AnswerRecord> out;
  for (const auto& s : log.samples) {
    std::vector<AnswerRecord> rows;
    for (const auto& n : s.nodes) rows.push_back({n.uid, n.qtype, n.answer_text, n.parsed, n.failed});
    std::sort(rows.begin(), rows.end(), [](const AnswerRecord& a, const AnswerRecord& b) { return a.qtype < b.qtype; });
    out.insert(out.end(), rows.begin(), rows.end());
  }
  return out;
}

nlohmann::json to_json(const AnswerRecord& r) {
  return {{"uid", r.uid},
          {"qtype", qtype_index(r.qtype)},
          {"answer_text", r.answer_text},
          {"parsed", r.parsed ? to_json(*r.parsed) : nlohmann::json(nullptr)},
          {"failed", r.failed}};
}

AnswerRecord answer_record_from_json(const nlohmann::json& j) {
  try {
    AnswerRecord r;
    r.uid = j.at("uid").get<std::string>();
    r.qtype = qtype_from_int(j.at("qtype").get<int>());
    r.answer_text = j.at("answer_text").get<std::string>();
    r.failed = j.at("failed").get<bool>();
    if (!j.at("parsed").is_null()) r.parsed = answer_from_json(j.at("parsed"), r.qtype);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed answer record: ") + e.what());
  }
}

void write_answers_file(const std::filesystem::path& path, const nlohmann::json& header,
                        const std::vector<AnswerRecord>& records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << nlohmann::json{{"header", header}}.dump() << '\n';
  for (const auto& r : records) out << to_json(r).dump() << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

AnswersFile read_answers_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  AnswersFile f;
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
    f.records.push_back(answer_record_from_json(j));
  }
  return f;
}

}  // namespace coopgot
