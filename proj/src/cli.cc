#include "coopgot/cli.h"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "coopgot/answerers.h"
#include "coopgot/curation.h"
#include "coopgot/engine.h"
#include "coopgot/errors.h"
#include "coopgot/graph.h"
#include "coopgot/metrics.h"
#include "coopgot/parallel.h"
#include "coopgot/plot.h"
#include "coopgot/rng.h"
#include "coopgot/scenegen.h"

namespace coopgot {

std::string config_hash(const nlohmann::json& scenario, const nlohmann::json& detector,
                        const nlohmann::json& curation) {
  const nlohmann::json doc = {{"scenario", scenario}, {"detector", detector}, {"curation", curation}};
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(doc.dump())));
  return buf;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& list) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(list);
  std::string part;
  auto to_u64 = [&](const std::string& s) {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
      throw InvalidConfig("bad seed list '" + list + "'");
    }
    return static_cast<std::uint64_t>(std::stoull(s));
  };
  while (std::getline(ss, part, ',')) {
    const auto dots = part.find("..");
    if (dots == std::string::npos) {
      out.push_back(to_u64(part));
      continue;
    }
    const auto lo = to_u64(part.substr(0, dots));
    const auto hi = to_u64(part.substr(dots + 2));
    if (hi < lo) throw InvalidConfig("empty seed range '" + part + "'");
    if (hi - lo > 1000000) throw InvalidConfig("seed range too large '" + part + "'");
    for (auto s = lo; s <= hi; ++s) out.push_back(s);
  }
  if (out.empty()) throw InvalidConfig("empty seed list");
  return out;
}

namespace {

std::string fmt4(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("invalid JSON in " + path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("write failed: " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Resolved settings with their provenance, echoed at startup.
class Settings {
 public:
  Settings(const nlohmann::json& doc, std::ostream& err) : doc_(doc), err_(err) {}

  template <typename T>
  T get(const std::string& key, const CLI::App* app, const std::string& flag, const T& flag_value, const T& def) {
    if (app && app->count(flag) > 0) return note(key, flag_value, "flag");
    const nlohmann::json* node = lookup(key);
    if (node) {
      try {
        return note(key, node->get<T>(), "config");
      } catch (const nlohmann::json::exception& e) {
        throw InvalidConfig("config key '" + key + "': " + e.what());
      }
    }
    return note(key, def, "default");
  }

  std::uint64_t seed(const CLI::App* app, std::uint64_t flag_value) {
    if (app->count("--seed") > 0) return note<std::uint64_t>("seed", flag_value, "flag");
    if (const nlohmann::json* node = lookup("seed")) return note("seed", node->get<std::uint64_t>(), "config");
    if (const char* env = std::getenv("COOPGOT_SEED")) {
      const std::string s(env);
      if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
        throw InvalidConfig("COOPGOT_SEED must be a non-negative integer");
      }
      return note<std::uint64_t>("seed", std::stoull(s), "env");
    }
    return note<std::uint64_t>("seed", 0, "default");
  }

  const nlohmann::json& doc() const { return doc_; }

 private:
  const nlohmann::json* lookup(const std::string& key) const {
    const nlohmann::json* node = &doc_;
    std::stringstream ss(key);
    std::string part;
    while (std::getline(ss, part, '.')) {
      if (!node->is_object() || !node->contains(part)) return nullptr;
      node = &node->at(part);
    }
    return node;
  }

  template <typename T>
  T note(const std::string& key, const T& v, const char* source) {
    std::ostringstream os;
    if constexpr (std::is_same_v<T, bool>) {
      os << (v ? "true" : "false");
    } else {
      os << v;
    }
    err_ << "# " << key << "=" << os.str() << " (" << source << ")\n";
    return v;
  }

  nlohmann::json doc_;
  std::ostream& err_;
};

struct Configs {
  ScenarioConfig scenario;
  DetectorConfig detector;
  CurationConfig curation;
  CostConfig costs;
  std::string hash;
};

Configs load_configs(const nlohmann::json& doc, std::uint64_t seed) {
  Configs c;
  if (doc.contains("scenario")) c.scenario = scenario_config_from_json(doc.at("scenario"));
  nlohmann::json det = doc.value("detector", nlohmann::json::object());
  if (!det.contains("seed")) det["seed"] = seed;
  c.detector = detector_config_from_json(det);
  if (doc.contains("curation")) c.curation = curation_config_from_json(doc.at("curation"));
  if (doc.contains("costs")) c.costs = cost_config_from_json(doc.at("costs"));
  c.scenario.validate();
  c.detector.validate();
  c.curation.validate();
  c.hash = config_hash(to_json(c.scenario), to_json(c.detector), to_json(c.curation));
  return c;
}

nlohmann::json base_header(const std::string& stage, const Configs& c, std::uint64_t seed) {
  return {{"tool", kToolName}, {"version", kToolVersion}, {"stage", stage}, {"config_hash", c.hash}, {"seed", seed}};
}

struct LoadedScenes {
  std::vector<Scene> scenes;
  std::map<std::string, std::string> hashes;  // seq_id -> config hash
};

LoadedScenes load_scenes(const std::string& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("scene directory not found: " + dir);
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  LoadedScenes out;
  for (const auto& f : files) {
    const nlohmann::json doc = read_json_file(f.string());
    Scene s = scene_from_json(doc);
    if (doc.contains("header")) out.hashes[s.seq_id] = doc.at("header").value("config_hash", std::string());
    out.scenes.push_back(std::move(s));
  }
  return out;
}

// One-line provenance stamp for text outputs that are not JSON.
std::string stamp(const char* open, const char* close, const std::string& hash, std::uint64_t seed) {
  return std::string(open) + " " + kToolName + " " + kToolVersion + " config_hash=" + hash +
         " seed=" + std::to_string(seed) + close + "\n";
}

std::string summary_line(const std::string& cmd, const std::vector<std::pair<std::string, std::string>>& kv) {
  std::string s = "OK " + cmd;
  for (const auto& [k, v] : kv) s += " " + k + "=" + v;
  return s;
}

std::shared_ptr<Answerer> make_answerer(const std::string& kind, Settings& st, const CLI::App* app,
                                        const Configs& c, std::uint64_t seed, const std::map<std::string, std::string>& s_flags,
                                        const std::map<std::string, double>& d_flags,
                                        const std::map<std::string, int>& i_flags) {
  if (kind == "oracle") return std::make_shared<OracleAnswerer>();
  if (kind == "heuristic") return std::make_shared<HeuristicAnswerer>(c.curation, c.detector);
  if (kind == "noisy") {
    const std::string inner = st.get<std::string>("answerer.inner", app, "--inner", s_flags.at("inner"), "oracle");
    if (inner == "noisy") throw InvalidConfig("noisy answerer cannot wrap itself");
    auto in = make_answerer(inner, st, app, c, seed, s_flags, d_flags, i_flags);
    const double sigma = st.get<double>("answerer.sigma_pos", app, "--sigma-pos", d_flags.at("sigma"), 0.0);
    const double flip = st.get<double>("answerer.flip_prob", app, "--flip-prob", d_flags.at("flip"), 0.0);
    const auto nseed = st.get<std::uint64_t>("answerer.seed", app, "--noise-seed",
                                             static_cast<std::uint64_t>(i_flags.at("noise_seed")), seed);
    return std::make_shared<NoisyAnswerer>(in, sigma, flip, nseed);
  }
  if (kind == "external") {
    const std::string ep = st.get<std::string>("answerer.endpoint", app, "--endpoint", s_flags.at("endpoint"), "");
    if (ep.empty()) throw InvalidConfig("external answerer needs --endpoint");
    const double timeout = st.get<double>("answerer.timeout", app, "--timeout", d_flags.at("timeout"), 30.0);
    const int inflight = st.get<int>("answerer.max_inflight", app, "--max-inflight", i_flags.at("max_inflight"), 4);
    return std::make_shared<ExternalAnswerer>(ep, timeout, inflight);
  }
  throw InvalidConfig("unknown answerer '" + kind + "' (oracle, heuristic, noisy, external)");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cooperative-driving graph-of-thoughts QA pipeline", kToolName};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  std::string config_path;
  std::uint64_t seed_flag = 0;
  int workers_flag = 1;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run config");
    sub->add_option("--seed", seed_flag, "Run seed (default: COOPGOT_SEED or 0)");
  };
  auto with_workers = [&](CLI::App* sub) { sub->add_option("--workers", workers_flag, "Worker threads")->check(CLI::Range(1, 256)); };

  // gen
  auto* gen = app.add_subcommand("gen", "Generate scenes");
  std::string seeds_flag, scenes_flag, out_flag;
  common(gen);
  with_workers(gen);
  gen->add_option("--seeds", seeds_flag, "Seed list, e.g. 1..20 or 1,5,9");
  gen->add_option("--out", out_flag, "Output scene directory");

  // curate
  auto* cur = app.add_subcommand("curate", "Curate QA pairs from scenes");
  std::string graph_flag, split_flag, dump_flag;
  common(cur);
  with_workers(cur);
  cur->add_option("--scenes", scenes_flag, "Scene directory");
  cur->add_option("--out", out_flag, "QA JSONL output");
  cur->add_option("--graph", graph_flag, "full, simplified_perception, simplified_prediction or a JSON file");
  cur->add_option("--split", split_flag, "all, train (even seeds) or test (odd seeds)");
  cur->add_option("--dump-detections", dump_flag, "Write every DetectionSet used to this JSONL file");

  // infer
  auto* inf = app.add_subcommand("infer", "Run a graph over curated QA pairs");
  std::string qa_flag, answerer_flag, mode_flag, runlog_flag, inner_flag, endpoint_flag;
  double sigma_flag = 0.0, flip_flag = 0.0, timeout_flag = 30.0;
  int noise_seed_flag = 0, inflight_flag = 4;
  bool timing_flag = false;
  common(inf);
  with_workers(inf);
  inf->add_option("--qa", qa_flag, "QA JSONL");
  inf->add_option("--scenes", scenes_flag, "Scene directory");
  inf->add_option("--graph", graph_flag, "Graph name or file");
  inf->add_option("--answerer", answerer_flag, "oracle, heuristic, noisy or external");
  inf->add_option("--mode", mode_flag, "inference or teacher");
  inf->add_option("--out", out_flag, "Answers JSONL output");
  inf->add_option("--run-log", runlog_flag, "Run log JSON output");
  inf->add_option("--inner", inner_flag, "Inner answerer for noisy");
  inf->add_option("--sigma-pos", sigma_flag, "Position noise (m) for noisy");
  inf->add_option("--flip-prob", flip_flag, "Class flip probability for noisy");
  inf->add_option("--noise-seed", noise_seed_flag, "Seed for noisy");
  inf->add_option("--endpoint", endpoint_flag, "External answerer URL");
  inf->add_option("--timeout", timeout_flag, "External timeout (s)");
  inf->add_option("--max-inflight", inflight_flag, "External concurrent request cap");
  inf->add_flag("--timing", timing_flag, "Record wall-clock per node in the run log");

  // eval
  auto* ev = app.add_subcommand("eval", "Score answers against curated ground truth");
  std::string answers_flag, csv_flag, md_flag, label_flag, method_flag;
  double match_flag = 2.0;
  bool force_flag = false;
  common(ev);
  ev->add_option("--answers", answers_flag, "Answers JSONL");
  ev->add_option("--qa", qa_flag, "QA JSONL");
  ev->add_option("--scenes", scenes_flag, "Scene directory");
  ev->add_option("--run-log", runlog_flag, "Run log for the communication column");
  ev->add_option("--method", method_flag, "Fusion method for the communication column");
  ev->add_option("--out-csv", csv_flag, "Report CSV");
  ev->add_option("--out-md", md_flag, "Report Markdown");
  ev->add_option("--label", label_flag, "Row label");
  ev->add_option("--match-radius", match_flag, "Matching radius (m)");
  ev->add_flag("--force", force_flag, "Ignore config hash mismatches");

  // commcost
  auto* cc = app.add_subcommand("commcost", "Communication cost per fusion method");
  std::string costs_flag;
  common(cc);
  cc->add_option("--run-log", runlog_flag, "Run log JSON")->required();
  cc->add_option("--costs", costs_flag, "CostConfig JSON");
  cc->add_option("--out-csv", csv_flag, "CSV output");

  // compare
  auto* cmp = app.add_subcommand("compare", "Per-cell deltas between two report CSVs");
  std::string a_flag, b_flag;
  cmp->add_option("--a", a_flag, "Baseline report CSV")->required();
  cmp->add_option("--b", b_flag, "Candidate report CSV")->required();
  cmp->add_option("--out-csv", csv_flag, "Delta CSV");
  cmp->add_option("--out-md", md_flag, "Delta Markdown");

  // plot
  auto* pl = app.add_subcommand("plot", "SVG of one sample");
  std::string uid_flag;
  common(pl);
  pl->add_option("--uid", uid_flag, "Sample uid")->required();
  pl->add_option("--qa", qa_flag, "QA JSONL");
  pl->add_option("--scenes", scenes_flag, "Scene directory");
  pl->add_option("--answers", answers_flag, "Answers JSONL (optional)");
  pl->add_option("--out", out_flag, "SVG output");

  // serve-stub
  auto* stub = app.add_subcommand("serve-stub", "Reference answer server for integration tests");
  std::string stub_mode_flag = "oracle", host_flag = "127.0.0.1";
  int port_flag = 8080;
  stub->add_option("--mode", stub_mode_flag, "oracle, echo, malformed or garbage");
  stub->add_option("--qa", qa_flag, "QA JSONL (oracle mode)");
  stub->add_option("--host", host_flag, "Bind address");
  stub->add_option("--port", port_flag, "Port");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kExitOk;
    }
    const CLI::App* target = &app;
    for (const auto* sub : app.get_subcommands()) target = sub;
    err << "error: " << e.what() << "\n\n" << target->help();
    return kExitValidation;
  }

  try {
    nlohmann::json doc = nlohmann::json::object();
    if (!config_path.empty()) {
      doc = read_json_file(config_path);
      if (!doc.is_object()) throw InvalidConfig("config must be a JSON object");
    }
    Settings st(doc, err);

    if (*gen) {
      const std::uint64_t seed = st.seed(gen, seed_flag);
      const Configs c = load_configs(doc, seed);
      const int workers = st.get<int>("workers", gen, "--workers", workers_flag, 1);
      const std::string dir = st.get<std::string>("paths.scenes", gen, "--out", out_flag, "scenes");
      const std::string seed_list = st.get<std::string>("seeds", gen, "--seeds", seeds_flag, std::to_string(seed));
      const auto seeds = parse_seed_list(seed_list);
      std::vector<Scene> scenes(seeds.size());
      parallel_for(seeds.size(), workers, [&](std::size_t i) { scenes[i] = generate_scene(c.scenario, seeds[i], c.detector); });
      std::filesystem::create_directories(dir);
      std::uint64_t checksum = fnv1a64("");
      for (const auto& s : scenes) {
        nlohmann::json h = base_header("gen", c, seed);
        h["scene_seed"] = s.seed;
        const auto path = std::filesystem::path(dir) / (s.seq_id + ".json");
        write_scene_file(s, path, h);
        checksum = fnv1a64(read_text(path.string()), checksum);
      }
      char hex[20];
      std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(checksum));
      out << summary_line("gen", {{"scenes", std::to_string(scenes.size())}, {"out", dir}, {"config_hash", c.hash},
                                  {"checksum", hex}})
          << "\n";
      return kExitOk;
    }

    if (*cur) {
      const std::uint64_t seed = st.seed(cur, seed_flag);
      const Configs c = load_configs(doc, seed);
      const int workers = st.get<int>("workers", cur, "--workers", workers_flag, 1);
      const std::string dir = st.get<std::string>("paths.scenes", cur, "--scenes", scenes_flag, "scenes");
      const std::string qa_out = st.get<std::string>("paths.qa", cur, "--out", out_flag, "qa.jsonl");
      const std::string gname = st.get<std::string>("graph", cur, "--graph", graph_flag, "full");
      const std::string split_name = st.get<std::string>("split", cur, "--split", split_flag, "all");
      const Split split = parse_split(split_name);
      const GraphConfig g = load_graph(gname);
      LoadedScenes loaded = load_scenes(dir);
      std::vector<Scene> scenes;
      std::size_t keyframes = 0;
      for (auto& s : loaded.scenes) {
        if (!scene_in_split(s, split)) continue;
        const auto report = validate_scene(s);
        if (!report.ok()) {
          throw InvalidConfig("scene " + s.seq_id + " is invalid: " + report.violations.front().code + " " +
                              report.violations.front().detail);
        }
        keyframes += eligible_keyframes(s).size();
        scenes.push_back(std::move(s));
      }
      nlohmann::json h = base_header("curate", c, seed);
      h["graph"] = g.name;
      h["split"] = split_name;
      h["scenes"] = scenes.size();
      const std::size_t n = curate_dataset(scenes, c.curation, c.detector, g, qa_out, h, workers);
      if (!dump_flag.empty()) {
        std::string lines;
        for (const auto& s : scenes) {
          for (double t : eligible_keyframes(s)) {
            for (const auto& cav : s.cavs) {
              for (double tt : {t - c.curation.waypoint_dt, t}) {
                lines += to_json(detect(s, tt, cav.id, c.detector)).dump() + "\n";
              }
            }
          }
        }
        write_text(dump_flag, lines);
      }
      out << summary_line("curate", {{"pairs", std::to_string(n)},
                                     {"keyframes", std::to_string(keyframes)},
                                     {"scenes", std::to_string(scenes.size())},
                                     {"graph", g.name},
                                     {"split", split_name},
                                     {"out", qa_out}})
          << "\n";
      return kExitOk;
    }

    if (*inf) {
      const std::uint64_t seed = st.seed(inf, seed_flag);
      const Configs c = load_configs(doc, seed);
      const int workers = st.get<int>("workers", inf, "--workers", workers_flag, 1);
      const std::string qa_path = st.get<std::string>("paths.qa", inf, "--qa", qa_flag, "qa.jsonl");
      const std::string dir = st.get<std::string>("paths.scenes", inf, "--scenes", scenes_flag, "scenes");
      const std::string ans_path = st.get<std::string>("paths.answers", inf, "--out", out_flag, "answers.jsonl");
      const std::string log_path = st.get<std::string>("paths.run_log", inf, "--run-log", runlog_flag, "");
      const std::string gname = st.get<std::string>("graph", inf, "--graph", graph_flag, "full");
      const std::string kind = st.get<std::string>("answerer.kind", inf, "--answerer", answerer_flag, "oracle");
      const RunMode mode = parse_run_mode(st.get<std::string>("mode", inf, "--mode", mode_flag, "inference"));
      const GraphConfig g = load_graph(gname);
      auto answerer = make_answerer(kind, st, inf, c, seed,
                                    {{"inner", inner_flag}, {"endpoint", endpoint_flag}},
                                    {{"sigma", sigma_flag}, {"flip", flip_flag}, {"timeout", timeout_flag}},
                                    {{"noise_seed", noise_seed_flag}, {"max_inflight", inflight_flag}});
      const QaFile qa = read_qa_file(qa_path);
      const LoadedScenes loaded = load_scenes(dir);
      const RunLog log = run_dataset(g, qa.pairs, loaded.scenes, *answerer, mode, workers);
      nlohmann::json h = base_header("infer", c, seed);
      h["config_hash"] = qa.header.value("config_hash", c.hash);
      h["graph"] = g.name;
      h["answerer"] = answerer->name();
      h["mode"] = to_string(mode);
      write_answers_file(ans_path, h, answer_records(log));
      if (!log_path.empty()) {
        nlohmann::json j = log.to_json(timing_flag);
        j["header"] = h;
        write_text(log_path, j.dump(1) + "\n");
      }
      out << summary_line("infer", {{"samples", std::to_string(log.samples.size())},
                                    {"nodes", std::to_string(log.node_count())},
                                    {"failures", std::to_string(log.failure_count())},
                                    {"answerer", answerer->name()},
                                    {"mode", to_string(mode)},
                                    {"graph", g.name},
                                    {"out", ans_path}})
          << "\n";
      return kExitOk;
    }

    if (*ev) {
      const std::uint64_t seed = st.seed(ev, seed_flag);
      const Configs c = load_configs(doc, seed);
      const std::string ans_path = st.get<std::string>("paths.answers", ev, "--answers", answers_flag, "answers.jsonl");
      const std::string qa_path = st.get<std::string>("paths.qa", ev, "--qa", qa_flag, "qa.jsonl");
      const std::string dir = st.get<std::string>("paths.scenes", ev, "--scenes", scenes_flag, "scenes");
      const std::string csv = st.get<std::string>("paths.report_csv", ev, "--out-csv", csv_flag, "report.csv");
      const std::string md = st.get<std::string>("paths.report_md", ev, "--out-md", md_flag, "");
      const std::string log_path = st.get<std::string>("paths.run_log", ev, "--run-log", runlog_flag, "");
      const std::string method = st.get<std::string>("method", ev, "--method", method_flag, "llm");
      EvalConfig ecfg;
      ecfg.match_radius = st.get<double>("match_radius", ev, "--match-radius", match_flag, c.curation.match_radius);
      ecfg.waypoint_dt = c.curation.waypoint_dt;

      const AnswersFile answers = read_answers_file(ans_path);
      const QaFile qa = read_qa_file(qa_path);
      const LoadedScenes loaded = load_scenes(dir);
      const std::string label = st.get<std::string>("label", ev, "--label", label_flag,
                                                    answers.header.value("answerer", std::string("run")) + "/" +
                                                        qa.header.value("graph", std::string("graph")));
      if (!force_flag) {
        const std::string qh = qa.header.value("config_hash", std::string());
        const std::string ah = answers.header.value("config_hash", std::string());
        if (qh != ah) throw ConfigMismatch("config hash of answers (" + ah + ") differs from QA file (" + qh + ")");
        std::set<std::string> seqs;
        for (const auto& p : qa.pairs) seqs.insert(p.seq_id);
        for (const auto& s : seqs) {
          const auto it = loaded.hashes.find(s);
          if (it != loaded.hashes.end() && it->second != qh) {
            throw ConfigMismatch("config hash of scene " + s + " (" + it->second + ") differs from QA file (" + qh + ")");
          }
        }
      }
      MetricsReport r = aggregate_report(answers.records, qa.pairs, loaded.scenes, ecfg, label);
      if (!log_path.empty()) {
        const RunLog log = RunLog::from_json(read_json_file(log_path));
        r.cells["all"]["comm_mb"] = comm_cost(log, parse_fusion_method(method), c.costs);
      }
      const std::string qh = qa.header.value("config_hash", c.hash);
      write_text(csv, stamp("#", "", qh, seed) + r.to_csv());
      if (!md.empty()) write_text(md, stamp("<!--", " -->", qh, seed) + r.to_markdown());
      std::vector<std::pair<std::string, std::string>> kv{{"label", label}};
      auto add = [&](const char* q, const char* m, const char* key) {
        if (auto v = r.get(q, m)) kv.push_back({key, fmt4(*v)});
      };
      add("Q1", "f1", "q1_f1");
      add("Q2", "f1", "q2_f1");
      add("Q3", "f1", "q3_f1");
      add("Q4", "f1", "q4_f1");
      add("Q5", "l2", "q5_l2");
      add("Q6", "accuracy", "q6_acc");
      add("Q7", "l2", "q7_l2");
      add("Q8", "l1", "q8_l1");
      add("Q9", "l2_avg", "q9_l2");
      add("Q9", "cr_avg", "q9_cr");
      add("all", "comm_mb", "comm_mb");
      kv.push_back({"out", csv});
      out << summary_line("eval", kv) << "\n";
      return kExitOk;
    }

    if (*cc) {
      const std::uint64_t seed = st.seed(cc, seed_flag);
      Configs c = load_configs(doc, seed);
      if (!costs_flag.empty()) c.costs = cost_config_from_json(read_json_file(costs_flag));
      const nlohmann::json log_doc = read_json_file(runlog_flag);
      const nlohmann::json log_header = log_doc.value("header", nlohmann::json::object());
      const RunLog log = RunLog::from_json(log_doc);
      std::size_t transfers = 0, reuses = 0;
      for (const auto& e : log.ledger) (e.reuse ? reuses : transfers)++;
      std::string table = "| Method | Comm (MB) |\n|---|---|\n";
      std::string csv = "method,comm_mb\n";
      std::vector<std::pair<std::string, std::string>> kv;
      for (auto m : {FusionMethod::kNoFusion, FusionMethod::kEarly, FusionMethod::kIntermediate, FusionMethod::kLlm}) {
        const double v = comm_cost(log, m, c.costs);
        table += "| " + to_string(m) + " | " + fmt4(v) + " |\n";
        csv += to_string(m) + "," + fmt4(v) + "\n";
        kv.push_back({to_string(m), fmt4(v)});
      }
      const std::string lh = log_header.value("config_hash", c.hash);
      if (!csv_flag.empty()) write_text(csv_flag, stamp("#", "", lh, seed) + csv);
      kv.push_back({"transfers", std::to_string(transfers)});
      kv.push_back({"reuses", std::to_string(reuses)});
      out << table << summary_line("commcost", kv) << "\n";
      return kExitOk;
    }

    if (*cmp) {
      const std::string a_text = read_text(a_flag);
      const auto ra = reports_from_csv(a_text);
      const auto rb = reports_from_csv(read_text(b_flag));
      if (ra.size() != 1 || rb.size() != 1) throw InvalidConfig("compare expects one report per CSV");
      const auto deltas = compare_reports(ra.front(), rb.front());
      std::size_t changed = 0;
      for (const auto& d : deltas) {
        if (!d.a || !d.b || *d.a != *d.b) ++changed;
      }
      const std::string md = deltas_to_markdown(deltas, ra.front().label, rb.front().label);
      const std::string a_stamp = a_text.rfind('#', 0) == 0 ? a_text.substr(0, a_text.find('\n') + 1) : "";
      if (!csv_flag.empty()) write_text(csv_flag, a_stamp + deltas_to_csv(deltas));
      if (!md_flag.empty()) write_text(md_flag, md);
      out << md << summary_line("compare", {{"cells", std::to_string(deltas.size())}, {"changed", std::to_string(changed)}})
          << "\n";
      return kExitOk;
    }

    if (*pl) {
      const std::uint64_t seed = st.seed(pl, seed_flag);
      const std::string qa_path = st.get<std::string>("paths.qa", pl, "--qa", qa_flag, "qa.jsonl");
      const std::string dir = st.get<std::string>("paths.scenes", pl, "--scenes", scenes_flag, "scenes");
      const std::string svg_path = st.get<std::string>("paths.plot", pl, "--out", out_flag, uid_flag + ".svg");
      const QaFile qa = read_qa_file(qa_path);
      const auto it = std::find_if(qa.pairs.begin(), qa.pairs.end(), [&](const QaPair& p) { return p.uid == uid_flag; });
      if (it == qa.pairs.end()) throw MissingSample("uid not in QA file: " + uid_flag);
      const LoadedScenes loaded = load_scenes(dir);
      const auto sit = std::find_if(loaded.scenes.begin(), loaded.scenes.end(),
                                    [&](const Scene& s) { return s.seq_id == it->seq_id; });
      if (sit == loaded.scenes.end()) throw IoError("scene not found for " + it->seq_id);
      std::optional<Answer> model;
      if (!answers_flag.empty()) {
        for (const auto& r : read_answers_file(answers_flag).records) {
          if (r.uid == uid_flag) model = r.parsed;
        }
      }
      const std::string svg = render_sample_svg(*sit, *it, model);
      const auto nl = svg.find('\n');
      write_text(svg_path, svg.substr(0, nl + 1) +
                               stamp("<!--", " -->", qa.header.value("config_hash", std::string()), seed) +
                               svg.substr(nl + 1));
      out << summary_line("plot", {{"uid", uid_flag}, {"out", svg_path}}) << "\n";
      return kExitOk;
    }

    if (*stub) {
      const StubMode mode = parse_stub_mode(stub_mode_flag);
      std::vector<QaPair> pairs;
      if (mode == StubMode::kOracle) {
        if (qa_flag.empty()) throw InvalidConfig("oracle stub needs --qa");
        pairs = read_qa_file(qa_flag).pairs;
      }
      StubServer server(mode, std::move(pairs));
      out << summary_line("serve-stub", {{"host", host_flag}, {"port", std::to_string(port_flag)}, {"mode", stub_mode_flag}})
          << std::endl;
      server.listen_blocking(host_flag, port_flag);
      return kExitOk;
    }
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}

}  // namespace coopgot
