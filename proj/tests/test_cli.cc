#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include <unistd.h>

#include "coopgot/cli.h"
#include "coopgot/curation.h"
#include "coopgot/engine.h"
#include "doctest.h"

using namespace coopgot;
namespace fs = std::filesystem;

namespace {

struct Run {
  int rc = 0;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.rc = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string field(const std::string& summary, const std::string& key) {
  const auto at = summary.find(" " + key + "=");
  if (at == std::string::npos) return "";
  const auto start = at + key.size() + 2;
  return summary.substr(start, summary.find_first_of(" \n", start) - start);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag)
      : path_(fs::temp_directory_path() / ("coopgot_cli_" + tag + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("seed lists and config hash") {
    CHECK(parse_seed_list("1..3,7") == std::vector<std::uint64_t>{1, 2, 3, 7});
    CHECK(parse_seed_list("5") == std::vector<std::uint64_t>{5});
    CHECK_THROWS(parse_seed_list("3..1"));
    CHECK_THROWS(parse_seed_list("x"));
    const std::string h = config_hash({{"duration", 20}}, {}, {});
    CHECK(h.size() == 16);
    CHECK(h == config_hash({{"duration", 20}}, {}, {}));
    CHECK(h != config_hash({{"duration", 21}}, {}, {}));
  }

  TEST_CASE("gen is repeatable") {
    TempDir d("gen");
    const Run a = cli({"gen", "--seeds", "1..3", "--out", d / "a"});
    const Run b = cli({"gen", "--seeds", "1..3", "--out", d / "b", "--workers", "3"});
    REQUIRE(a.rc == 0);
    REQUIRE(b.rc == 0);
    CHECK(a.out.rfind("OK gen ", 0) == 0);
    CHECK(field(a.out, "scenes") == "3");
    CHECK(field(a.out, "checksum") == field(b.out, "checksum"));
    CHECK(slurp(d / "a/seq_000002.json") == slurp(d / "b/seq_000002.json"));
  }

  TEST_CASE("curate one scene of 34 keyframes") {
    TempDir d("curate");
    REQUIRE(cli({"gen", "--seeds", "4", "--out", d / "sc"}).rc == 0);
    const Run r = cli({"curate", "--scenes", d / "sc", "--out", d / "qa.jsonl"});
    REQUIRE(r.rc == 0);
    CHECK(field(r.out, "keyframes") == "34");
    CHECK(field(r.out, "pairs") == "612");
    const QaFile f = read_qa_file(d / "qa.jsonl");
    CHECK(f.pairs.size() == 612);
    CHECK(f.header.at("tool") == kToolName);
    CHECK(f.header.at("version") == kToolVersion);
    CHECK(f.header.contains("config_hash"));
    CHECK(f.header.contains("seed"));
  }

  TEST_CASE("flag beats config beats default") {
    TempDir d("precedence");
    {
      std::ofstream cfg(d / "run.json");
      cfg << R"({"seeds": "1..2", "seed": 5})";
    }
    const Run from_cfg = cli({"gen", "--config", d / "run.json", "--out", d / "c"});
    REQUIRE(from_cfg.rc == 0);
    CHECK(from_cfg.err.find("# seeds=1..2 (config)") != std::string::npos);
    CHECK(from_cfg.err.find("# seed=5 (config)") != std::string::npos);
    CHECK(field(from_cfg.out, "scenes") == "2");

    const Run from_flag = cli({"gen", "--config", d / "run.json", "--seeds", "3", "--seed", "9", "--out", d / "f"});
    REQUIRE(from_flag.rc == 0);
    CHECK(from_flag.err.find("# seeds=3 (flag)") != std::string::npos);
    CHECK(from_flag.err.find("# seed=9 (flag)") != std::string::npos);
    CHECK(field(from_flag.out, "scenes") == "1");
    CHECK(slurp(d / "f/seq_000003.json").find("\"seed\":9") != std::string::npos);

    const Run plain = cli({"gen", "--seeds", "3", "--out", d / "p"});
    CHECK(plain.err.find("# workers=1 (default)") != std::string::npos);
  }

  TEST_CASE("COOPGOT_SEED sets the default seed") {
    TempDir d("env");
    ::setenv("COOPGOT_SEED", "42", 1);
    const Run r = cli({"gen", "--seeds", "1", "--out", d / "e"});
    ::setenv("COOPGOT_SEED", "x", 1);
    const Run bad = cli({"gen", "--seeds", "1", "--out", d / "x"});
    ::unsetenv("COOPGOT_SEED");
    REQUIRE(r.rc == 0);
    CHECK(r.err.find("# seed=42 (env)") != std::string::npos);
    CHECK(slurp(d / "e/seq_000001.json").find("\"seed\":42") != std::string::npos);
    CHECK(bad.rc == kExitValidation);
  }

  TEST_CASE("pipeline outputs carry provenance and eval checks hashes") {
    TempDir d("pipeline");
    REQUIRE(cli({"gen", "--seeds", "1..2", "--out", d / "sc"}).rc == 0);
    REQUIRE(cli({"curate", "--scenes", d / "sc", "--out", d / "qa.jsonl"}).rc == 0);
    REQUIRE(cli({"infer", "--qa", d / "qa.jsonl", "--scenes", d / "sc", "--out", d / "a.jsonl", "--run-log",
                 d / "log.json"})
                .rc == 0);
    const Run ev = cli({"eval", "--answers", d / "a.jsonl", "--qa", d / "qa.jsonl", "--scenes", d / "sc", "--run-log",
                        d / "log.json", "--out-csv", d / "r.csv", "--out-md", d / "r.md"});
    REQUIRE(ev.rc == 0);
    CHECK(field(ev.out, "q1_f1") == "100.0000");
    CHECK(field(ev.out, "comm_mb") == "0.4068");
    const std::string hash = read_answers_file(d / "a.jsonl").header.at("config_hash");
    CHECK(slurp(d / "r.csv").rfind("# coopgot " + std::string(kToolVersion) + " config_hash=" + hash, 0) == 0);
    CHECK(slurp(d / "r.md").rfind("<!-- coopgot", 0) == 0);
    REQUIRE(cli({"plot", "--uid", read_qa_file(d / "qa.jsonl").pairs[8].uid, "--qa", d / "qa.jsonl", "--scenes",
                 d / "sc", "--answers", d / "a.jsonl", "--out", d / "p.svg"})
                .rc == 0);
    const std::string svg = slurp(d / "p.svg");
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("config_hash=" + hash) != std::string::npos);

    const Run cc = cli({"commcost", "--run-log", d / "log.json"});
    CHECK(cc.rc == 0);
    CHECK(cc.out.find("1.9208") != std::string::npos);

    // A QA file curated under another detector seed has a different hash.
    REQUIRE(cli({"curate", "--scenes", d / "sc", "--out", d / "qa7.jsonl", "--seed", "7"}).rc == 0);
    const Run mismatch = cli({"eval", "--answers", d / "a.jsonl", "--qa", d / "qa7.jsonl", "--scenes", d / "sc"});
    CHECK(mismatch.rc == kExitValidation);
    CHECK(mismatch.err.find("config hash") != std::string::npos);
    const Run forced =
        cli({"eval", "--answers", d / "a.jsonl", "--qa", d / "qa7.jsonl", "--scenes", d / "sc", "--force", "--out-csv",
             d / "f.csv"});
    CHECK(forced.rc == 0);
  }

  TEST_CASE("compare two reports") {
    TempDir d("compare");
    REQUIRE(cli({"gen", "--seeds", "5", "--out", d / "sc"}).rc == 0);
    REQUIRE(cli({"curate", "--scenes", d / "sc", "--out", d / "qa.jsonl"}).rc == 0);
    for (const std::string kind : {"oracle", "heuristic"}) {
      REQUIRE(cli({"infer", "--qa", d / "qa.jsonl", "--scenes", d / "sc", "--answerer", kind, "--out",
                   d / (kind + ".jsonl")})
                  .rc == 0);
      REQUIRE(cli({"eval", "--answers", d / (kind + ".jsonl"), "--qa", d / "qa.jsonl", "--scenes", d / "sc",
                   "--label", kind, "--out-csv", d / (kind + ".csv")})
                  .rc == 0);
    }
    const Run r = cli({"compare", "--a", d / "oracle.csv", "--b", d / "heuristic.csv", "--out-csv", d / "delta.csv"});
    REQUIRE(r.rc == 0);
    CHECK(r.out.find("| QA | Metric | oracle | heuristic | Delta |") != std::string::npos);
    CHECK(std::stoi(field(r.out, "changed")) > 0);
    CHECK(slurp(d / "delta.csv").find("qtype,metric,a,b,delta") != std::string::npos);
  }

  TEST_CASE("exit codes") {
    TempDir d("exit");
    const Run usage = cli({"gen", "--no-such-flag"});
    CHECK(usage.rc == kExitValidation);
    CHECK(usage.err.find("--seeds") != std::string::npos);
    CHECK(cli({"--help"}).rc == kExitOk);
    const Run missing = cli({"eval", "--answers", d / "nope.jsonl", "--qa", d / "nope.jsonl", "--scenes", d / "none"});
    CHECK(missing.rc == kExitIo);
    const Run bad_graph = cli({"curate", "--scenes", d / "none", "--graph", "spiral", "--out", d / "q.jsonl"});
    CHECK(bad_graph.rc != kExitOk);
    {
      std::ofstream cfg(d / "bad.json");
      cfg << R"({"scenario": {"duration": -1}})";
    }
    CHECK(cli({"gen", "--config", d / "bad.json", "--out", d / "b"}).rc == kExitValidation);
    CHECK(cli({"commcost", "--run-log", d / "log.json", "--costs", d / "nope.json"}).rc == kExitIo);
  }
}
