#include <sys/wait.h>

#include <sstream>

#include "doctest.h"
#include "lpsl/cli.hpp"
#include "test_util.hpp"

using nlohmann::json;
using testutil::TempDir;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "lpsl");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = lpsl::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

struct Toy {
  TempDir dir;
  std::string graph, features, labels;
  Toy() {
    testutil::write_toy_dataset(dir.path(), 150, 3, 7);
    graph = (dir / "toy.edges").string();
    features = (dir / "toy.features.csv").string();
    labels = (dir / "toy.labels").string();
    testutil::write_text(dir / "train.txt", "# labeled nodes\n0 extra\n1\n2\n30\n31\n32\n");
  }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

json read_json(const std::string& path) { return json::parse(testutil::read_text(path)); }

}  // namespace

TEST_CASE("usage exit codes") {
  CHECK(run({}).code == 1);
  CHECK(run({"--help"}).code == 0);
  CHECK(run({"learn", "--help"}).code == 0);
  CHECK(run({"frobnicate"}).code == 1);
  CHECK(run({"lps", "--bogus"}).code == 1);
  const auto r = run({"learn", "--lambda", "abc", "--graph", "g", "--out", "o"});
  CHECK(r.code == 1);
  CHECK(r.err.find("abc") != std::string::npos);
  CHECK(run({"lps", "--graph", "/nonexistent/graph", "--out", "x", "--train-labels", "y"}).code == 1);
}

TEST_CASE("conflicting options") {
  Toy t;
  CHECK(run({"lps", "--graph", t.graph, "--split", "s.json", "--seed", "3", "--out", t.path("o.json")}).code == 1);
  CHECK(run({"lps", "--graph", t.graph, "--split", "s.json", "--train-labels", "x", "--out", "o"}).code == 1);
  const auto r = run({"propagate", "--graph", t.graph, "--labels", t.labels, "--structure", "b.coo", "--operator",
                      "ppr", "--out", t.path("p.json")});
  CHECK(r.code == 1);
  CHECK(r.err.find("--structure") != std::string::npos);
  CHECK(run({"lps", "--graph", t.graph, "--train-labels", t.path("train.txt")}).code == 1);  // no --out
}

TEST_CASE("lps from a labeled-node file and config precedence") {
  Toy t;
  const auto base = std::vector<std::string>{"lps", "--graph", t.graph, "--train-labels", t.path("train.txt"), "--out",
                                             t.path("lps.json")};
  REQUIRE(run(base).code == 0);
  auto doc = read_json(t.path("lps.json"));
  CHECK(doc["alpha"] == 0.1);
  CHECK(doc["scores"].size() == 150);
  CHECK(doc["config"]["lps"]["alpha"] == 0.1);

  testutil::write_text(t.dir / "cfg.json", R"({"lps": {"alpha": 0.5}})");
  auto with_cfg = base;
  with_cfg.insert(with_cfg.end(), {"--config", t.path("cfg.json")});
  REQUIRE(run(with_cfg).code == 0);
  CHECK(read_json(t.path("lps.json"))["alpha"] == 0.5);

  with_cfg.insert(with_cfg.end(), {"--alpha", "0.2"});
  REQUIRE(run(with_cfg).code == 0);
  CHECK(read_json(t.path("lps.json"))["alpha"] == 0.2);

  testutil::write_text(t.dir / "bad.json", R"({"lps": {"alpah": 0.5}})");
  auto bad = base;
  bad.insert(bad.end(), {"--config", t.path("bad.json")});
  CHECK(run(bad).code == 1);

  testutil::write_text(t.dir / "badnode.txt", "0\n999\n");
  CHECK(run({"lps", "--graph", t.graph, "--train-labels", t.path("badnode.txt"), "--out", t.path("x.json")}).code ==
        1);
}

TEST_CASE("learn writes a reproducible structure file") {
  Toy t;
  const std::vector<std::string> args{"learn",        "--graph",     t.graph, "--train-labels", t.path("train.txt"),
                                      "--mode",       "sparse",      "--lambda", "10",          "--c",
                                      "1.0",          "--beta",      "1e-5",  "--block-size",   "64",
                                      "--max-outer",  "30",          "--max-density", "1",     "--out",
                                      t.path("B.coo")};
  const auto r = run(args);
  REQUIRE(r.code == 0);
  const std::string first = testutil::read_text(t.path("B.coo"));
  CHECK(first.rfind("#lpsl n=150 nnz=", 0) == 0);
  CHECK(first.find(" lambda=10 c=1 beta=1.0000000000000001e-05\n") != std::string::npos);
  CHECK(first.find("\n#run {") != std::string::npos);
  REQUIRE(run(args).code == 0);
  CHECK(testutil::read_text(t.path("B.coo")) == first);

  auto dense = args;
  dense[6] = "dense";
  dense.back() = t.path("B.txt");
  REQUIRE(run(dense).code == 0);
  CHECK(testutil::read_text(t.path("B.txt")).find(" nnz=") == std::string::npos);
}

TEST_CASE("numerical failure exits with 2") {
  Toy t;
  const auto r = run({"learn", "--graph", t.graph, "--train-labels", t.path("train.txt"), "--gamma", "5",
                      "--max-density", "1", "--out", t.path("B.coo")});
  CHECK(r.code == 2);
  const auto g = run({"learn", "--graph", t.graph, "--train-labels", t.path("train.txt"), "--mode", "sparse",
                      "--beta", "0", "--max-density", "0.01", "--out", t.path("B.coo")});
  CHECK(g.code == 2);
}

TEST_CASE("split, groups, propagate, train and report compose") {
  Toy t;
  const std::vector<std::string> data{"--graph", t.graph, "--features", t.features, "--labels", t.labels};
  auto with = [&](std::vector<std::string> head, std::vector<std::string> tail) {
    head.insert(head.end(), tail.begin(), tail.end());
    return head;
  };
  REQUIRE(run(with({"split", "--per-class", "5", "--val", "30", "--test", "60", "--seed", "2", "--out",
                    t.path("s.json")},
                   data))
              .code == 0);
  const auto split = read_json(t.path("s.json"));
  CHECK(split["train"].size() == 15);
  CHECK(split["seed"] == 2);

  REQUIRE(run({"groups", "--graph", t.graph, "--split", t.path("s.json"), "--min-group-size", "3", "--out",
               t.path("g.json")})
              .code == 0);
  CHECK(read_json(t.path("g.json"))["groups"].size() == 60);
  REQUIRE(run({"groups", "--graph", t.graph, "--split", t.path("s.json"), "--metric", "degree", "--drop-above",
               "--min-group-size", "1", "--out", t.path("gd.json")})
              .code == 0);

  REQUIRE(run({"learn", "--graph", t.graph, "--split", t.path("s.json"), "--lambda", "4", "--max-outer", "40",
               "--max-density", "1", "--out", t.path("B.coo")})
              .code == 0);
  REQUIRE(run({"propagate", "--graph", t.graph, "--labels", t.labels, "--split", t.path("s.json"), "--structure",
               t.path("B.coo"), "--out", t.path("p.json"), "--csv", t.path("p.csv")})
              .code == 0);
  CHECK(read_json(t.path("p.json"))["labels"].size() == 150);
  CHECK(std::filesystem::exists(t.path("p.csv")));

  const auto tr = run(with({"train", "--arch", "appnp", "--operator", "ppr", "--split", t.path("s.json"), "--epochs",
                            "30", "--hidden", "8", "--out", t.path("t.json"), "--checkpoint", t.path("h.bin")},
                           data));
  REQUIRE(tr.code == 0);
  CHECK(tr.out.find("test accuracy") != std::string::npos);
  CHECK(std::filesystem::exists(t.path("h.bin")));
  CHECK(run(with({"train", "--arch", "lp", "--split", t.path("s.json"), "--out", t.path("t.json")}, data)).code ==
        1);

  const auto rep = run({"report", "--labels", t.labels, "--pred", t.path("p.json"), "--groups", t.path("g.json"),
                        "--out", t.path("r.json"), "--csv", t.path("r.csv")});
  REQUIRE(rep.code == 0);
  const auto report = read_json(t.path("r.json"));
  CHECK(report["metric"] == "lps");
  CHECK(report["wdp"].get<double>() <= report["wsd"].get<double>());
  CHECK(report.contains("wcv"));
  CHECK(report["config"].is_object());
}

TEST_CASE("sweep prints mean and std lines and writes reports") {
  Toy t;
  testutil::write_text(t.dir / "sweep.json", R"({
    "sweep": {"models": [
      {"name": "LP", "predictor": "lp", "operator": "ppr", "ppr_alpha": 0.1, "ppr_steps": 50},
      {"name": "LPSL-LP", "predictor": "lp", "operator": "lpsl", "lambda": 5}
    ]},
    "solver": {"max_outer": 30, "max_density": 1.0}
  })");
  const auto r = run({"sweep", "--config", t.path("sweep.json"), "--graph", t.graph, "--features", t.features,
                      "--labels", t.labels, "--per-class", "5", "--val", "30", "--test", "60", "--seeds", "2",
                      "--min-group-size", "3", "--out", t.path("agg.json"), "--out-dir", t.path("seeds"), "--csv",
                      t.path("agg.csv")});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("LP ") != std::string::npos);
  CHECK(r.out.find("±") != std::string::npos);
  CHECK(std::filesystem::exists(t.dir / "seeds" / "seed_0.json"));
  CHECK(std::filesystem::exists(t.dir / "seeds" / "seed_1.json"));
  const auto agg = read_json(t.path("agg.json"));
  CHECK(agg["aggregate"].size() == 2);
  CHECK(agg["splits"].size() == 2);
  CHECK(agg["config"]["sweep"]["seeds"] == 2);
  CHECK(testutil::read_text(t.path("agg.csv")).rfind("model,group,", 0) == 0);
}

TEST_CASE("installed binary exit codes") {
  const std::string bin = LPSL_BINARY;
  auto status = [](const std::string& cmd) {
    const int s = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  CHECK(status(bin + " --help") == 0);
  CHECK(status(bin + " learn --nope") == 1);
}
