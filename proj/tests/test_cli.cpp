#include <doctest.h>

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tmpdir.hpp"
#include "ucdir/cli.hpp"

using namespace ucdir;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args, std::map<std::string, std::string> env = {}) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err, env);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("cli: usage errors exit 1") {
  CHECK(run({}).code == kExitUsage);
  CHECK(run({"bogus"}).code == kExitUsage);
  CHECK(run({"generate"}).code == kExitUsage);
  CHECK(run({"--help"}).code == kExitOk);
  const auto dir = scratch_dir("cli_usage");
  std::ofstream(dir / "typo.json") << R"({"train": {"epoch": 3}})";
  const Run r = run({"generate", "--out", (dir / "d.jsonl").string(), "--config", (dir / "typo.json").string()});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("epoch") != std::string::npos);
  CHECK(run({"generate", "--out", (dir / "d.jsonl").string()}, {{"UCDIR_NOPE", "1"}}).code == kExitUsage);
}

TEST_CASE("cli: runtime errors exit 2") {
  const auto dir = scratch_dir("cli_runtime");
  CHECK(run({"eval", "--checkpoint", (dir / "none.json").string(), "--data", (dir / "none.jsonl").string()}).code ==
        kExitRuntime);
  std::ofstream(dir / "empty.jsonl");
  const Run r = run({"cluster", "--data", (dir / "empty.jsonl").string()});
  CHECK(r.code == kExitRuntime);
  CHECK(r.err.find("no samples") != std::string::npos);
}

TEST_CASE("cli: generate, train, eval, cluster end to end") {
  const auto dir = scratch_dir("cli_e2e");
  std::ofstream(dir / "cfg.json") << R"({"generator": {"num_classes": 3, "per_class_per_domain": 12,
    "latent_dim": 4, "d_in": 8}, "train": {"batch_size": 8, "hidden_dims": [6], "feature_dim": 4},
    "eval": {"ks": [1, 5], "eval_interval": 2}})";
  const std::string cfg = (dir / "cfg.json").string();
  const std::string data = (dir / "d.jsonl").string();

  Run g = run({"generate", "--config", cfg, "--out", data, "--seed", "3"});
  REQUIRE(g.code == kExitOk);
  CHECK(g.out.find("N=36 M=36 C=3") != std::string::npos);

  Run t = run({"train", "--config", cfg, "--data", data, "--out", (dir / "run").string(), "--epochs", "3",
               "--variant", "v3"},
              {{"UCDIR_TRAIN_LR0", "0.01"}});
  REQUIRE(t.code == kExitOk);
  const json effective = json::parse(slurp(dir / "run" / "config.json"));
  CHECK(effective.at("train").at("lr0") == 0.01);
  CHECK(effective.at("loss").at("use_DD") == false);
  const std::string csv = slurp(dir / "run" / "metrics.csv");
  CHECK(csv.rfind("epoch,lr,lambda,L_IW,L_CW,L_DD,L_SE,L_total,P@1,P@5\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);

  const std::string ckpt = (dir / "run" / "checkpoint.json").string();
  Run e = run({"eval", "--config", cfg, "--checkpoint", ckpt, "--data", data, "--k", "1,3", "--direction", "both",
               "--out", (dir / "eval.json").string()});
  REQUIRE(e.code == kExitOk);
  const json report = json::parse(slurp(dir / "eval.json"));
  CHECK(report.at("reports").size() == 2);
  CHECK(report.at("reports")[1].at("direction") == "B2A");
  CHECK(report.at("reports")[0].at("aggregate").contains("P@3"));

  Run pq = run({"eval", "--config", cfg, "--checkpoint", ckpt, "--data", data, "--k", "2", "--direction", "A2B",
                "--per-query"});
  REQUIRE(pq.code == kExitOk);
  CHECK(json::parse(pq.out).at("per_query").size() == 36);
  CHECK(run({"eval", "--config", cfg, "--checkpoint", ckpt, "--data", data, "--k", "99"}).code == kExitUsage);

  Run c = run({"cluster", "--config", cfg, "--data", data, "--checkpoint", ckpt, "--domain", "B", "--out",
               (dir / "clusters.json").string()});
  REQUIRE(c.code == kExitOk);
  const json cm = json::parse(slurp(dir / "clusters.json"));
  CHECK(cm.at("K") == 3);
  CHECK(cm.at("domain") == "B");
  CHECK(cm.at("assignments").size() == 36);
  CHECK(cm.at("centroids")[0].size() == 4);

  Run raw = run({"cluster", "--config", cfg, "--data", data, "--k", "2"});
  REQUIRE(raw.code == kExitOk);
  CHECK(json::parse(raw.out).at("centroids")[0].size() == 8);

  // resume continues the metrics file
  Run more = run({"train", "--config", cfg, "--data", data, "--out", (dir / "run").string(), "--epochs", "5",
                  "--resume", ckpt},
                 {{"UCDIR_TRAIN_LR0", "0.01"}});
  REQUIRE(more.code == kExitOk);
  const std::string csv2 = slurp(dir / "run" / "metrics.csv");
  CHECK(std::count(csv2.begin(), csv2.end(), '\n') == 6);
  CHECK(csv2.rfind(csv, 0) == 0);
}

TEST_CASE("cli: check passes and reports each property") {
  const Run r = run({"check", "--trials", "10", "--seed", "4"});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("FAIL") == std::string::npos);
  CHECK(r.out.find("PASS gradient L_total") != std::string::npos);
  const Run g = run({"check", "--grad-only"});
  CHECK(g.code == kExitOk);
  CHECK(g.out.find("entropy") == std::string::npos);
}
