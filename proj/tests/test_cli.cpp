#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CmdResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

CmdResult run_cli(const std::string& args) {
  const char* cli = std::getenv("SAHC_CLI");
  REQUIRE_MESSAGE(cli != nullptr, "SAHC_CLI must point at the binary");
  const std::string cmd = std::string(cli) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CmdResult result;
  char buf[4096];
  while (size_t got = fread(buf, 1, sizeof(buf), pipe))
    result.output.append(buf, got);
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

std::string read_file(const fs::path& path) {
  std::ifstream file(path, std::ios::binary);
  REQUIRE_MESSAGE(file.good(), "missing file: ", path.string());
  std::ostringstream ss;
  ss << file.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream file(path);
  file << text;
}

struct Workspace {
  fs::path dir;
  Workspace() {
    dir = fs::temp_directory_path() /
          ("sahc_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string path(const std::string& name) const {
    return (dir / name).string();
  }
};

json two_four_hierarchy() {
  return {{"levels", {{"A", "B"}, {"a1", "a2", "b1", "b2"}}},
          {"parents", {{0, 0, 1, 1}}}};
}

json base_config(const Workspace& ws) {
  return {{"hierarchy", ws.path("hierarchy.json")},
          {"data",
           {{"synthetic",
             {{"feature_dim", 5},
              {"sigma_fine", 1.0},
              {"level_spread", {10.0, 3.0}},
              {"label_noise", 0.0},
              {"samples_per_class", 8},
              {"seed", 7}}}}},
          {"backbone", {{"hidden", {10}}, {"feature_dim", 6}}},
          {"train",
           {{"epochs", 3}, {"batch_size", 16}, {"lr", 0.02}, {"seed", 1}}}};
}

}  // namespace

TEST_CASE("gen-data is byte-stable and echoes its configuration") {
  Workspace ws;
  write_file(ws.path("hierarchy.json"), two_four_hierarchy().dump());
  write_file(ws.path("cfg.json"), base_config(ws).dump());

  CmdResult first = run_cli("gen-data --config " + ws.path("cfg.json") +
                            " --out " + ws.path("d1") + " --quiet");
  REQUIRE_MESSAGE(first.exit_code == 0, first.output);
  CmdResult second = run_cli("gen-data --config " + ws.path("cfg.json") +
                             " --out " + ws.path("d2") + " --quiet");
  REQUIRE(second.exit_code == 0);

  for (const char* name : {"train.csv", "val.csv", "test.csv"})
    CHECK(read_file(ws.dir / "d1" / name) == read_file(ws.dir / "d2" / name));

  const json manifest = json::parse(read_file(ws.dir / "d1" / "manifest.json"));
  CHECK(manifest["synthetic"]["seed"] == 7);
  CHECK(manifest["synthetic"]["samples_per_class"] == 8);
  CHECK(manifest["synthetic"]["clusters_per_class"] == 1);  // default echoed
  CHECK(manifest["synthetic"]["label_noise"] == 0.0);
  CHECK(manifest["counts"]["train"] == 16);
}

TEST_CASE("invalid configuration fails with a nonzero exit") {
  Workspace ws;
  write_file(ws.path("hierarchy.json"), two_four_hierarchy().dump());
  json cfg = base_config(ws);
  cfg["data"]["synthetic"]["label_noise"] = 1.5;
  write_file(ws.path("cfg.json"), cfg.dump());
  CmdResult result = run_cli("gen-data --config " + ws.path("cfg.json") +
                             " --out " + ws.path("d"));
  CHECK(result.exit_code != 0);
  CHECK(result.output.find("label_noise") != std::string::npos);
}

TEST_CASE("missing hierarchy file fails cleanly") {
  Workspace ws;
  json cfg = base_config(ws);  // hierarchy.json never written
  write_file(ws.path("cfg.json"), cfg.dump());
  CmdResult result =
      run_cli("train --config " + ws.path("cfg.json") + " --out " + ws.path("o"));
  CHECK(result.exit_code != 0);
  CHECK(result.output.find("error") != std::string::npos);
}

TEST_CASE("train writes a checkpoint, metrics, and honors overrides") {
  Workspace ws;
  write_file(ws.path("hierarchy.json"), two_four_hierarchy().dump());
  write_file(ws.path("cfg.json"), base_config(ws).dump());

  CmdResult result =
      run_cli("train --config " + ws.path("cfg.json") + " --out " +
              ws.path("run") + " --quiet --train.lr 0.005 --train.epochs 2");
  REQUIRE_MESSAGE(result.exit_code == 0, result.output);
  const json metrics = json::parse(read_file(ws.dir / "run" / "metrics.json"));
  CHECK(metrics["config"]["lr"] == 0.005);
  CHECK(metrics["config"]["epochs"] == 2);
  CHECK(metrics["epochs"].size() == 2);
  CHECK(fs::exists(ws.dir / "run" / "checkpoint.bin"));

  // ablation flags land in the config echo
  CmdResult ablation = run_cli(
      "train --config " + ws.path("cfg.json") + " --out " + ws.path("row2") +
      " --quiet --no-hc-loss --no-hc-inference --train.epochs 1");
  REQUIRE_MESSAGE(ablation.exit_code == 0, ablation.output);
  const json row2 = json::parse(read_file(ws.dir / "row2" / "metrics.json"));
  CHECK(row2["config"]["multi_level"] == true);
  CHECK(row2["config"]["hc_loss"] == false);
  CHECK(row2["config"]["hc_inference"] == false);
  CHECK(row2["inference"] == "fine");
}

TEST_CASE("a memorized toy run evaluates near-perfectly on its train split") {
  Workspace ws;
  write_file(ws.path("hierarchy.json"), two_four_hierarchy().dump());
  json cfg = base_config(ws);
  cfg["data"]["synthetic"]["samples_per_class"] = 16;
  cfg["train"]["epochs"] = 80;
  cfg["train"]["lr"] = 0.03;
  write_file(ws.path("cfg.json"), cfg.dump());

  CmdResult gen = run_cli("gen-data --config " + ws.path("cfg.json") +
                          " --out " + ws.path("data") + " --quiet");
  REQUIRE(gen.exit_code == 0);
  json file_cfg = cfg;
  file_cfg["data"] = {{"train", ws.path("data/train.csv")},
                      {"val", ws.path("data/val.csv")},
                      {"test", ws.path("data/test.csv")}};
  write_file(ws.path("cfg_files.json"), file_cfg.dump());

  CmdResult trained = run_cli("train --config " + ws.path("cfg_files.json") +
                              " --out " + ws.path("run") + " --quiet");
  REQUIRE_MESSAGE(trained.exit_code == 0, trained.output);

  CmdResult eval = run_cli("eval --checkpoint " +
                           ws.path("run/checkpoint.bin") + " --data " +
                           ws.path("data/train.csv") + " --out " +
                           ws.path("eval.json") + " --quiet");
  REQUIRE_MESSAGE(eval.exit_code == 0, eval.output);
  const json report = json::parse(read_file(ws.dir / "eval.json"));
  CHECK(report["report"]["levels"][1]["oa"].get<double>() >= 0.97);

  // predictions come out one row per sample
  CmdResult infer = run_cli("infer --checkpoint " +
                            ws.path("run/checkpoint.bin") + " --data " +
                            ws.path("data/test.csv") + " --out " +
                            ws.path("pred.csv") + " --quiet");
  REQUIRE_MESSAGE(infer.exit_code == 0, infer.output);
  std::istringstream pred(read_file(ws.dir / "pred.csv"));
  std::string line;
  std::getline(pred, line);
  CHECK(line == "index,pred_y1,pred_y2");
  int rows = 0;
  while (std::getline(pred, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 16);  // 4 fine classes x 4 test samples each
}

TEST_CASE("both inference modes coincide for a single-level model") {
  Workspace ws;
  write_file(ws.path("hierarchy.json"),
             json{{"levels", {{"x", "y", "z"}}}, {"parents", json::array()}}
                 .dump());
  json cfg = base_config(ws);
  cfg["hierarchy"] = ws.path("hierarchy.json");
  cfg["data"]["synthetic"]["level_spread"] = {8.0};
  cfg["train"]["epochs"] = 2;
  write_file(ws.path("cfg.json"), cfg.dump());

  CmdResult gen = run_cli("gen-data --config " + ws.path("cfg.json") +
                          " --out " + ws.path("data") + " --quiet");
  REQUIRE(gen.exit_code == 0);
  json file_cfg = cfg;
  file_cfg["data"] = {{"train", ws.path("data/train.csv")},
                      {"val", ws.path("data/val.csv")},
                      {"test", ws.path("data/test.csv")}};
  write_file(ws.path("cfg_files.json"), file_cfg.dump());
  CmdResult trained = run_cli("train --config " + ws.path("cfg_files.json") +
                              " --out " + ws.path("run") + " --quiet");
  REQUIRE_MESSAGE(trained.exit_code == 0, trained.output);

  CmdResult hc = run_cli("eval --checkpoint " + ws.path("run/checkpoint.bin") +
                         " --data " + ws.path("data/test.csv") +
                         " --inference consensus --out " + ws.path("hc.json") +
                         " --quiet");
  CmdResult fine = run_cli("eval --checkpoint " +
                           ws.path("run/checkpoint.bin") + " --data " +
                           ws.path("data/test.csv") + " --inference fine " +
                           "--out " + ws.path("fine.json") + " --quiet");
  REQUIRE(hc.exit_code == 0);
  REQUIRE(fine.exit_code == 0);
  const json a = json::parse(read_file(ws.dir / "hc.json"));
  const json b = json::parse(read_file(ws.dir / "fine.json"));
  CHECK(a["report"] == b["report"]);
}

TEST_CASE("export-matrices writes one joint and two projections per pair") {
  Workspace ws;
  write_file(ws.path("hierarchy.json"), two_four_hierarchy().dump());
  json cfg = base_config(ws);
  cfg["train"]["epochs"] = 1;
  write_file(ws.path("cfg.json"), cfg.dump());
  CmdResult trained = run_cli("train --config " + ws.path("cfg.json") +
                              " --out " + ws.path("run") + " --quiet " +
                              "--train.lr 1e-9 --train.hc_loss false");
  REQUIRE_MESSAGE(trained.exit_code == 0, trained.output);

  CmdResult exported = run_cli("export-matrices --checkpoint " +
                               ws.path("run/checkpoint.bin") + " --out " +
                               ws.path("mat") + " --quiet");
  REQUIRE_MESSAGE(exported.exit_code == 0, exported.output);

  int files = 0;
  for (const auto& entry : fs::directory_iterator(ws.dir / "mat")) {
    (void)entry;
    ++files;
  }
  CHECK(files == 3);  // one pair: joint + both directions

  // untrained uniform joints export uniform projection rows
  std::istringstream proj(read_file(ws.dir / "mat" / "proj_l2_to_l1.csv"));
  std::string line;
  std::getline(proj, line);
  CHECK(line == "class,A,B");
  while (std::getline(proj, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');  // class name
    std::getline(ss, cell, ',');
    CHECK(std::stod(cell) == doctest::Approx(0.5).epsilon(1e-12));
  }
}

TEST_CASE("multi-seed training emits per-run reports and an aggregate") {
  Workspace ws;
  write_file(ws.path("hierarchy.json"), two_four_hierarchy().dump());
  json cfg = base_config(ws);
  cfg["train"]["epochs"] = 2;
  write_file(ws.path("cfg.json"), cfg.dump());
  CmdResult result = run_cli("train --config " + ws.path("cfg.json") +
                             " --out " + ws.path("multi") +
                             " --seeds 2 --quiet");
  REQUIRE_MESSAGE(result.exit_code == 0, result.output);
  CHECK(fs::exists(ws.dir / "multi" / "run_1" / "metrics.json"));
  CHECK(fs::exists(ws.dir / "multi" / "run_2" / "metrics.json"));
  const json agg = json::parse(read_file(ws.dir / "multi" / "aggregate.json"));
  CHECK(agg["seeds"].size() == 2);
  CHECK(agg["test"]["levels"].size() == 2);
  CHECK(agg["test"]["levels"][1]["mf1"].contains("std"));
}

TEST_CASE("exit codes follow the error contract") {
  CmdResult help = run_cli("--help");
  CHECK(help.exit_code == 0);
  CHECK(help.output.find("gen-data") != std::string::npos);

  CmdResult no_command = run_cli("");
  CHECK(no_command.exit_code != 0);

  CmdResult bad_flag = run_cli("eval --checkpoint x");  // missing --data
  CHECK(bad_flag.exit_code != 0);

  Workspace ws;
  write_file(ws.path("hierarchy.json"), two_four_hierarchy().dump());
  json cfg = base_config(ws);
  write_file(ws.path("cfg.json"), cfg.dump());
  CmdResult stray = run_cli("train --config " + ws.path("cfg.json") +
                            " --out " + ws.path("o") + " stray-token");
  CHECK(stray.exit_code != 0);
  CHECK(stray.output.find("stray-token") != std::string::npos);
}

TEST_CASE("gradcheck passes clean and fails under corruption") {
  CmdResult ok = run_cli("gradcheck --seed 5 --trials 1 --quiet");
  CHECK(ok.exit_code == 0);
  CHECK(ok.output.find("gradcheck: PASS") != std::string::npos);
  CHECK(ok.output.find("max_rel_err") != std::string::npos);

  CmdResult bad =
      run_cli("gradcheck --seed 5 --trials 1 --corrupt lse_matmul --quiet");
  CHECK(bad.exit_code == 1);
  CHECK(bad.output.find("FAIL  lse_matmul") != std::string::npos);
}
