#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

// Behavioral tests of the installed binary: exit codes, file outputs, cache
// sharing. The binary path arrives via ATTNRC_BIN.

namespace fs = std::filesystem;

namespace {

std::string binary() {
  const char* bin = std::getenv("ATTNRC_BIN");
  REQUIRE_MESSAGE(bin != nullptr, "ATTNRC_BIN must point at the attnrc binary");
  return bin;
}

int run_command(const std::string& args) {
  const std::string cmd = binary() + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

fs::path sandbox() {
  const auto dir = fs::temp_directory_path() / "attnrc_cli_test";
  fs::create_directories(dir);
  return dir;
}

void write_small_config(const fs::path& path, const fs::path& out_dir) {
  nlohmann::json cfg;
  cfg["dataset"]["system"] = "uctls";
  cfg["dataset"]["n_train"] = 500;
  cfg["dataset"]["n_test"] = 250;
  cfg["dataset"]["seed"] = 9;
  cfg["reservoir"]["backend"] = "leaky_esn";
  cfg["reservoir"]["nodes"] = 15;
  cfg["reservoir"]["washout"] = 40;
  cfg["readout"]["train"]["epochs"] = 60;
  cfg["eval"]["closed_loop_duration"] = 40;
  cfg["eval"]["vpt_starts"] = 2;
  cfg["io"]["out_dir"] = out_dir.string();
  std::ofstream f(path);
  f << cfg.dump(2);
}

std::string slurp(const fs::path& path) {
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("missing config file exits with the usage code") {
  CHECK(run_command("run --config /nonexistent/config.json") == 2);
}

TEST_CASE("unknown config keys exit with the usage code") {
  const auto dir = sandbox();
  const auto bad = dir / "bad.json";
  std::ofstream(bad) << R"({"dataset": {"sigmaforce": 0.1}})";
  CHECK(run_command("run --config " + bad.string()) == 2);
  CHECK(run_command("gen-data --config " + bad.string() + " --out " + (dir / "x").string()) == 2);
}

TEST_CASE("unknown figure preset is a usage error") {
  CHECK(run_command("sweep --figure 99") == 2);
}

TEST_CASE("gen-data is deterministic and writes the documented files") {
  const auto dir = sandbox();
  const auto out_a = dir / "data_a";
  const auto out_b = dir / "data_b";
  const std::string base =
      "gen-data --set dataset.n_train=300 --set dataset.n_test=100 --set dataset.seed=3";
  CHECK(run_command(base + " --out " + out_a.string()) == 0);
  CHECK(run_command(base + " --out " + out_b.string()) == 0);

  for (const char* name : {"train.csv", "train.json", "test.csv", "test.json"}) {
    CAPTURE(name);
    REQUIRE(fs::exists(out_a / name));
    CHECK(slurp(out_a / name) == slurp(out_b / name));
  }
  const std::string header = slurp(out_a / "train.csv").substr(0, 20);
  CHECK(header.rfind("t,ch0,ch1", 0) == 0);
}

TEST_CASE("run shares the state cache across readouts and emits artifacts") {
  const auto dir = sandbox();
  const auto out = dir / "run_out";
  fs::remove_all(out);
  const auto cfg_path = dir / "small.json";
  write_small_config(cfg_path, out);

  CHECK(run_command("run --config " + cfg_path.string() + " --readout ridge") == 0);
  CHECK(fs::exists(out / "report.csv"));
  CHECK(fs::exists(out / "report.json"));
  CHECK(fs::exists(out / "model_ridge.json"));

  CHECK(run_command("run --config " + cfg_path.string() + " --readout linear-attention") == 0);
  CHECK(fs::exists(out / "model_linear_attention.json"));
  CHECK(fs::exists(out / "loss_curve_linear_attention.csv"));

  // Identical dataset/backend/seed: the second run must consume the cached
  // StateMatrix written by the first.
  const auto second_report = nlohmann::json::parse(slurp(out / "report.json"));
  CHECK(second_report["provenance"]["state_hash"].is_string());
  CHECK(second_report["provenance"]["cache_hit"].get<bool>());

  const std::string curve = slurp(out / "loss_curve_linear_attention.csv");
  CHECK(curve.rfind("epoch,train_nrmse,test_nrmse", 0) == 0);
}

TEST_CASE("spectrum requires trained models") {
  const auto dir = sandbox();
  const auto out = dir / "spec_out";
  const auto cfg_path = dir / "small.json";
  write_small_config(cfg_path, out / "unused");
  const int code = run_command("spectrum --config " + cfg_path.string() + " --models " +
                               (dir / "empty_models").string() + " --nodes 15 --out " + out.string());
  CHECK(code == 2);
}

TEST_CASE("generic sweep writes the report with its columns") {
  const auto dir = sandbox();
  const auto out = dir / "sweep_out";
  fs::remove_all(out);
  const auto cfg_path = dir / "small.json";
  write_small_config(cfg_path, out);
  const int code = run_command(
      "sweep --config " + cfg_path.string() +
      " --axis reservoir_size --values 10,14 --members 2 --models ridge --jobs 2");
  CHECK(code == 0);
  REQUIRE(fs::exists(out / "sweep_reservoir_size.csv"));
  const std::string csv = slurp(out / "sweep_reservoir_size.csv");
  CHECK(csv.rfind("axis_value,model,metric,mean,std,n", 0) == 0);
  CHECK(csv.find("ridge,nrmse") != std::string::npos);
  CHECK(csv.find("ridge,vpt") != std::string::npos);
}
