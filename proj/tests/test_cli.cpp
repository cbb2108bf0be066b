#include <doctest.h>

#include <cstdlib>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "goalgauge/interaction.hpp"
#include "goalgauge/io.hpp"
#include "goalgauge/pipeline.hpp"
#include "test_support.hpp"

using namespace goalgauge;
using nlohmann::json;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr combined
};

CliResult run_cli(const test_support::TempDir& dir, const std::string& args) {
  static int invocation = 0;
  std::string capture =
      dir.file("cli-capture-" + std::to_string(invocation++) + ".txt");
  std::string command =
      std::string(GOALGAUGE_CLI_PATH) + " " + args + " > " + capture + " 2>&1";
  int status = std::system(command.c_str());
  CliResult result;
  if (WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
  result.output = test_support::read_file(capture);
  return result;
}

// Writes a two-sample dataset and a matching run config, returns the config
// path.
std::string write_run_config(const test_support::TempDir& dir,
                             const std::string& dataset_name = "data.jsonl") {
  Interaction first = test_support::make_interaction("cli-1", 2, "done");
  first.complete_label = true;
  Interaction second = test_support::make_interaction("cli-2", 3, "also done");
  second.complete_label = true;
  write_dataset(dir.file("data.jsonl"), {first, second});

  std::string config_path = dir.file("run.json");
  test_support::write_file(
      config_path,
      std::string("{") + "\"version\": 1, \"seed\": 2, " +
          "\"dataset\": [\"" + dir.file(dataset_name) + "\"], " +
          "\"output_dir\": \"" + dir.file("out") + "\", " +
          "\"backend\": {\"mock\": {}}}");
  return config_path;
}

}  // namespace

TEST_CASE("--version prints the tool version") {
  test_support::TempDir dir;
  CliResult result = run_cli(dir, "--version");
  CHECK(result.exit_code == 0);
  CHECK(result.output.find(kToolVersion) != std::string::npos);
}

TEST_CASE("ingest validates a dataset and writes a manifest") {
  test_support::TempDir dir;
  std::string config_path = write_run_config(dir);
  CliResult result = run_cli(dir, "ingest --config " + config_path);
  CHECK(result.exit_code == 0);
  CHECK(result.output.find("wrote 1 artifacts") != std::string::npos);
  CHECK(result.output.find("tree digest ") != std::string::npos);
  CHECK(file_exists(dir.file("out/dataset_report.json")));
  CHECK(file_exists(dir.file("out/run_manifest.json")));

  SUBCASE("report flattens the finished run directory") {
    CliResult report =
        run_cli(dir, "report --config " + config_path + " --format csv");
    CHECK(report.exit_code == 0);
    CHECK(split_lines(report.output)[0] == "section,key,value");

    CliResult as_jsonl = run_cli(dir, "report --config " + config_path);
    CHECK(as_jsonl.exit_code == 0);
    json first = json::parse(split_lines(as_jsonl.output)[0]);
    CHECK(first.at("section") == "run");
    CHECK(first.at("key") == "config_hash");
  }
}

TEST_CASE("config errors exit with status 2 and name the field") {
  test_support::TempDir dir;
  std::string config_path = write_run_config(dir);
  CliResult result = run_cli(
      dir, "rtree --config " + config_path + " --set rtree.alpha=1.5");
  CHECK(result.exit_code == 2);
  CHECK(result.output.find("rtree.alpha: must be in (0, 1]") !=
        std::string::npos);
  CHECK(result.output.find("goalgauge:") != std::string::npos);

  SUBCASE("malformed --set values are config errors too") {
    CliResult bad_set =
        run_cli(dir, "ingest --config " + config_path + " --set rtree.alpha");
    CHECK(bad_set.exit_code == 2);
    CHECK(bad_set.output.find("--set expects key=value") !=
          std::string::npos);
  }
}

TEST_CASE("runtime failures exit with status 1") {
  test_support::TempDir dir;
  std::string config_path = write_run_config(dir, "absent.jsonl");
  CliResult result = run_cli(dir, "ingest --config " + config_path);
  CHECK(result.exit_code == 1);
  CHECK(result.output.find("cannot open file") != std::string::npos);

  SUBCASE("reporting an unfinished run directory fails the same way") {
    std::string fresh = write_run_config(dir);
    CliResult report = run_cli(dir, "report --config " + fresh);
    CHECK(report.exit_code == 1);
  }
}

TEST_CASE("bad invocations are rejected by the argument parser") {
  test_support::TempDir dir;
  CHECK(run_cli(dir, "frobnicate").exit_code != 0);
  CHECK(run_cli(dir, "ingest").exit_code != 0);  // --config is required
  CHECK(run_cli(dir, "report --config x --format xml").exit_code != 0);
}
