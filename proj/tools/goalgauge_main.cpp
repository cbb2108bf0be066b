// goalgauge: batch evaluation of objective-driven chat datasets.
//
// Subcommands run one metric pipeline each from a shared JSON config:
//   ingest      parse and validate the dataset, write dataset_report.json
//   cluster     LLM-guided goal clustering
//   baseline    single-prompt incremental labeling baseline
//   stability   two seeded clustering runs plus alignment and ARI
//   completion  end-tag completion labeling and classification metrics
//   rtree       response tree expansion and uncertainty aggregates
//   export-sft  per-turn SFT pairs with the end tag appended
//   report      flatten a finished run directory to jsonl or csv
//
// Exit codes: 0 success, 1 runtime failure, 2 config failure.

#include <cstdint>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "goalgauge/config.hpp"
#include "goalgauge/errors.hpp"
#include "goalgauge/io.hpp"
#include "goalgauge/pipeline.hpp"
#include "goalgauge/report.hpp"

namespace {

struct CommandArgs {
  std::string config_path;
  std::vector<std::string> overrides;
};

goalgauge::RunConfig load_config(const CommandArgs& args) {
  std::string text = goalgauge::read_text_file(args.config_path);
  for (const std::string& entry : args.overrides) {
    std::size_t eq = entry.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw goalgauge::ConfigError("--set expects key=value, got \"" + entry +
                                   "\"");
    }
    text = goalgauge::apply_config_override(text, entry.substr(0, eq),
                                            entry.substr(eq + 1));
  }
  return goalgauge::RunConfig::from_json_text(text);
}

void add_common_options(CLI::App* cmd, CommandArgs& args) {
  cmd->add_option("--config", args.config_path, "Run configuration file")
      ->required();
  cmd->add_option("--set", args.overrides,
                  "Override a config field, e.g. --set rtree.alpha=0.25");
}

int run_metrics(const CommandArgs& args,
                const std::vector<goalgauge::Metric>& metrics) {
  goalgauge::RunConfig config = load_config(args);
  goalgauge::RunManifest manifest = goalgauge::run_pipeline(config, metrics);
  std::cout << "wrote " << manifest.artifacts.size() << " artifacts to "
            << config.output_dir << " (llm calls " << manifest.llm_calls
            << ", cache hits " << manifest.cache_hits << ")\n"
            << "tree digest " << manifest.tree_digest << "\n";
  return 0;
}

int run_report(const CommandArgs& args, const std::string& format) {
  goalgauge::RunConfig config = load_config(args);
  std::vector<goalgauge::ReportRecord> records =
      goalgauge::collect_run_records(config.output_dir);
  std::cout << goalgauge::emit_report(records, format);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unsupervised metrics for objective-driven chat datasets"};
  app.set_version_flag("--version", goalgauge::kToolVersion);
  app.require_subcommand(1);

  struct MetricCommand {
    const char* name;
    const char* help;
    std::vector<goalgauge::Metric> metrics;
    CommandArgs args;
  };
  std::vector<MetricCommand> commands;
  commands.reserve(7);
  commands.push_back({"ingest", "Validate the dataset and stop", {}, {}});
  commands.push_back({"cluster",
                      "Cluster goals with LLM-supervised merging",
                      {goalgauge::Metric::cluster},
                      {}});
  commands.push_back({"baseline",
                      "Incremental single-prompt labeling baseline",
                      {goalgauge::Metric::baseline},
                      {}});
  commands.push_back({"stability",
                      "Cluster twice and align the results",
                      {goalgauge::Metric::stability},
                      {}});
  commands.push_back({"completion",
                      "Label interactions complete or incomplete",
                      {goalgauge::Metric::completion},
                      {}});
  commands.push_back({"rtree",
                      "Expand response trees and aggregate uncertainty",
                      {goalgauge::Metric::rtree},
                      {}});
  commands.push_back({"export-sft",
                      "Write per-turn SFT pairs with the end tag",
                      {goalgauge::Metric::sft},
                      {}});
  for (MetricCommand& command : commands) {
    add_common_options(app.add_subcommand(command.name, command.help),
                       command.args);
  }

  CommandArgs report_args;
  std::string report_format = "jsonl";
  CLI::App* report = app.add_subcommand(
      "report", "Flatten a finished run directory to jsonl or csv");
  add_common_options(report, report_args);
  report->add_option("--format", report_format, "jsonl or csv")
      ->check(CLI::IsMember({"jsonl", "csv"}));

  CLI11_PARSE(app, argc, argv);

  try {
    for (MetricCommand& command : commands) {
      if (app.got_subcommand(command.name)) {
        return run_metrics(command.args, command.metrics);
      }
    }
    if (app.got_subcommand("report")) {
      return run_report(report_args, report_format);
    }
  } catch (const goalgauge::ConfigError& error) {
    std::cerr << "goalgauge: " << error.what() << "\n";
    return 2;
  } catch (const std::exception& error) {
    std::cerr << "goalgauge: " << error.what() << "\n";
    return 1;
  }
  return 0;
}
