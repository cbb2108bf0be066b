#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "goalgauge/clustering.hpp"
#include "goalgauge/completion.hpp"
#include "goalgauge/interaction.hpp"
#include "goalgauge/response_tree.hpp"
#include "goalgauge/stability.hpp"

namespace goalgauge {

// Artifact renderers. Each returns the exact file content; callers decide
// where it lands. Output is byte-stable for identical inputs: JSON uses
// sorted keys and shortest round-trip numbers, CSV uses the same number
// formatting.

std::string render_dataset_report(
    const std::vector<std::pair<std::string, std::size_t>>& files,
    std::size_t complete_labeled, std::size_t total_pairs);

// One {"id", "summary"} object per line, dataset order.
std::string render_summaries(const std::vector<GoalSummary>& summaries);

std::string render_clusters(const ClusteringResult& result);

std::string render_cluster_manifest(std::uint64_t seed, int k1,
                                    const ClusteringResult& result,
                                    std::uint64_t llm_calls);

std::string render_baseline(const BaselineResult& result);

// Aligned co-occurrence counts; first row and column carry cluster ids.
std::string render_stability_csv(const StabilityResult& result);

std::string render_stability_json(const StabilityResult& result);

// One verdict object per line, evaluation order.
std::string render_verdicts(const std::vector<CompletionVerdict>& verdicts);

std::string render_metrics_report(const ClassificationReport& report);

// Every node of every tree, one object per line, trees in the given order.
std::string render_tree_dump(
    const std::vector<std::pair<std::string, ResponseTree>>& trees);

std::string render_tree_stats_csv(const std::vector<TreeRecord>& records);

std::string render_tree_aggregates(const TreeStats& stats,
                                   std::size_t skipped_samples);

// Same record format write_sft_pairs uses, returned as a string.
std::string render_sft_pairs(const std::vector<SftPair>& pairs);

// Flat key/value record for the `report` subcommand.
struct ReportRecord {
  std::vector<std::pair<std::string, std::string>> fields;
};

// "jsonl" or "csv". CSV requires every record to share one field sequence.
// Throws on an empty record list or an unknown format.
std::string emit_report(const std::vector<ReportRecord>& records,
                        const std::string& format);

// Summary records for a finished run directory: manifest facts, one record
// per artifact, and headline numbers from whichever phase artifacts exist.
std::vector<ReportRecord> collect_run_records(const std::string& output_dir);

}  // namespace goalgauge
