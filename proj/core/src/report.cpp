#include "goalgauge/report.hpp"

#include <filesystem>

#include <json.hpp>

#include "goalgauge/errors.hpp"
#include "goalgauge/io.hpp"

namespace goalgauge {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

const char* termination_name(MergeStats::Termination termination) {
  switch (termination) {
    case MergeStats::Termination::failure_budget:
      return "failure_budget";
    case MergeStats::Termination::exhausted:
      return "exhausted";
  }
  throw Error("termination_name: invalid termination");
}

json histogram_json(const std::vector<HistogramBin>& bins) {
  json out = json::array();
  for (const HistogramBin& bin : bins) {
    out.push_back({{"lo", bin.lo}, {"hi", bin.hi}, {"count", bin.count}});
  }
  return out;
}

std::string read_artifact(const std::filesystem::path& dir,
                          const std::string& name) {
  return read_text_file((dir / name).string());
}

void push_record(std::vector<ReportRecord>& records,
                 const std::string& section, const std::string& key,
                 const json& value) {
  ReportRecord record;
  record.fields.emplace_back("section", section);
  record.fields.emplace_back("key", key);
  record.fields.emplace_back(
      "value", value.is_string() ? value.get<std::string>() : value.dump());
  records.push_back(std::move(record));
}

}  // namespace

std::string render_dataset_report(
    const std::vector<std::pair<std::string, std::size_t>>& files,
    std::size_t complete_labeled, std::size_t total_pairs) {
  json file_list = json::array();
  std::size_t total = 0;
  for (const auto& [path, samples] : files) {
    file_list.push_back({{"path", path}, {"samples", samples}});
    total += samples;
  }
  json report = {{"files", file_list},
                 {"total_samples", total},
                 {"complete_labeled", complete_labeled},
                 {"total_pairs", total_pairs}};
  return report.dump(2) + "\n";
}

std::string render_summaries(const std::vector<GoalSummary>& summaries) {
  std::string out;
  for (const GoalSummary& summary : summaries) {
    json record = {{"id", summary.source_id}, {"summary", summary.text}};
    out += record.dump();
    out += "\n";
  }
  return out;
}

std::string render_clusters(const ClusteringResult& result) {
  json clusters = json::array();
  for (const Cluster& cluster : result.set.clusters) {
    clusters.push_back(
        {{"id", cluster.id},
         {"label", cluster.label},
         {"size", cluster.member_ids.size()},
         {"members", std::vector<std::string>(cluster.member_ids.begin(),
                                              cluster.member_ids.end())}});
  }
  json assignments = json::object();
  for (const auto& [id, cluster] : result.set.assignments) {
    assignments[id] = cluster;
  }
  json merge = {
      {"accepts", result.merge.accepts},
      {"rejects", result.merge.rejects},
      {"queries", result.merge.queries},
      {"failures_at_end", result.merge.failures_at_end},
      {"live_at_end", result.merge.live_at_end},
      {"termination", termination_name(result.merge.termination)},
      {"rejects_between_merges", result.merge.rejects_between_merges}};
  json report = {{"k_initial", result.k_initial},
                 {"k_final", result.set.k()},
                 {"empty_dropped", result.merge.empty_dropped},
                 {"clusters", clusters},
                 {"assignments", assignments},
                 {"merge", merge}};
  return report.dump(2) + "\n";
}

std::string render_cluster_manifest(std::uint64_t seed, int k1,
                                    const ClusteringResult& result,
                                    std::uint64_t llm_calls) {
  json manifest = {{"seed", seed},
                   {"k1", k1},
                   {"k_final", result.set.k()},
                   {"llm_calls", llm_calls},
                   {"merge_accepts", result.merge.accepts},
                   {"merge_rejects", result.merge.rejects}};
  return manifest.dump(2) + "\n";
}

std::string render_baseline(const BaselineResult& result) {
  json labels = json::object();
  for (const auto& [id, entries] : result.labels) {
    labels[id] = entries;
  }
  json report = {{"categories", result.categories}, {"labels", labels}};
  return report.dump(2) + "\n";
}

std::string render_stability_csv(const StabilityResult& result) {
  std::string out;
  std::vector<std::string> header{""};
  for (int col : result.col_order) header.push_back(std::to_string(col));
  out += join(header, ",");
  out += "\n";
  for (std::size_t i = 0; i < result.aligned.size(); ++i) {
    std::vector<std::string> row{std::to_string(result.row_order[i])};
    for (std::int64_t count : result.aligned[i]) {
      row.push_back(std::to_string(count));
    }
    out += join(row, ",");
    out += "\n";
  }
  return out;
}

std::string render_stability_json(const StabilityResult& result) {
  json report = {{"ari", result.ari},
                 {"trace", result.trace},
                 {"row_order", result.row_order},
                 {"col_order", result.col_order}};
  return report.dump(2) + "\n";
}

std::string render_verdicts(const std::vector<CompletionVerdict>& verdicts) {
  std::string out;
  for (const CompletionVerdict& verdict : verdicts) {
    json record = {{"id", verdict.id},
                   {"predicted_complete", verdict.predicted_complete},
                   {"continuation", verdict.continuation}};
    record["matched_pattern"] = verdict.matched_pattern.has_value()
                                    ? json(*verdict.matched_pattern)
                                    : json(nullptr);
    record["ground_truth"] = verdict.ground_truth.has_value()
                                 ? json(*verdict.ground_truth)
                                 : json(nullptr);
    out += record.dump();
    out += "\n";
  }
  return out;
}

std::string render_metrics_report(const ClassificationReport& report) {
  json out = {{"tp", report.tp},         {"fp", report.fp},
              {"fn", report.fn},         {"tn", report.tn},
              {"accuracy", report.accuracy}, {"precision", report.precision},
              {"recall", report.recall}, {"f1", report.f1},
              {"flags", report.flags}};
  return out.dump(2) + "\n";
}

std::string render_tree_dump(
    const std::vector<std::pair<std::string, ResponseTree>>& trees) {
  std::string out;
  for (const auto& [source_id, tree] : trees) {
    for (const TreeNode& node : tree.nodes) {
      json record = {{"source_id", source_id},
                     {"id", node.id},
                     {"parent", node.parent},
                     {"token", node.token},
                     {"token_logprob", node.token_logprob},
                     {"path_logprob", node.path_logprob},
                     {"leaf", node.leaf},
                     {"cut", node.cut}};
      out += record.dump();
      out += "\n";
    }
  }
  return out;
}

std::string render_tree_stats_csv(const std::vector<TreeRecord>& records) {
  std::string out =
      "source_id,alpha,mode,node_count,leaf_count,max_branch_logprob,"
      "budget_exhausted\n";
  for (const TreeRecord& record : records) {
    std::vector<std::string> row;
    row.push_back(csv_escape(record.source_id));
    row.push_back(format_double(record.alpha));
    row.push_back(tree_mode_name(record.mode));
    row.push_back(std::to_string(record.node_count));
    row.push_back(std::to_string(record.leaf_count));
    row.push_back(record.max_branch_logprob.has_value()
                      ? format_double(*record.max_branch_logprob)
                      : "");
    row.push_back(record.budget_exhausted ? "true" : "false");
    out += join(row, ",");
    out += "\n";
  }
  return out;
}

std::string render_tree_aggregates(const TreeStats& stats,
                                   std::size_t skipped_samples) {
  json out = {{"total", stats.total},
              {"included", stats.included},
              {"excluded_cut", stats.excluded_cut},
              {"skipped_samples", skipped_samples},
              {"mean_leaf_count", stats.mean_leaf_count},
              {"mean_max_branch_prob", stats.mean_max_branch_prob},
              {"leaf_count_histogram", histogram_json(stats.leaf_count_histogram)},
              {"flags", stats.flags}};
  out["label_correlation"] = stats.label_correlation.has_value()
                                 ? json(*stats.label_correlation)
                                 : json(nullptr);
  return out.dump(2) + "\n";
}

std::string render_sft_pairs(const std::vector<SftPair>& pairs) {
  std::string out;
  for (const SftPair& pair : pairs) {
    json record = {{"input", pair.input},
                   {"target", pair.target},
                   {"source_id", pair.source_id}};
    out += record.dump();
    out += "\n";
  }
  return out;
}

std::string emit_report(const std::vector<ReportRecord>& records,
                        const std::string& format) {
  if (records.empty()) throw Error("report: no records");
  if (format == "jsonl") {
    std::string out;
    for (const ReportRecord& record : records) {
      ordered_json line = ordered_json::object();
      for (const auto& [key, value] : record.fields) {
        line[key] = value;
      }
      out += line.dump();
      out += "\n";
    }
    return out;
  }
  if (format == "csv") {
    std::vector<std::string> header;
    for (const auto& [key, _] : records.front().fields) {
      header.push_back(key);
    }
    std::string out;
    {
      std::vector<std::string> cells;
      for (const std::string& key : header) cells.push_back(csv_escape(key));
      out += join(cells, ",");
      out += "\n";
    }
    for (const ReportRecord& record : records) {
      if (record.fields.size() != header.size()) {
        throw Error("report: records have mixed fields");
      }
      std::vector<std::string> cells;
      for (std::size_t i = 0; i < header.size(); ++i) {
        if (record.fields[i].first != header[i]) {
          throw Error("report: records have mixed fields");
        }
        cells.push_back(csv_escape(record.fields[i].second));
      }
      out += join(cells, ",");
      out += "\n";
    }
    return out;
  }
  throw Error("report: unknown format \"" + format + "\"");
}

std::vector<ReportRecord> collect_run_records(const std::string& output_dir) {
  std::filesystem::path dir(output_dir);
  json manifest = json::parse(read_artifact(dir, "run_manifest.json"));

  std::vector<ReportRecord> records;
  push_record(records, "run", "config_hash", manifest.at("config_hash"));
  push_record(records, "run", "tool_version", manifest.at("tool_version"));
  push_record(records, "run", "llm_calls", manifest.at("llm_calls"));
  push_record(records, "run", "cache_hits", manifest.at("cache_hits"));
  push_record(records, "run", "tree_digest", manifest.at("tree_digest"));
  for (const auto& artifact : manifest.at("artifacts")) {
    push_record(records, "artifact",
                artifact.at("path").get<std::string>(),
                artifact.at("fnv1a64"));
  }

  auto have = [&dir](const std::string& name) {
    return file_exists((dir / name).string());
  };
  if (have("cluster_manifest.json")) {
    json cluster = json::parse(read_artifact(dir, "cluster_manifest.json"));
    push_record(records, "cluster", "k1", cluster.at("k1"));
    push_record(records, "cluster", "k_final", cluster.at("k_final"));
    push_record(records, "cluster", "merge_accepts",
                cluster.at("merge_accepts"));
    push_record(records, "cluster", "merge_rejects",
                cluster.at("merge_rejects"));
    push_record(records, "cluster", "llm_calls", cluster.at("llm_calls"));
  }
  if (have("baseline.json")) {
    json baseline = json::parse(read_artifact(dir, "baseline.json"));
    push_record(records, "baseline", "categories",
                baseline.at("categories").size());
  }
  if (have("stability.json")) {
    json stability = json::parse(read_artifact(dir, "stability.json"));
    push_record(records, "stability", "ari", stability.at("ari"));
    push_record(records, "stability", "trace", stability.at("trace"));
  }
  if (have("metrics_report.json")) {
    json metrics = json::parse(read_artifact(dir, "metrics_report.json"));
    for (const char* key : {"accuracy", "precision", "recall", "f1"}) {
      push_record(records, "completion", key, metrics.at(key));
    }
  }
  if (have("tree_aggregates.json")) {
    json trees = json::parse(read_artifact(dir, "tree_aggregates.json"));
    push_record(records, "rtree", "total", trees.at("total"));
    push_record(records, "rtree", "included", trees.at("included"));
    push_record(records, "rtree", "mean_leaf_count",
                trees.at("mean_leaf_count"));
  }
  return records;
}

}  // namespace goalgauge
