#include "goalgauge/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <set>

#include <json.hpp>

#include "goalgauge/clustering.hpp"
#include "goalgauge/completion.hpp"
#include "goalgauge/errors.hpp"
#include "goalgauge/hash.hpp"
#include "goalgauge/http_backend.hpp"
#include "goalgauge/io.hpp"
#include "goalgauge/mock_backend.hpp"
#include "goalgauge/parallel.hpp"
#include "goalgauge/report.hpp"
#include "goalgauge/response_tree.hpp"
#include "goalgauge/stability.hpp"

namespace goalgauge {

const char kToolVersion[] = "0.1.0";

namespace {

using json = nlohmann::json;

std::uint64_t total_calls(const CallStats& stats) {
  return stats.chat_calls + stats.completion_calls + stats.embedding_calls;
}

std::shared_ptr<Backend> make_backend(const RunConfig& config) {
  if (config.mock_backend) {
    auto backend = std::make_shared<MockBackend>();
    if (!config.mock_spec.empty()) backend->load_spec_file(config.mock_spec);
    return backend;
  }
  return std::make_shared<HttpBackend>();
}

ModelGateway make_gateway(const RunConfig& config,
                          std::shared_ptr<Backend> backend) {
  GatewayOptions options;
  options.cache_enabled = config.cache_enabled;
  options.cache_dir = config.cache_dir;
  options.retry.max_attempts = config.retry_max_attempts;
  options.retry.initial_backoff =
      std::chrono::milliseconds(config.retry_initial_backoff_ms);
  options.parallelism = config.parallelism;
  return ModelGateway(std::move(backend), options);
}

ClusteringConfig make_clustering_config(const RunConfig& config) {
  ClusteringConfig out;
  out.k1 = config.cluster_k1;
  out.seed = config.seed;
  if (!config.cluster_context_path.empty()) {
    out.context = read_text_file(config.cluster_context_path);
  }
  out.prompts = PromptSet::defaults();
  if (!config.cluster_prompt_dir.empty()) {
    out.prompts.load_overrides(config.cluster_prompt_dir);
  }
  out.parallelism = config.parallelism;
  out.chat_endpoint = config.chat_endpoint;
  out.embedding_endpoint = config.embedding_endpoint;
  return out;
}

CompletionConfig make_completion_config(const RunConfig& config,
                                        const PromptSet& prompts) {
  CompletionConfig out;
  out.strategy = config.completion_strategy;
  out.patterns = config.completion_patterns;
  out.max_continuation_tokens = config.max_continuation_tokens;
  out.empty_is_complete = config.empty_is_complete;
  out.match_window = static_cast<std::size_t>(config.match_window);
  out.strict_suffix = config.strict_suffix;
  out.truncate_fraction = config.truncate_fraction;
  out.end_tag = config.end_tag;
  out.prompts = prompts;
  out.completion_endpoint = config.completion_endpoint;
  out.chat_endpoint = config.chat_endpoint;
  return out;
}

// Collects artifact content in memory during a phase; the pipeline writes
// everything only after the phase body returns.
using ArtifactMap = std::map<std::string, std::string>;

struct PipelineState {
  ModelGateway& gateway;
  std::filesystem::path out_dir;
  RunManifest manifest;
};

template <typename Fn>
void run_phase(PipelineState& state, const std::string& name, Fn&& body) {
  CallStats before = state.gateway.stats();
  auto start = std::chrono::steady_clock::now();
  ArtifactMap artifacts;
  try {
    body(artifacts);
  } catch (...) {
    for (const auto& [rel, content] : artifacts) {
      write_text_file_atomic((state.out_dir / (rel + ".partial")).string(),
                             content);
    }
    throw;
  }
  auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - start);
  for (const auto& [rel, content] : artifacts) {
    write_text_file_atomic((state.out_dir / rel).string(), content);
    state.manifest.artifacts.push_back(
        ManifestArtifact{rel, fnv1a64_hex(content)});
  }
  ManifestPhase phase;
  phase.name = name;
  phase.wall_ms = elapsed.count();
  phase.llm_calls = total_calls(state.gateway.stats()) - total_calls(before);
  state.manifest.phases.push_back(std::move(phase));
}

std::string render_manifest(const RunManifest& manifest) {
  json phases = json::array();
  for (const ManifestPhase& phase : manifest.phases) {
    phases.push_back({{"name", phase.name},
                      {"wall_ms", phase.wall_ms},
                      {"llm_calls", phase.llm_calls}});
  }
  json artifacts = json::array();
  for (const ManifestArtifact& artifact : manifest.artifacts) {
    artifacts.push_back(
        {{"path", artifact.path}, {"fnv1a64", artifact.fnv1a64}});
  }
  json out = {{"config_hash", manifest.config_hash},
              {"tool_version", manifest.tool_version},
              {"llm_calls", manifest.llm_calls},
              {"cache_hits", manifest.cache_hits},
              {"phases", phases},
              {"artifacts", artifacts},
              {"tree_digest", manifest.tree_digest}};
  return out.dump(2) + "\n";
}

std::string digest_artifacts(std::vector<ManifestArtifact> artifacts) {
  std::sort(artifacts.begin(), artifacts.end(),
            [](const ManifestArtifact& a, const ManifestArtifact& b) {
              return a.path < b.path;
            });
  std::string blob;
  for (const ManifestArtifact& artifact : artifacts) {
    blob += artifact.path;
    blob += ":";
    blob += artifact.fnv1a64;
    blob += "\n";
  }
  return fnv1a64_hex(blob);
}

}  // namespace

const std::string& metric_name(Metric metric) {
  static const std::string kNames[] = {"cluster",    "baseline", "stability",
                                       "completion", "rtree",    "sft"};
  switch (metric) {
    case Metric::cluster:
      return kNames[0];
    case Metric::baseline:
      return kNames[1];
    case Metric::stability:
      return kNames[2];
    case Metric::completion:
      return kNames[3];
    case Metric::rtree:
      return kNames[4];
    case Metric::sft:
      return kNames[5];
  }
  throw Error("metric_name: invalid metric");
}

Metric metric_from_name(const std::string& name) {
  if (name == "cluster") return Metric::cluster;
  if (name == "baseline") return Metric::baseline;
  if (name == "stability") return Metric::stability;
  if (name == "completion") return Metric::completion;
  if (name == "rtree") return Metric::rtree;
  if (name == "sft") return Metric::sft;
  throw Error("unknown metric \"" + name + "\"");
}

RunManifest run_pipeline(const RunConfig& config,
                         const std::vector<Metric>& metrics) {
  std::shared_ptr<Backend> backend = make_backend(config);
  ModelGateway gateway = make_gateway(config, backend);

  PipelineState state{gateway, std::filesystem::path(config.output_dir),
                      RunManifest{}};
  state.manifest.config_hash = config.config_hash;
  state.manifest.tool_version = kToolVersion;
  ensure_directory(config.output_dir);

  std::vector<Interaction> dataset;
  run_phase(state, "ingest", [&](ArtifactMap& artifacts) {
    std::vector<std::pair<std::string, std::size_t>> files;
    std::map<std::string, std::string> seen;  // id -> first file
    std::size_t complete_labeled = 0;
    std::size_t total_pairs = 0;
    for (const std::string& path : config.dataset) {
      std::vector<Interaction> loaded = ingest_dataset(path);
      files.emplace_back(path, loaded.size());
      for (Interaction& interaction : loaded) {
        auto [it, inserted] = seen.emplace(interaction.id, path);
        if (!inserted) {
          throw IoError("duplicate id \"" + interaction.id + "\" in " +
                        it->second + " and " + path);
        }
        if (interaction.complete_label.has_value()) ++complete_labeled;
        total_pairs += static_cast<std::size_t>(interaction.n_turns);
        dataset.push_back(std::move(interaction));
      }
    }
    artifacts["dataset_report.json"] =
        render_dataset_report(files, complete_labeled, total_pairs);
  });

  std::set<Metric> requested(metrics.begin(), metrics.end());
  ClusteringConfig clustering_config = make_clustering_config(config);

  if (requested.count(Metric::cluster) != 0) {
    run_phase(state, "cluster", [&](ArtifactMap& artifacts) {
      CallStats before = gateway.stats();
      ClusteringResult result =
          run_clustering(dataset, gateway, clustering_config);
      std::uint64_t calls = total_calls(gateway.stats()) - total_calls(before);
      artifacts["summaries.jsonl"] = render_summaries(result.summaries);
      artifacts["clusters.json"] = render_clusters(result);
      artifacts["cluster_manifest.json"] = render_cluster_manifest(
          config.seed, config.cluster_k1, result, calls);
    });
  }

  if (requested.count(Metric::baseline) != 0) {
    run_phase(state, "baseline", [&](ArtifactMap& artifacts) {
      BaselineResult result =
          baseline_llm_labels(dataset, gateway, clustering_config);
      artifacts["baseline.json"] = render_baseline(result);
    });
  }

  if (requested.count(Metric::stability) != 0) {
    run_phase(state, "stability", [&](ArtifactMap& artifacts) {
      ClusteringResult first =
          run_clustering(dataset, gateway, clustering_config);
      ClusteringResult second =
          run_clustering(dataset, gateway, clustering_config);
      StabilityResult stability =
          stability_matrix(first.set.assignments, second.set.assignments);
      artifacts["stability.csv"] = render_stability_csv(stability);
      artifacts["stability.json"] = render_stability_json(stability);
    });
  }

  if (requested.count(Metric::completion) != 0) {
    run_phase(state, "completion", [&](ArtifactMap& artifacts) {
      CompletionConfig completion_config =
          make_completion_config(config, clustering_config.prompts);
      Rng rng(config.seed);
      std::vector<Interaction> eval =
          prepare_completion_eval(dataset, rng, config.truncate_fraction);
      std::vector<CompletionVerdict> verdicts = parallel_map(
          eval.size(),
          [&](std::size_t i) {
            return label_completion(eval[i], gateway, completion_config);
          },
          config.parallelism);
      artifacts["verdicts.jsonl"] = render_verdicts(verdicts);
      artifacts["metrics_report.json"] =
          render_metrics_report(classification_metrics(verdicts));
    });
  }

  if (requested.count(Metric::rtree) != 0) {
    run_phase(state, "rtree", [&](ArtifactMap& artifacts) {
      TreeConfig tree_config;
      tree_config.alpha = config.rtree_alpha;
      tree_config.mode = config.rtree_mode;
      tree_config.node_budget = config.rtree_budget;
      tree_config.endpoint = config.completion_endpoint;
      tree_config.endpoint.params.top_k_logprobs = config.rtree_top_k;

      std::vector<const Interaction*> eligible;
      for (const Interaction& interaction : dataset) {
        if (!interaction.turns.empty() &&
            interaction.turns.back().role == Role::assistant) {
          eligible.push_back(&interaction);
        }
      }
      std::size_t skipped = dataset.size() - eligible.size();

      std::vector<std::pair<std::string, ResponseTree>> trees = parallel_map(
          eligible.size(),
          [&](std::size_t i) {
            return std::make_pair(
                eligible[i]->id,
                build_tree(gateway, tree_config, sft_input(*eligible[i])));
          },
          config.parallelism);

      std::vector<TreeRecord> records;
      std::map<std::string, double> labels;
      for (std::size_t i = 0; i < trees.size(); ++i) {
        records.push_back(make_tree_record(trees[i].second, trees[i].first));
        if (eligible[i]->complete_label.has_value()) {
          labels[trees[i].first] = *eligible[i]->complete_label ? 1.0 : 0.0;
        }
      }
      TreeStats stats = tree_stats(records, labels, config.rtree_bins,
                                   config.rtree_include_cut);
      artifacts["tree_dump.jsonl"] = render_tree_dump(trees);
      artifacts["tree_stats.csv"] = render_tree_stats_csv(records);
      artifacts["tree_aggregates.json"] =
          render_tree_aggregates(stats, skipped);
    });
  }

  if (requested.count(Metric::sft) != 0) {
    run_phase(state, "sft", [&](ArtifactMap& artifacts) {
      std::vector<SftPair> pairs = export_sft_pairs(dataset, config.end_tag);
      artifacts["sft_pairs.jsonl"] = render_sft_pairs(pairs);
    });
  }

  CallStats final_stats = gateway.stats();
  state.manifest.llm_calls = total_calls(final_stats);
  state.manifest.cache_hits = final_stats.cache_hits;
  state.manifest.tree_digest = digest_artifacts(state.manifest.artifacts);
  write_text_file_atomic((state.out_dir / "run_manifest.json").string(),
                         render_manifest(state.manifest));
  return state.manifest;
}

}  // namespace goalgauge
