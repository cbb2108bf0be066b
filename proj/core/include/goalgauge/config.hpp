#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "goalgauge/completion.hpp"
#include "goalgauge/gateway.hpp"
#include "goalgauge/response_tree.hpp"

namespace goalgauge {

// Parsed run configuration. Validation is strict: every unknown key and
// every out-of-range value raises ConfigError naming the dotted field path
// (e.g. "rtree.alpha: must be in (0, 1]").
struct RunConfig {
  int version = 1;
  std::uint64_t seed = 0;
  std::vector<std::string> dataset;
  std::string output_dir;

  // Backend: either a mock spec or three live endpoints, never both.
  bool mock_backend = true;
  std::string mock_spec;  // optional JSONL scripting file
  ModelEndpoint chat_endpoint;
  ModelEndpoint completion_endpoint;
  ModelEndpoint embedding_endpoint;
  bool cache_enabled = true;
  std::string cache_dir;  // empty: GOALGAUGE_CACHE_DIR, else memory only
  int retry_max_attempts = 3;
  int retry_initial_backoff_ms = 100;
  int parallelism = 4;

  int cluster_k1 = 20;
  std::string cluster_context_path;  // file with the {context} paragraph
  std::string cluster_prompt_dir;    // prompt template overrides

  CompletionStrategy completion_strategy =
      CompletionStrategy::finetuned_continuation;
  std::vector<std::string> completion_patterns = default_end_tag_patterns();
  int max_continuation_tokens = 16;
  bool empty_is_complete = true;
  int match_window = 32;
  bool strict_suffix = false;
  double truncate_fraction = 0.5;
  std::string end_tag = "<end>";

  double rtree_alpha = 0.1;
  TreeMode rtree_mode = TreeMode::per_token;
  int rtree_budget = 256;
  int rtree_top_k = 5;
  bool rtree_include_cut = false;
  int rtree_bins = 10;

  // FNV-1a of the canonical JSON this config was parsed from.
  std::string config_hash;

  static RunConfig from_file(const std::string& path);
  static RunConfig from_json_text(const std::string& text);
};

// Applies one dotted-path override (e.g. "rtree.alpha=0.5" split into key and
// value) to a JSON config text and returns the new text. Values that parse as
// JSON are taken as-is, anything else as a string.
std::string apply_config_override(const std::string& json_text,
                                  const std::string& dotted_key,
                                  const std::string& value);

}  // namespace goalgauge
