#include "goalgauge/config.hpp"

#include <set>

#include <json.hpp>

#include "goalgauge/errors.hpp"
#include "goalgauge/hash.hpp"
#include "goalgauge/io.hpp"

namespace goalgauge {

namespace {

using json = nlohmann::json;

// Cursor over one JSON object. Typed getters record which keys were read;
// finish() rejects whatever is left, so new config keys must be consumed
// explicitly before they are accepted.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) {
      throw ConfigError(path_ + ": must be an object");
    }
  }

  std::string child_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  bool has(const std::string& key) const { return node_.contains(key); }

  const json* take(const std::string& key) {
    seen_.insert(key);
    auto it = node_.find(key);
    return it == node_.end() ? nullptr : &*it;
  }

  const json& require(const std::string& key) {
    const json* value = take(key);
    if (value == nullptr) throw ConfigError(child_path(key) + ": required");
    return *value;
  }

  std::string require_string(const std::string& key) {
    const json& value = require(key);
    if (!value.is_string()) {
      throw ConfigError(child_path(key) + ": must be a string");
    }
    return value.get<std::string>();
  }

  std::string get_string(const std::string& key, std::string fallback) {
    const json* value = take(key);
    if (value == nullptr) return fallback;
    if (!value->is_string()) {
      throw ConfigError(child_path(key) + ": must be a string");
    }
    return value->get<std::string>();
  }

  bool get_bool(const std::string& key, bool fallback) {
    const json* value = take(key);
    if (value == nullptr) return fallback;
    if (!value->is_boolean()) {
      throw ConfigError(child_path(key) + ": must be a boolean");
    }
    return value->get<bool>();
  }

  int get_int(const std::string& key, int fallback) {
    const json* value = take(key);
    if (value == nullptr) return fallback;
    if (!value->is_number_integer()) {
      throw ConfigError(child_path(key) + ": must be an integer");
    }
    return value->get<int>();
  }

  double get_double(const std::string& key, double fallback) {
    const json* value = take(key);
    if (value == nullptr) return fallback;
    if (!value->is_number()) {
      throw ConfigError(child_path(key) + ": must be a number");
    }
    return value->get<double>();
  }

  std::vector<std::string> get_string_array(const std::string& key,
                                            std::vector<std::string> fallback) {
    const json* value = take(key);
    if (value == nullptr) return fallback;
    if (!value->is_array()) {
      throw ConfigError(child_path(key) + ": must be an array of strings");
    }
    std::vector<std::string> out;
    for (const auto& item : *value) {
      if (!item.is_string()) {
        throw ConfigError(child_path(key) + ": must be an array of strings");
      }
      out.push_back(item.get<std::string>());
    }
    return out;
  }

  void finish() const {
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      if (seen_.count(it.key()) == 0) {
        std::string prefix = path_.empty() ? "" : path_ + ": ";
        throw ConfigError(prefix + "unexpected field \"" + it.key() + "\"");
      }
    }
  }

  const json& node() const { return node_; }

 private:
  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

ModelEndpoint live_endpoint(Section& backend, const std::string& key,
                            EndpointKind kind) {
  const json& node = backend.require(key);
  Section section(node, backend.child_path(key));
  ModelEndpoint endpoint;
  endpoint.kind = kind;
  endpoint.base_url = section.require_string("base_url");
  endpoint.model_name = section.require_string("model");
  endpoint.context_length = section.get_int("context_length", 8192);
  if (endpoint.context_length < 1) {
    throw ConfigError(section.child_path("context_length") +
                      ": must be at least 1");
  }
  section.finish();
  return endpoint;
}

ModelEndpoint mock_endpoint(EndpointKind kind, const std::string& model) {
  ModelEndpoint endpoint;
  endpoint.kind = kind;
  endpoint.base_url = "mock://";
  endpoint.model_name = model;
  return endpoint;
}

void parse_backend(RunConfig& config, const json& node) {
  Section backend(node, "backend");
  bool has_mock = backend.has("mock");
  bool has_live = backend.has("chat") || backend.has("completion") ||
                  backend.has("embedding");
  if (has_mock && has_live) {
    throw ConfigError(
        "backend: provide either mock or live endpoints, not both");
  }
  if (!has_mock && !has_live) {
    throw ConfigError("backend: missing model configuration");
  }
  if (has_mock) {
    config.mock_backend = true;
    Section mock(backend.require("mock"), "backend.mock");
    config.mock_spec = mock.get_string("spec", "");
    mock.finish();
    config.chat_endpoint = mock_endpoint(EndpointKind::chat, "mock-chat");
    config.completion_endpoint =
        mock_endpoint(EndpointKind::completion, "mock-completion");
    config.embedding_endpoint =
        mock_endpoint(EndpointKind::embedding, "mock-embedding");
  } else {
    config.mock_backend = false;
    config.chat_endpoint = live_endpoint(backend, "chat", EndpointKind::chat);
    config.completion_endpoint =
        live_endpoint(backend, "completion", EndpointKind::completion);
    config.embedding_endpoint =
        live_endpoint(backend, "embedding", EndpointKind::embedding);
  }

  if (backend.has("cache")) {
    Section cache(backend.require("cache"), "backend.cache");
    config.cache_enabled = cache.get_bool("enabled", true);
    config.cache_dir = cache.get_string("dir", "");
    cache.finish();
  } else {
    backend.take("cache");
  }
  if (backend.has("retries")) {
    Section retries(backend.require("retries"), "backend.retries");
    config.retry_max_attempts = retries.get_int("max_attempts", 3);
    config.retry_initial_backoff_ms =
        retries.get_int("initial_backoff_ms", 100);
    retries.finish();
    if (config.retry_max_attempts < 1) {
      throw ConfigError("backend.retries.max_attempts: must be at least 1");
    }
    if (config.retry_initial_backoff_ms < 0) {
      throw ConfigError(
          "backend.retries.initial_backoff_ms: must be non-negative");
    }
  } else {
    backend.take("retries");
  }
  config.parallelism = backend.get_int("parallelism", 4);
  if (config.parallelism < 1) {
    throw ConfigError("backend.parallelism: must be at least 1");
  }
  backend.finish();
}

void parse_cluster(RunConfig& config, const json& node) {
  Section cluster(node, "cluster");
  config.cluster_k1 = cluster.get_int("k1", 20);
  if (config.cluster_k1 < 1) {
    throw ConfigError("cluster.k1: must be at least 1");
  }
  config.cluster_context_path = cluster.get_string("context_path", "");
  config.cluster_prompt_dir = cluster.get_string("prompt_dir", "");
  cluster.finish();
}

void parse_completion(RunConfig& config, const json& node) {
  Section completion(node, "completion");
  std::string strategy = completion.get_string(
      "strategy", completion_strategy_name(config.completion_strategy));
  try {
    config.completion_strategy = completion_strategy_from_name(strategy);
  } catch (const Error& e) {
    throw ConfigError(std::string("completion.strategy: ") + e.what());
  }
  config.completion_patterns =
      completion.get_string_array("patterns", config.completion_patterns);
  if (config.completion_patterns.empty()) {
    throw ConfigError("completion.patterns: must not be empty");
  }
  config.max_continuation_tokens =
      completion.get_int("max_continuation_tokens", 16);
  if (config.max_continuation_tokens < 1) {
    throw ConfigError(
        "completion.max_continuation_tokens: must be at least 1");
  }
  config.empty_is_complete =
      completion.get_bool("empty_is_complete", true);
  config.match_window = completion.get_int("match_window", 32);
  if (config.match_window < 1) {
    throw ConfigError("completion.match_window: must be at least 1");
  }
  config.strict_suffix = completion.get_bool("strict_suffix", false);
  config.truncate_fraction =
      completion.get_double("truncate_fraction", 0.5);
  if (config.truncate_fraction < 0.0 || config.truncate_fraction > 1.0) {
    throw ConfigError("completion.truncate_fraction: must be in [0, 1]");
  }
  config.end_tag = completion.get_string("end_tag", "<end>");
  completion.finish();
}

void parse_rtree(RunConfig& config, const json& node) {
  Section rtree(node, "rtree");
  config.rtree_alpha = rtree.get_double("alpha", 0.1);
  if (!(config.rtree_alpha > 0.0) || config.rtree_alpha > 1.0) {
    throw ConfigError("rtree.alpha: must be in (0, 1]");
  }
  std::string mode =
      rtree.get_string("mode", tree_mode_name(config.rtree_mode));
  try {
    config.rtree_mode = tree_mode_from_name(mode);
  } catch (const Error& e) {
    throw ConfigError(std::string("rtree.mode: ") + e.what());
  }
  config.rtree_budget = rtree.get_int("budget", 256);
  if (config.rtree_budget < 1) {
    throw ConfigError("rtree.budget: must be at least 1");
  }
  config.rtree_top_k = rtree.get_int("top_k", 5);
  if (config.rtree_top_k < 1) {
    throw ConfigError("rtree.top_k: must be at least 1");
  }
  config.rtree_include_cut = rtree.get_bool("include_cut", false);
  config.rtree_bins = rtree.get_int("bins", 10);
  if (config.rtree_bins < 1) {
    throw ConfigError("rtree.bins: must be at least 1");
  }
  rtree.finish();
}

}  // namespace

RunConfig RunConfig::from_file(const std::string& path) {
  return from_json_text(read_text_file(path));
}

RunConfig RunConfig::from_json_text(const std::string& text) {
  json root_node;
  try {
    root_node = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: malformed JSON: ") + e.what());
  }

  RunConfig config;
  Section root(root_node, "");

  const json& version = root.require("version");
  if (!version.is_number_integer() || version.get<int>() != 1) {
    throw ConfigError("version: must be 1");
  }
  config.version = 1;

  const json& seed = root.require("seed");
  if (!seed.is_number_unsigned() && !seed.is_number_integer()) {
    throw ConfigError("seed: must be a non-negative integer");
  }
  if (seed.is_number_integer() && seed.get<std::int64_t>() < 0) {
    throw ConfigError("seed: must be a non-negative integer");
  }
  config.seed = seed.get<std::uint64_t>();

  const json& dataset = root.require("dataset");
  if (!dataset.is_array() || dataset.empty()) {
    throw ConfigError("dataset: must be a non-empty array of file paths");
  }
  for (const auto& item : dataset) {
    if (!item.is_string()) {
      throw ConfigError("dataset: must be a non-empty array of file paths");
    }
    config.dataset.push_back(item.get<std::string>());
  }

  config.output_dir = root.require_string("output_dir");
  if (config.output_dir.empty()) {
    throw ConfigError("output_dir: must not be empty");
  }

  parse_backend(config, root.require("backend"));
  if (const json* cluster = root.take("cluster")) {
    parse_cluster(config, *cluster);
  }
  if (const json* completion = root.take("completion")) {
    parse_completion(config, *completion);
  }
  if (const json* rtree = root.take("rtree")) {
    parse_rtree(config, *rtree);
  }
  root.finish();

  config.config_hash = fnv1a64_hex(root_node.dump());
  return config;
}

std::string apply_config_override(const std::string& json_text,
                                  const std::string& dotted_key,
                                  const std::string& value) {
  if (dotted_key.empty()) {
    throw ConfigError("override: empty key");
  }
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: malformed JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config: must be a JSON object");

  std::vector<std::string> parts;
  std::string part;
  for (char c : dotted_key) {
    if (c == '.') {
      if (part.empty()) throw ConfigError("override: empty key segment");
      parts.push_back(part);
      part.clear();
    } else {
      part.push_back(c);
    }
  }
  if (part.empty()) throw ConfigError("override: empty key segment");
  parts.push_back(part);

  json* node = &root;
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    json& next = (*node)[parts[i]];
    if (next.is_null()) next = json::object();
    if (!next.is_object()) {
      throw ConfigError("override: " + parts[i] + " is not an object");
    }
    node = &next;
  }
  json parsed = json::parse(value, nullptr, false);
  (*node)[parts.back()] = parsed.is_discarded() ? json(value) : parsed;
  return root.dump();
}

}  // namespace goalgauge
