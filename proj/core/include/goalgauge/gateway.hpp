#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "goalgauge/response_cache.hpp"

namespace goalgauge {

enum class EndpointKind { chat, completion, embedding };

const std::string& endpoint_kind_name(EndpointKind kind);

struct GenerationParams {
  int max_output_tokens = 64;
  int top_k_logprobs = 5;
  double temperature = 0.0;  // greedy decoding is the default everywhere
  std::vector<std::string> stop;
};

struct ModelEndpoint {
  EndpointKind kind = EndpointKind::chat;
  std::string base_url;  // empty for the mock backend
  std::string model_name;
  int context_length = 8192;
  GenerationParams params;
};

struct ChatMessage {
  std::string role;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

// One decoded token with its top-k alternatives. alternatives[0] is always
// the chosen token; the list is sorted by descending logprob, ties broken by
// ascending token byte order.
struct TokenStep {
  std::string token;
  double logprob = 0.0;  // natural log
  std::vector<std::pair<std::string, double>> alternatives;
};

enum class StopReason { eos, length, stop_sequence };

struct CompletionResult {
  std::vector<TokenStep> steps;
  StopReason stop_reason = StopReason::eos;

  std::string text() const;
};

struct EmbeddingVector {
  std::vector<double> values;

  std::size_t dim() const { return values.size(); }
  double norm() const;

  bool operator==(const EmbeddingVector&) const = default;
};

struct CallStats {
  std::uint64_t chat_calls = 0;
  std::uint64_t completion_calls = 0;
  std::uint64_t embedding_calls = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t retries = 0;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string name() const = 0;
  virtual std::string chat(const ModelEndpoint& endpoint,
                           const std::vector<ChatMessage>& messages) = 0;
  virtual CompletionResult complete(const ModelEndpoint& endpoint,
                                    const std::string& prefix,
                                    const GenerationParams& params) = 0;
  virtual std::vector<std::vector<double>> embed(
      const ModelEndpoint& endpoint,
      const std::vector<std::string>& texts) = 0;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{100};
};

struct GatewayOptions {
  bool cache_enabled = true;
  // Empty: fall back to GOALGAUGE_CACHE_DIR, else cache in memory only.
  std::string cache_dir;
  RetryPolicy retry;
  int parallelism = 4;  // per-endpoint in-flight cap
};

// Single entry point for every model call. Adds response caching keyed by
// request content, bounded retries with exponential backoff for transient
// failures, per-endpoint parallelism limits and call accounting.
class ModelGateway {
 public:
  class Limiter;

  ModelGateway(std::shared_ptr<Backend> backend, GatewayOptions options = {});
  ~ModelGateway();

  std::string chat(const ModelEndpoint& endpoint,
                   const std::vector<ChatMessage>& messages);

  CompletionResult complete_with_logprobs(const ModelEndpoint& endpoint,
                                          const std::string& prefix);
  CompletionResult complete_with_logprobs(const ModelEndpoint& endpoint,
                                          const std::string& prefix,
                                          const GenerationParams& params);

  // Cached per (model_name, text); one backend call covers all misses.
  std::vector<EmbeddingVector> embed_batch(
      const ModelEndpoint& endpoint, const std::vector<std::string>& texts);

  CallStats stats() const;
  const Backend& backend() const { return *backend_; }
  const GatewayOptions& options() const { return options_; }

 private:
  template <typename F>
  auto with_retries(F&& call) -> decltype(call());
  Limiter& limiter_for(const ModelEndpoint& endpoint);

  std::shared_ptr<Backend> backend_;
  GatewayOptions options_;
  std::unique_ptr<ResponseCache> cache_;
  mutable std::mutex mutex_;
  std::map<std::string, std::unique_ptr<Limiter>> limiters_;
  CallStats stats_;
};

// Validates backend token steps: alternatives[0] echoes the chosen token,
// logprobs are finite and non-positive, rank order is (-logprob, token), and
// per-step probability mass stays within 1 + 1e-6.
void validate_token_steps(const std::vector<TokenStep>& steps);

}  // namespace goalgauge
