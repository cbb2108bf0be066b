#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "goalgauge/gateway.hpp"

namespace goalgauge {

// Finite-state token distribution: a state is the sequence of tokens emitted
// so far; a state absent from the table ends the sequence. Per-state
// probabilities must sum to 1 within 1e-6. The model resumes mid-sequence by
// matching the longest state whose concatenated emission is a suffix of the
// prompt, so re-rendered branch prompts continue where they left off.
struct ScriptedTable {
  std::map<std::vector<std::string>, std::map<std::string, double>> states;

  void validate() const;
};

// Deterministic offline backend.
//  - chat: exact prompt table (keyed by prompt hash), substring rules, an
//    optional programmable handler, then a default reply
//  - completion: prompt-conditioned emit rules, then the distribution table,
//    then a default emission
//  - embedding: seeded feature hashing of whitespace tokens into `dim`
//    buckets with +/-1 signs, L2-normalized
// Bit-reproducible across runs; also tracks in-flight concurrency and can
// inject transient failures for gateway tests.
class MockBackend : public Backend {
 public:
  using ChatHandler =
      std::function<std::optional<std::string>(const std::vector<ChatMessage>&)>;
  using CompletionHandler = std::function<std::optional<CompletionResult>(
      const std::string& prefix, const GenerationParams& params)>;

  MockBackend() = default;

  std::string name() const override { return "mock"; }
  std::string chat(const ModelEndpoint& endpoint,
                   const std::vector<ChatMessage>& messages) override;
  CompletionResult complete(const ModelEndpoint& endpoint,
                            const std::string& prefix,
                            const GenerationParams& params) override;
  std::vector<std::vector<double>> embed(
      const ModelEndpoint& endpoint,
      const std::vector<std::string>& texts) override;

  // Scripting surface. Matching order is documented on each capability.
  void script_chat_reply(const std::string& prompt, const std::string& reply);
  void script_chat_rule(std::vector<std::string> contains, std::string reply);
  void set_chat_default(std::string reply);
  void set_chat_handler(ChatHandler handler);

  void script_completion_emit(const std::string& prefix,
                              std::vector<std::string> emit);
  void script_completion_rule(std::vector<std::string> contains,
                              std::vector<std::string> emit);
  void set_completion_default(std::vector<std::string> emit);
  void set_completion_table(ScriptedTable table);
  void set_completion_handler(CompletionHandler handler);

  void set_embedding(std::size_t dim, std::uint64_t seed);

  // The next `times` calls on any capability raise a transient error with
  // the given status.
  void fail_next(int times, int status = 429);

  void set_reply_delay(std::chrono::milliseconds delay) { delay_ = delay; }

  int max_in_flight() const { return max_in_flight_.load(); }
  std::uint64_t call_count() const { return calls_.load(); }

  // Canonical text key for a chat request: "role: content\n" per message.
  static std::string chat_prompt_key(const std::vector<ChatMessage>& messages);

  // Line-delimited JSON records; see docs/mock-spec.md for the record set.
  void load_spec_file(const std::string& path);

  std::size_t embedding_dim() const { return embedding_dim_; }
  std::uint64_t embedding_seed() const { return embedding_seed_; }

 private:
  struct InFlight;

  void maybe_fail();
  CompletionResult run_table(const std::string& prefix,
                             const GenerationParams& params) const;
  static CompletionResult emit_tokens(const std::vector<std::string>& tokens,
                                      const GenerationParams& params);

  std::map<std::uint64_t, std::string> chat_exact_;
  std::vector<std::pair<std::vector<std::string>, std::string>> chat_rules_;
  std::optional<std::string> chat_default_;
  ChatHandler chat_handler_;

  std::map<std::uint64_t, std::vector<std::string>> completion_exact_;
  std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>>
      completion_rules_;
  std::optional<std::vector<std::string>> completion_default_;
  std::optional<ScriptedTable> table_;
  CompletionHandler completion_handler_;

  std::size_t embedding_dim_ = 8;
  std::uint64_t embedding_seed_ = 0;

  std::mutex fail_mutex_;
  int fail_remaining_ = 0;
  int fail_status_ = 429;

  std::chrono::milliseconds delay_{0};
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_in_flight_{0};
  std::atomic<std::uint64_t> calls_{0};
};

// The documented feature-hash embedder, exposed for golden-value tests.
std::vector<double> feature_hash_embedding(const std::string& text,
                                           std::size_t dim,
                                           std::uint64_t seed);

}  // namespace goalgauge
