#pragma once

#include <memory>
#include <string>
#include <vector>

#include "goalgauge/gateway.hpp"

namespace goalgauge {

// OpenAI-style HTTP backend: POSTs /chat/completions, /completions and
// /embeddings relative to each endpoint's base_url. Reads the bearer token
// from GOALGAUGE_API_KEY when set. Transport failures and 429/5xx statuses
// raise TransientError (the gateway retries those); other failures raise
// ApiError. Completion requests always ask for logprobs and require greedy
// decoding, since the response tree is only meaningful over argmax tokens.
class HttpBackend : public Backend {
 public:
  HttpBackend();
  ~HttpBackend() override;

  std::string name() const override { return "http"; }
  std::string chat(const ModelEndpoint& endpoint,
                   const std::vector<ChatMessage>& messages) override;
  CompletionResult complete(const ModelEndpoint& endpoint,
                            const std::string& prefix,
                            const GenerationParams& params) override;
  std::vector<std::vector<double>> embed(
      const ModelEndpoint& endpoint,
      const std::vector<std::string>& texts) override;

  // Total HttpBackend objects ever constructed in this process. Lets tests
  // prove that mock-backed runs never touch the network path.
  static std::uint64_t instances_created();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace goalgauge
