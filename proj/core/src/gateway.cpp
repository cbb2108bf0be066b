#include "goalgauge/gateway.hpp"

#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <set>
#include <thread>

#include <json.hpp>

#include "goalgauge/errors.hpp"
#include "goalgauge/hash.hpp"

namespace goalgauge {

using nlohmann::json;

namespace {

constexpr double kMassTolerance = 1e-6;
constexpr double kLogprobSlack = 1e-9;

const std::set<std::string> kChatRoles = {"system", "user", "assistant",
                                          "tool"};

json params_to_json(const GenerationParams& params) {
  return {{"max_output_tokens", params.max_output_tokens},
          {"top_k_logprobs", params.top_k_logprobs},
          {"temperature", params.temperature},
          {"stop", params.stop}};
}

std::string endpoint_identity(const std::string& backend_name,
                              const ModelEndpoint& endpoint) {
  return backend_name + "|" + endpoint_kind_name(endpoint.kind) + "|" +
         endpoint.base_url + "|" + endpoint.model_name;
}

json steps_to_json(const CompletionResult& result) {
  json steps = json::array();
  for (const TokenStep& step : result.steps) {
    json alternatives = json::array();
    for (const auto& [token, logprob] : step.alternatives) {
      alternatives.push_back({token, logprob});
    }
    steps.push_back({{"token", step.token},
                     {"logprob", step.logprob},
                     {"alternatives", std::move(alternatives)}});
  }
  return {{"steps", std::move(steps)},
          {"stop_reason", static_cast<int>(result.stop_reason)}};
}

CompletionResult steps_from_json(const json& value) {
  CompletionResult result;
  result.stop_reason = static_cast<StopReason>(value["stop_reason"].get<int>());
  for (const json& s : value["steps"]) {
    TokenStep step;
    step.token = s["token"].get<std::string>();
    step.logprob = s["logprob"].get<double>();
    for (const json& alt : s["alternatives"]) {
      step.alternatives.emplace_back(alt[0].get<std::string>(),
                                     alt[1].get<double>());
    }
    result.steps.push_back(std::move(step));
  }
  return result;
}

}  // namespace

const std::string& endpoint_kind_name(EndpointKind kind) {
  static const std::string kNames[] = {"chat", "completion", "embedding"};
  return kNames[static_cast<int>(kind)];
}

std::string CompletionResult::text() const {
  std::string out;
  for (const TokenStep& step : steps) out += step.token;
  return out;
}

double EmbeddingVector::norm() const {
  double sum = 0.0;
  for (double v : values) sum += v * v;
  return std::sqrt(sum);
}

void validate_token_steps(const std::vector<TokenStep>& steps) {
  for (const TokenStep& step : steps) {
    if (step.alternatives.empty()) {
      throw ApiError("backend returned a token step without alternatives");
    }
    if (step.alternatives[0].first != step.token ||
        step.alternatives[0].second != step.logprob) {
      throw ApiError(
          "backend logprobs malformed: alternatives[0] must echo the chosen "
          "token");
    }
    double mass = 0.0;
    for (std::size_t i = 0; i < step.alternatives.size(); ++i) {
      const auto& [token, logprob] = step.alternatives[i];
      if (!std::isfinite(logprob) || logprob > kLogprobSlack) {
        throw ApiError("backend logprobs malformed: logprob " +
                       std::to_string(logprob) + " for token \"" + token +
                       "\"");
      }
      if (i > 0) {
        const auto& [prev_token, prev_logprob] = step.alternatives[i - 1];
        bool ordered = logprob < prev_logprob ||
                       (logprob == prev_logprob && token > prev_token);
        if (!ordered) {
          throw ApiError(
              "backend logprobs malformed: alternatives out of order");
        }
      }
      mass += std::exp(logprob);
    }
    if (mass > 1.0 + kMassTolerance) {
      throw ApiError("backend logprobs malformed: probability mass " +
                     std::to_string(mass) + " exceeds 1");
    }
  }
}

// Counting limiter; one per endpoint identity.
class ModelGateway::Limiter {
 public:
  explicit Limiter(int capacity) : capacity_(capacity < 1 ? 1 : capacity) {}

  void acquire() {
    std::unique_lock<std::mutex> lock(mutex_);
    cv_.wait(lock, [this] { return in_flight_ < capacity_; });
    ++in_flight_;
  }

  void release() {
    {
      std::lock_guard<std::mutex> lock(mutex_);
      --in_flight_;
    }
    cv_.notify_one();
  }

 private:
  int capacity_;
  int in_flight_ = 0;
  std::mutex mutex_;
  std::condition_variable cv_;
};

namespace {

struct LimiterRelease {
  ModelGateway::Limiter* limiter;
  ~LimiterRelease() { limiter->release(); }
};

}  // namespace

ModelGateway::ModelGateway(std::shared_ptr<Backend> backend,
                           GatewayOptions options)
    : backend_(std::move(backend)), options_(std::move(options)) {
  if (!backend_) throw ConfigError("gateway: backend must not be null");
  std::string dir = options_.cache_dir;
  if (dir.empty()) {
    if (const char* env = std::getenv("GOALGAUGE_CACHE_DIR")) dir = env;
  }
  cache_ = std::make_unique<ResponseCache>(options_.cache_enabled, dir);
}

ModelGateway::~ModelGateway() = default;

ModelGateway::Limiter& ModelGateway::limiter_for(
    const ModelEndpoint& endpoint) {
  std::lock_guard<std::mutex> lock(mutex_);
  std::string key = endpoint_identity(backend_->name(), endpoint);
  auto it = limiters_.find(key);
  if (it == limiters_.end()) {
    it = limiters_
             .emplace(key, std::make_unique<Limiter>(options_.parallelism))
             .first;
  }
  return *it->second;
}

template <typename F>
auto ModelGateway::with_retries(F&& call) -> decltype(call()) {
  int attempt = 0;
  for (;;) {
    try {
      return call();
    } catch (const TransientError& e) {
      ++attempt;
      if (attempt >= options_.retry.max_attempts) {
        throw TransientError("backend failed after " +
                                 std::to_string(attempt) +
                                 " attempts: " + e.what(),
                             e.status());
      }
      {
        std::lock_guard<std::mutex> lock(mutex_);
        ++stats_.retries;
      }
      auto delay = options_.retry.initial_backoff * (1LL << (attempt - 1));
      if (delay.count() > 0) std::this_thread::sleep_for(delay);
    }
  }
}

std::string ModelGateway::chat(const ModelEndpoint& endpoint,
                               const std::vector<ChatMessage>& messages) {
  if (endpoint.model_name.empty()) {
    throw ConfigError("chat: endpoint model_name is empty");
  }
  if (messages.empty()) throw Error("chat: empty message list");
  for (const ChatMessage& message : messages) {
    if (kChatRoles.count(message.role) == 0) {
      throw Error("chat: unknown role \"" + message.role + "\"");
    }
  }
  json request = {{"endpoint", endpoint_identity(backend_->name(), endpoint)},
                  {"params", params_to_json(endpoint.params)},
                  {"messages", json::array()}};
  for (const ChatMessage& message : messages) {
    request["messages"].push_back(
        {{"role", message.role}, {"content", message.content}});
  }
  std::string key = fnv1a64_hex(request.dump());
  if (auto hit = cache_->get(key)) {
    std::lock_guard<std::mutex> lock(mutex_);
    ++stats_.cache_hits;
    return json::parse(*hit)["text"].get<std::string>();
  }
  Limiter& limiter = limiter_for(endpoint);
  limiter.acquire();
  std::string reply;
  {
    LimiterRelease release{&limiter};
    reply = with_retries([&] { return backend_->chat(endpoint, messages); });
  }
  {
    std::lock_guard<std::mutex> lock(mutex_);
    ++stats_.chat_calls;
  }
  cache_->put(key, json({{"text", reply}}).dump());
  return reply;
}

CompletionResult ModelGateway::complete_with_logprobs(
    const ModelEndpoint& endpoint, const std::string& prefix) {
  return complete_with_logprobs(endpoint, prefix, endpoint.params);
}

CompletionResult ModelGateway::complete_with_logprobs(
    const ModelEndpoint& endpoint, const std::string& prefix,
    const GenerationParams& params) {
  if (endpoint.model_name.empty()) {
    throw ConfigError("completion: endpoint model_name is empty");
  }
  json request = {{"endpoint", endpoint_identity(backend_->name(), endpoint)},
                  {"params", params_to_json(params)},
                  {"prefix", prefix}};
  std::string key = fnv1a64_hex(request.dump());
  if (auto hit = cache_->get(key)) {
    std::lock_guard<std::mutex> lock(mutex_);
    ++stats_.cache_hits;
    return steps_from_json(json::parse(*hit));
  }
  Limiter& limiter = limiter_for(endpoint);
  limiter.acquire();
  CompletionResult result;
  {
    LimiterRelease release{&limiter};
    result = with_retries(
        [&] { return backend_->complete(endpoint, prefix, params); });
  }
  validate_token_steps(result.steps);
  {
    std::lock_guard<std::mutex> lock(mutex_);
    ++stats_.completion_calls;
  }
  cache_->put(key, steps_to_json(result).dump());
  return result;
}

std::vector<EmbeddingVector> ModelGateway::embed_batch(
    const ModelEndpoint& endpoint, const std::vector<std::string>& texts) {
  if (endpoint.model_name.empty()) {
    throw ConfigError("embedding: endpoint model_name is empty");
  }
  if (texts.empty()) throw Error("embed_batch: empty text list");
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (texts[i].empty()) {
      throw Error("embed_batch: empty text at index " + std::to_string(i));
    }
  }
  std::string identity = endpoint_identity(backend_->name(), endpoint);
  auto key_for = [&](const std::string& text) {
    json request = {
        {"endpoint", identity}, {"model", endpoint.model_name}, {"text", text}};
    return fnv1a64_hex(request.dump());
  };
  std::vector<EmbeddingVector> out(texts.size());
  std::vector<bool> filled(texts.size(), false);
  std::set<std::string> misses;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (auto hit = cache_->get(key_for(texts[i]))) {
      std::lock_guard<std::mutex> lock(mutex_);
      ++stats_.cache_hits;
      out[i].values = json::parse(*hit)["values"].get<std::vector<double>>();
      filled[i] = true;
    } else {
      misses.insert(texts[i]);
    }
  }
  if (!misses.empty()) {
    std::vector<std::string> unique_texts(misses.begin(), misses.end());
    Limiter& limiter = limiter_for(endpoint);
    limiter.acquire();
    std::vector<std::vector<double>> vectors;
    {
      LimiterRelease release{&limiter};
      vectors = with_retries(
          [&] { return backend_->embed(endpoint, unique_texts); });
    }
    if (vectors.size() != unique_texts.size()) {
      throw ApiError("embedding: backend returned " +
                     std::to_string(vectors.size()) + " vectors for " +
                     std::to_string(unique_texts.size()) + " texts");
    }
    {
      std::lock_guard<std::mutex> lock(mutex_);
      ++stats_.embedding_calls;
    }
    std::map<std::string, const std::vector<double>*> by_text;
    for (std::size_t i = 0; i < unique_texts.size(); ++i) {
      by_text[unique_texts[i]] = &vectors[i];
      cache_->put(key_for(unique_texts[i]),
                  json({{"values", vectors[i]}}).dump());
    }
    for (std::size_t i = 0; i < texts.size(); ++i) {
      if (!filled[i]) {
        out[i].values = *by_text.at(texts[i]);
        filled[i] = true;
      }
    }
  }
  std::size_t dim = out[0].dim();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].dim() != dim) {
      throw ApiError("embedding: inconsistent dimensions in batch");
    }
    if (!(out[i].norm() > 0.0)) {
      throw ApiError("embedding: zero-norm vector at index " +
                     std::to_string(i));
    }
  }
  return out;
}

CallStats ModelGateway::stats() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return stats_;
}

}  // namespace goalgauge
