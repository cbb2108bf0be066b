#include "goalgauge/http_backend.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>

#ifdef GOALGAUGE_HAS_OPENSSL
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>
#include <json.hpp>

#include "goalgauge/errors.hpp"

namespace goalgauge {

namespace {

using json = nlohmann::json;

std::atomic<std::uint64_t> g_http_backends{0};

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // leading path, possibly empty
};

SplitUrl split_base_url(const std::string& base_url) {
  std::size_t scheme = base_url.find("://");
  if (scheme == std::string::npos) {
    throw ApiError("endpoint base_url \"" + base_url +
                   "\" must include a scheme");
  }
  std::size_t slash = base_url.find('/', scheme + 3);
  SplitUrl split;
  if (slash == std::string::npos) {
    split.origin = base_url;
  } else {
    split.origin = base_url.substr(0, slash);
    split.prefix = base_url.substr(slash);
  }
  while (!split.prefix.empty() && split.prefix.back() == '/') {
    split.prefix.pop_back();
  }
  return split;
}

json parse_body(const httplib::Response& response) {
  json body = json::parse(response.body, nullptr, false);
  if (body.is_discarded()) {
    throw ApiError("backend returned malformed JSON (status " +
                       std::to_string(response.status) + ")",
                   response.status);
  }
  return body;
}

StopReason stop_reason_from(const std::string& finish_reason) {
  if (finish_reason == "length") return StopReason::length;
  if (finish_reason == "stop_sequence") return StopReason::stop_sequence;
  return StopReason::eos;
}

}  // namespace

struct HttpBackend::Impl {
  std::string api_key;

  json post(const ModelEndpoint& endpoint, const std::string& path,
            const json& body) const {
    SplitUrl url = split_base_url(endpoint.base_url);
    httplib::Client client(url.origin);
    client.set_connection_timeout(30, 0);
    client.set_read_timeout(300, 0);
    httplib::Headers headers;
    if (!api_key.empty()) {
      headers.emplace("Authorization", "Bearer " + api_key);
    }
    httplib::Result result = client.Post(url.prefix + path, headers,
                                         body.dump(), "application/json");
    if (!result) {
      throw TransientError("http transport error: " +
                           httplib::to_string(result.error()));
    }
    if (result->status == 429 || result->status >= 500) {
      throw TransientError("http status " + std::to_string(result->status),
                           result->status);
    }
    if (result->status < 200 || result->status >= 300) {
      throw ApiError("http status " + std::to_string(result->status) + ": " +
                         result->body,
                     result->status);
    }
    return parse_body(*result);
  }
};

HttpBackend::HttpBackend() : impl_(std::make_unique<Impl>()) {
  if (const char* key = std::getenv("GOALGAUGE_API_KEY")) {
    impl_->api_key = key;
  }
  g_http_backends.fetch_add(1);
}

HttpBackend::~HttpBackend() = default;

std::uint64_t HttpBackend::instances_created() {
  return g_http_backends.load();
}

std::string HttpBackend::chat(const ModelEndpoint& endpoint,
                              const std::vector<ChatMessage>& messages) {
  json body = {{"model", endpoint.model_name},
               {"temperature", endpoint.params.temperature}};
  json list = json::array();
  for (const ChatMessage& message : messages) {
    list.push_back({{"role", message.role}, {"content", message.content}});
  }
  body["messages"] = list;
  body["max_tokens"] = endpoint.params.max_output_tokens;
  if (!endpoint.params.stop.empty()) body["stop"] = endpoint.params.stop;

  json response = impl_->post(endpoint, "/chat/completions", body);
  if (!response.contains("choices") || response["choices"].empty() ||
      !response["choices"][0].contains("message")) {
    throw ApiError("chat response missing choices[0].message");
  }
  const json& message = response["choices"][0]["message"];
  if (!message.contains("content") || !message["content"].is_string()) {
    throw ApiError("chat response missing choices[0].message.content");
  }
  return message["content"].get<std::string>();
}

CompletionResult HttpBackend::complete(const ModelEndpoint& endpoint,
                                       const std::string& prefix,
                                       const GenerationParams& params) {
  json body = {{"model", endpoint.model_name},
               {"prompt", prefix},
               {"max_tokens", params.max_output_tokens},
               {"temperature", params.temperature},
               {"logprobs", params.top_k_logprobs},
               {"echo", false}};
  if (!params.stop.empty()) body["stop"] = params.stop;

  json response = impl_->post(endpoint, "/completions", body);
  if (!response.contains("choices") || response["choices"].empty()) {
    throw ApiError("completion response missing choices");
  }
  const json& choice = response["choices"][0];
  if (!choice.contains("logprobs") || choice["logprobs"].is_null()) {
    throw ApiError("completion response missing logprobs");
  }
  const json& logprobs = choice["logprobs"];
  const json& tokens = logprobs.at("tokens");
  const json& token_logprobs = logprobs.at("token_logprobs");
  const json& top_logprobs = logprobs.at("top_logprobs");
  if (!tokens.is_array() || !token_logprobs.is_array() ||
      !top_logprobs.is_array() || tokens.size() != token_logprobs.size() ||
      tokens.size() != top_logprobs.size()) {
    throw ApiError("completion logprobs arrays are inconsistent");
  }

  CompletionResult result;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (token_logprobs[i].is_null()) {
      throw ApiError("completion logprobs contain null entries");
    }
    TokenStep step;
    step.token = tokens[i].get<std::string>();
    step.logprob = token_logprobs[i].get<double>();

    step.alternatives.emplace_back(step.token, step.logprob);
    if (top_logprobs[i].is_object()) {
      for (auto it = top_logprobs[i].begin(); it != top_logprobs[i].end();
           ++it) {
        if (it.key() == step.token) continue;
        step.alternatives.emplace_back(it.key(), it.value().get<double>());
      }
    }
    std::sort(step.alternatives.begin(), step.alternatives.end(),
              [](const auto& a, const auto& b) {
                if (a.second != b.second) return a.second > b.second;
                return a.first < b.first;
              });
    if (step.alternatives[0].first != step.token) {
      throw ApiError(
          "completion was not greedy at token " + std::to_string(i) +
          "; response trees require temperature 0");
    }
    result.steps.push_back(std::move(step));
  }
  result.stop_reason =
      stop_reason_from(choice.value("finish_reason", "stop"));
  return result;
}

std::vector<std::vector<double>> HttpBackend::embed(
    const ModelEndpoint& endpoint, const std::vector<std::string>& texts) {
  json body = {{"model", endpoint.model_name}, {"input", texts}};
  json response = impl_->post(endpoint, "/embeddings", body);
  if (!response.contains("data") || !response["data"].is_array()) {
    throw ApiError("embedding response missing data");
  }
  std::vector<std::vector<double>> out(texts.size());
  std::vector<char> filled(texts.size(), 0);
  for (const json& item : response["data"]) {
    std::size_t index = item.at("index").get<std::size_t>();
    if (index >= out.size() || filled[index]) {
      throw ApiError("embedding response indexes are inconsistent");
    }
    out[index] = item.at("embedding").get<std::vector<double>>();
    filled[index] = 1;
  }
  for (std::size_t i = 0; i < filled.size(); ++i) {
    if (!filled[i]) {
      throw ApiError("embedding response missing index " + std::to_string(i));
    }
  }
  return out;
}

}  // namespace goalgauge
