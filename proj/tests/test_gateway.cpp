#include <doctest.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "goalgauge/errors.hpp"
#include "goalgauge/gateway.hpp"
#include "goalgauge/http_backend.hpp"
#include "goalgauge/mock_backend.hpp"
#include "goalgauge/parallel.hpp"
#include "test_support.hpp"

using namespace goalgauge;
using nlohmann::json;

namespace {

const ModelEndpoint kChat = test_support::mock_endpoint(EndpointKind::chat);
const ModelEndpoint kCompletion =
    test_support::mock_endpoint(EndpointKind::completion);
const ModelEndpoint kEmbedding =
    test_support::mock_endpoint(EndpointKind::embedding);

GatewayOptions fast_retry_options() {
  GatewayOptions options;
  options.retry.max_attempts = 3;
  options.retry.initial_backoff = std::chrono::milliseconds(1);
  return options;
}

// In-process OpenAI-style server for HttpBackend tests.
class TestServer {
 public:
  TestServer() = default;

  int start() {
    port_ = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port_ > 0);
    thread_ = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
    return port_;
  }

  ~TestServer() {
    server.stop();
    if (thread_.joinable()) thread_.join();
  }

  std::string base_url() const {
    return "http://127.0.0.1:" + std::to_string(port_) + "/v1";
  }

  httplib::Server server;

 private:
  int port_ = 0;
  std::thread thread_;
};

ModelEndpoint live_endpoint(EndpointKind kind, const std::string& base_url) {
  ModelEndpoint endpoint;
  endpoint.kind = kind;
  endpoint.base_url = base_url;
  endpoint.model_name = "test-model";
  return endpoint;
}

}  // namespace

TEST_CASE("gateway caches identical requests") {
  auto backend = std::make_shared<MockBackend>();
  backend->set_chat_default("reply");
  ModelGateway gateway(backend);

  CHECK(gateway.chat(kChat, {{"user", "q"}}) == "reply");
  CHECK(gateway.chat(kChat, {{"user", "q"}}) == "reply");
  CHECK(backend->call_count() == 1);
  CHECK(gateway.stats().chat_calls == 1);
  CHECK(gateway.stats().cache_hits == 1);

  // different params miss the cache
  ModelEndpoint other = kChat;
  other.params.temperature = 0.5;
  CHECK(gateway.chat(other, {{"user", "q"}}) == "reply");
  CHECK(backend->call_count() == 2);
}

TEST_CASE("gateway cache can be disabled") {
  auto backend = std::make_shared<MockBackend>();
  backend->set_chat_default("reply");
  GatewayOptions options;
  options.cache_enabled = false;
  ModelGateway gateway(backend, options);
  (void)gateway.chat(kChat, {{"user", "q"}});
  (void)gateway.chat(kChat, {{"user", "q"}});
  CHECK(backend->call_count() == 2);
  CHECK(gateway.stats().cache_hits == 0);
}

TEST_CASE("disk cache survives across gateway instances") {
  test_support::TempDir dir;
  GatewayOptions options;
  options.cache_dir = dir.path().string();

  auto first_backend = std::make_shared<MockBackend>();
  first_backend->set_chat_default("stored");
  ModelGateway first(first_backend, options);
  CHECK(first.chat(kChat, {{"user", "q"}}) == "stored");

  // fresh gateway, backend that would answer differently: the cache wins
  auto second_backend = std::make_shared<MockBackend>();
  second_backend->set_chat_default("different");
  ModelGateway second(second_backend, options);
  CHECK(second.chat(kChat, {{"user", "q"}}) == "stored");
  CHECK(second_backend->call_count() == 0);
  CHECK(second.stats().cache_hits == 1);
}

TEST_CASE("transient failures are retried with bounded attempts") {
  auto backend = std::make_shared<MockBackend>();
  backend->set_chat_default("ok");

  SUBCASE("recovers within the budget") {
    ModelGateway gateway(backend, fast_retry_options());
    backend->fail_next(2);
    CHECK(gateway.chat(kChat, {{"user", "q"}}) == "ok");
    CHECK(gateway.stats().retries == 2);
    CHECK(backend->call_count() == 3);
  }

  SUBCASE("gives up after max_attempts") {
    ModelGateway gateway(backend, fast_retry_options());
    backend->fail_next(5);
    CHECK_THROWS_WITH_AS((void)gateway.chat(kChat, {{"user", "q"}}),
                         doctest::Contains("after 3 attempts"),
                         TransientError);
    CHECK(backend->call_count() == 3);
  }

  SUBCASE("api errors are not retried") {
    ModelGateway gateway(backend, fast_retry_options());
    CHECK_THROWS_AS((void)gateway.chat(kChat, {{"user", "unscripted"}}),
                    ApiError);
    CHECK(backend->call_count() == 1);
  }
}

TEST_CASE("embed_batch caches per text and batches misses") {
  auto backend = std::make_shared<MockBackend>();
  ModelGateway gateway(backend);

  std::vector<EmbeddingVector> first =
      gateway.embed_batch(kEmbedding, {"alpha", "beta"});
  CHECK(first.size() == 2);
  CHECK(backend->call_count() == 1);

  // one hit, one miss: a single extra backend call
  std::vector<EmbeddingVector> second =
      gateway.embed_batch(kEmbedding, {"beta", "gamma"});
  CHECK(backend->call_count() == 2);
  CHECK(second[0] == first[1]);
  CHECK(gateway.stats().embedding_calls == 2);
  CHECK(gateway.stats().cache_hits == 1);

  // all hits: no backend call
  (void)gateway.embed_batch(kEmbedding, {"alpha", "beta", "gamma"});
  CHECK(backend->call_count() == 2);

  CHECK_THROWS_AS((void)gateway.embed_batch(kEmbedding, {}), Error);
  CHECK_THROWS_AS((void)gateway.embed_batch(kEmbedding, {""}), Error);
}

TEST_CASE("completion results are validated before use") {
  auto backend = std::make_shared<MockBackend>();
  ModelGateway gateway(backend);

  SUBCASE("well-formed scripted results pass") {
    ScriptedTable table;
    table.states[{}] = {{" a", 0.6}, {" b", 0.4}};
    backend->set_completion_table(table);
    CompletionResult result = gateway.complete_with_logprobs(kCompletion, "Q");
    CHECK(result.text() == " a");
    CHECK(gateway.stats().completion_calls == 1);
  }

  SUBCASE("malformed alternatives are rejected") {
    backend->set_completion_handler(
        [](const std::string&, const GenerationParams&) {
          CompletionResult result;
          TokenStep step;
          step.token = "x";
          step.logprob = std::log(0.5);
          step.alternatives = {{"y", std::log(0.5)}};  // echo mismatch
          result.steps.push_back(step);
          return std::optional<CompletionResult>(result);
        });
    CHECK_THROWS_WITH_AS(
        (void)gateway.complete_with_logprobs(kCompletion, "Q"),
        doctest::Contains("alternatives[0]"), ApiError);
  }

  SUBCASE("excess probability mass is rejected") {
    backend->set_completion_handler(
        [](const std::string&, const GenerationParams&) {
          CompletionResult result;
          TokenStep step;
          step.token = "x";
          step.logprob = std::log(0.9);
          step.alternatives = {{"x", std::log(0.9)}, {"y", std::log(0.9)}};
          result.steps.push_back(step);
          return std::optional<CompletionResult>(result);
        });
    CHECK_THROWS_WITH_AS(
        (void)gateway.complete_with_logprobs(kCompletion, "Q"),
        doctest::Contains("mass"), ApiError);
  }
}

TEST_CASE("validate_token_steps enforces ordering and finiteness") {
  auto step_with = [](std::vector<std::pair<std::string, double>> alts) {
    TokenStep step;
    step.token = alts[0].first;
    step.logprob = alts[0].second;
    step.alternatives = std::move(alts);
    return step;
  };

  // strictly decreasing logprobs, ties broken by ascending token
  CHECK_NOTHROW(validate_token_steps(
      {step_with({{"a", std::log(0.5)}, {"b", std::log(0.3)}})}));
  CHECK_NOTHROW(validate_token_steps(
      {step_with({{"a", std::log(0.5)}, {"b", std::log(0.5)}})}));
  CHECK_THROWS_AS(validate_token_steps({step_with(
                      {{"b", std::log(0.3)}, {"a", std::log(0.5)}})}),
                  ApiError);
  CHECK_THROWS_AS(validate_token_steps({step_with(
                      {{"b", std::log(0.5)}, {"a", std::log(0.5)}})}),
                  ApiError);
  CHECK_THROWS_AS(validate_token_steps({step_with({{"a", 0.25}})}), ApiError);
  CHECK_THROWS_AS(validate_token_steps({step_with(
                      {{"a", -std::numeric_limits<double>::infinity()}})}),
                  ApiError);
  TokenStep no_alts;
  no_alts.token = "x";
  CHECK_THROWS_AS(validate_token_steps({no_alts}), ApiError);
}

TEST_CASE("per-endpoint concurrency stays within the configured cap") {
  auto backend = std::make_shared<MockBackend>();
  backend->set_chat_default("ok");
  backend->set_reply_delay(std::chrono::milliseconds(5));
  GatewayOptions options;
  options.cache_enabled = false;
  options.parallelism = 2;
  ModelGateway gateway(backend, options);

  (void)parallel_map(
      8,
      [&](std::size_t i) {
        return gateway.chat(kChat, {{"user", "q" + std::to_string(i)}});
      },
      8);
  CHECK(backend->max_in_flight() <= 2);
  CHECK(backend->call_count() == 8);
}

TEST_CASE("http backend speaks the chat completions protocol") {
  TestServer server;
  std::atomic<int> hits{0};
  std::string seen_auth;
  json seen_body;
  server.server.Post("/v1/chat/completions", [&](const httplib::Request& req,
                                                 httplib::Response& res) {
    int n = ++hits;
    if (n <= 2) {
      res.status = 429;
      res.set_content("slow down", "text/plain");
      return;
    }
    seen_auth = req.get_header_value("Authorization");
    seen_body = json::parse(req.body);
    json reply = {
        {"choices",
         json::array({{{"message", {{"role", "assistant"},
                                    {"content", "pong"}}}}})}};
    res.set_content(reply.dump(), "application/json");
  });
  server.start();

  setenv("GOALGAUGE_API_KEY", "test-key-123", 1);
  auto backend = std::make_shared<HttpBackend>();
  unsetenv("GOALGAUGE_API_KEY");
  GatewayOptions options = fast_retry_options();
  options.cache_enabled = false;
  ModelGateway gateway(backend, options);

  ModelEndpoint endpoint =
      live_endpoint(EndpointKind::chat, server.base_url());
  endpoint.params.stop = {"<end>"};
  CHECK(gateway.chat(endpoint, {{"user", "ping"}}) == "pong");
  CHECK(hits.load() == 3);
  CHECK(gateway.stats().retries == 2);
  CHECK(seen_auth == "Bearer test-key-123");
  CHECK(seen_body["model"] == "test-model");
  CHECK(seen_body["messages"][0]["content"] == "ping");
  CHECK(seen_body["stop"][0] == "<end>");
}

TEST_CASE("http backend builds validated token steps") {
  TestServer server;
  bool greedy = true;
  server.server.Post("/v1/completions", [&](const httplib::Request& req,
                                            httplib::Response& res) {
    json body = json::parse(req.body);
    CHECK(body["logprobs"] == 5);
    CHECK(body["echo"] == false);
    json top1 = {{" He", std::log(0.7)}, {" She", std::log(0.3)}};
    json reply = {
        {"choices",
         json::array(
             {{{"text", " He said"},
               {"finish_reason", "length"},
               {"logprobs",
                {{"tokens", json::array({" He", " said"})},
                 {"token_logprobs",
                  json::array({std::log(greedy ? 0.7 : 0.3), std::log(0.9)})},
                 {"top_logprobs",
                  json::array({top1, json::object()})}}}}})}};
    if (!greedy) {
      reply["choices"][0]["logprobs"]["tokens"][0] = " She";
    }
    res.set_content(reply.dump(), "application/json");
  });
  server.start();

  auto backend = std::make_shared<HttpBackend>();
  GatewayOptions options;
  options.cache_enabled = false;
  ModelGateway gateway(backend, options);
  ModelEndpoint endpoint =
      live_endpoint(EndpointKind::completion, server.base_url());

  CompletionResult result =
      gateway.complete_with_logprobs(endpoint, "prompt");
  REQUIRE(result.steps.size() == 2);
  CHECK(result.steps[0].token == " He");
  REQUIRE(result.steps[0].alternatives.size() == 2);
  CHECK(result.steps[0].alternatives[0].first == " He");
  CHECK(result.steps[0].alternatives[1].first == " She");
  CHECK(result.stop_reason == StopReason::length);

  // a non-greedy response is a protocol violation, not a tree input
  greedy = false;
  CHECK_THROWS_WITH_AS(
      (void)gateway.complete_with_logprobs(endpoint, "prompt2"),
      doctest::Contains("greedy"), ApiError);
}

TEST_CASE("http backend embeddings are reordered by index") {
  TestServer server;
  server.server.Post("/v1/embeddings", [&](const httplib::Request& req,
                                           httplib::Response& res) {
    json body = json::parse(req.body);
    REQUIRE(body["input"].size() == 2);
    json reply = {
        {"data",
         json::array({{{"index", 1}, {"embedding", json::array({0.0, 1.0})}},
                      {{"index", 0},
                       {"embedding", json::array({1.0, 0.0})}}})}};
    res.set_content(reply.dump(), "application/json");
  });
  server.start();

  auto backend = std::make_shared<HttpBackend>();
  ModelGateway gateway(backend);
  ModelEndpoint endpoint =
      live_endpoint(EndpointKind::embedding, server.base_url());
  std::vector<EmbeddingVector> out =
      gateway.embed_batch(endpoint, {"first", "second"});
  CHECK(out[0].values == std::vector<double>({1.0, 0.0}));
  CHECK(out[1].values == std::vector<double>({0.0, 1.0}));
}

TEST_CASE("http backend maps statuses to error classes") {
  TestServer server;
  server.server.Post("/v1/chat/completions",
                     [&](const httplib::Request&, httplib::Response& res) {
                       res.status = 400;
                       res.set_content("bad request", "text/plain");
                     });
  server.start();

  HttpBackend backend;
  ModelEndpoint endpoint =
      live_endpoint(EndpointKind::chat, server.base_url());
  CHECK_THROWS_AS((void)backend.chat(endpoint, {{"user", "x"}}), ApiError);

  // unreachable host: transport errors are transient
  ModelEndpoint dead = endpoint;
  dead.base_url = "http://127.0.0.1:1/v1";
  CHECK_THROWS_AS((void)backend.chat(dead, {{"user", "x"}}), TransientError);
}
