#include "goalgauge/mock_backend.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "goalgauge/errors.hpp"
#include "goalgauge/hash.hpp"
#include "goalgauge/io.hpp"
#include "goalgauge/mock_world.hpp"

namespace goalgauge {

using nlohmann::json;

namespace {

constexpr double kTableSumTolerance = 1e-6;

// Alternatives are ordered by (-logprob, token byte order); the head of the
// list is the greedy choice.
std::vector<std::pair<std::string, double>> ranked_alternatives(
    const std::map<std::string, double>& dist, int top_k) {
  std::vector<std::pair<std::string, double>> ranked;
  ranked.reserve(dist.size());
  for (const auto& [token, prob] : dist) {
    ranked.emplace_back(token, std::log(prob));
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) {
                     if (a.second != b.second) return a.second > b.second;
                     return a.first < b.first;
                   });
  if (top_k > 0 && ranked.size() > static_cast<std::size_t>(top_k)) {
    ranked.resize(static_cast<std::size_t>(top_k));
  }
  return ranked;
}

std::size_t whitespace_token_count(const std::string& text) {
  std::istringstream stream(text);
  std::string token;
  std::size_t count = 0;
  while (stream >> token) ++count;
  return count;
}

bool contains_all(const std::string& haystack,
                  const std::vector<std::string>& needles) {
  for (const std::string& needle : needles) {
    if (haystack.find(needle) == std::string::npos) return false;
  }
  return true;
}

}  // namespace

void ScriptedTable::validate() const {
  for (const auto& [state, dist] : states) {
    if (dist.empty()) {
      throw ConfigError("scripted table: empty distribution for a state");
    }
    double sum = 0.0;
    for (const auto& [token, prob] : dist) {
      if (token.empty()) {
        throw ConfigError("scripted table: empty token in a distribution");
      }
      if (!(prob > 0.0) || prob > 1.0) {
        throw ConfigError("scripted table: probability " +
                          std::to_string(prob) + " for token \"" + token +
                          "\" out of (0, 1]");
      }
      sum += prob;
    }
    if (std::abs(sum - 1.0) > kTableSumTolerance) {
      throw ConfigError("scripted table: state probabilities sum to " +
                        std::to_string(sum) + ", expected 1");
    }
  }
}

struct MockBackend::InFlight {
  MockBackend* backend;

  explicit InFlight(MockBackend* b) : backend(b) {
    int now = backend->in_flight_.fetch_add(1) + 1;
    int seen = backend->max_in_flight_.load();
    while (now > seen &&
           !backend->max_in_flight_.compare_exchange_weak(seen, now)) {
    }
    backend->calls_.fetch_add(1);
    if (backend->delay_.count() > 0) {
      std::this_thread::sleep_for(backend->delay_);
    }
  }

  ~InFlight() { backend->in_flight_.fetch_sub(1); }
};

void MockBackend::maybe_fail() {
  std::lock_guard<std::mutex> lock(fail_mutex_);
  if (fail_remaining_ > 0) {
    --fail_remaining_;
    throw TransientError(
        "mock backend: injected failure, status " + std::to_string(fail_status_),
        fail_status_);
  }
}

std::string MockBackend::chat_prompt_key(
    const std::vector<ChatMessage>& messages) {
  std::string key;
  for (const ChatMessage& message : messages) {
    key += message.role;
    key += ": ";
    key += message.content;
    key += "\n";
  }
  return key;
}

std::string MockBackend::chat(const ModelEndpoint& endpoint,
                              const std::vector<ChatMessage>& messages) {
  (void)endpoint;
  InFlight guard(this);
  maybe_fail();
  std::string key = chat_prompt_key(messages);
  auto exact = chat_exact_.find(fnv1a64(key));
  if (exact != chat_exact_.end()) return exact->second;
  for (const auto& [needles, reply] : chat_rules_) {
    if (contains_all(key, needles)) return reply;
  }
  if (chat_handler_) {
    if (auto reply = chat_handler_(messages)) return *reply;
  }
  if (chat_default_) return *chat_default_;
  throw ApiError("mock backend: no scripted chat reply for prompt:\n" + key);
}

CompletionResult MockBackend::emit_tokens(
    const std::vector<std::string>& tokens, const GenerationParams& params) {
  CompletionResult result;
  for (const std::string& token : tokens) {
    if (params.max_output_tokens >= 0 &&
        static_cast<int>(result.steps.size()) >= params.max_output_tokens) {
      result.stop_reason = StopReason::length;
      return result;
    }
    if (std::find(params.stop.begin(), params.stop.end(), token) !=
        params.stop.end()) {
      result.stop_reason = StopReason::stop_sequence;
      return result;
    }
    TokenStep step;
    step.token = token;
    step.logprob = 0.0;
    step.alternatives = {{token, 0.0}};
    result.steps.push_back(std::move(step));
  }
  result.stop_reason = StopReason::eos;
  return result;
}

CompletionResult MockBackend::run_table(const std::string& prefix,
                                        const GenerationParams& params) const {
  // Longest state whose concatenated emission suffixes the prompt wins; the
  // root state (empty emission) always matches.
  const std::vector<std::string>* start = nullptr;
  std::size_t best_length = 0;
  bool found = false;
  for (const auto& [state, dist] : table_->states) {
    (void)dist;
    std::string emission = join(state, "");
    if (emission.size() < best_length && found) continue;
    if (emission.size() > prefix.size()) continue;
    if (prefix.compare(prefix.size() - emission.size(), emission.size(),
                       emission) == 0) {
      if (!found || emission.size() >= best_length) {
        best_length = emission.size();
        start = &state;
        found = true;
      }
    }
  }
  std::vector<std::string> state;
  if (found) state = *start;
  CompletionResult result;
  for (;;) {
    auto it = table_->states.find(state);
    if (it == table_->states.end()) {
      result.stop_reason = StopReason::eos;
      return result;
    }
    if (params.max_output_tokens >= 0 &&
        static_cast<int>(result.steps.size()) >= params.max_output_tokens) {
      result.stop_reason = StopReason::length;
      return result;
    }
    auto ranked = ranked_alternatives(it->second, params.top_k_logprobs);
    const std::string& chosen = ranked[0].first;
    if (std::find(params.stop.begin(), params.stop.end(), chosen) !=
        params.stop.end()) {
      result.stop_reason = StopReason::stop_sequence;
      return result;
    }
    TokenStep step;
    step.token = chosen;
    step.logprob = ranked[0].second;
    step.alternatives = std::move(ranked);
    result.steps.push_back(std::move(step));
    state.push_back(chosen);
  }
}

CompletionResult MockBackend::complete(const ModelEndpoint& endpoint,
                                       const std::string& prefix,
                                       const GenerationParams& params) {
  InFlight guard(this);
  maybe_fail();
  if (completion_handler_) {
    if (auto result = completion_handler_(prefix, params)) return *result;
  }
  // Words stand in for tokens when checking the declared context length.
  if (endpoint.context_length > 0 &&
      whitespace_token_count(prefix) >
          static_cast<std::size_t>(endpoint.context_length)) {
    throw ApiError("context overflow: prompt exceeds context_length " +
                   std::to_string(endpoint.context_length));
  }
  auto exact = completion_exact_.find(fnv1a64(prefix));
  if (exact != completion_exact_.end()) {
    return emit_tokens(exact->second, params);
  }
  for (const auto& [needles, emit] : completion_rules_) {
    if (contains_all(prefix, needles)) return emit_tokens(emit, params);
  }
  if (table_) return run_table(prefix, params);
  if (completion_default_) return emit_tokens(*completion_default_, params);
  throw ApiError("mock backend: no scripted completion for prompt:\n" +
                 prefix);
}

std::vector<double> feature_hash_embedding(const std::string& text,
                                           std::size_t dim,
                                           std::uint64_t seed) {
  std::vector<double> values(dim, 0.0);
  std::istringstream stream(text);
  std::string token;
  std::size_t tokens = 0;
  while (stream >> token) {
    ++tokens;
    std::uint64_t h = fnv1a64(token, kFnvOffsetBasis ^ seed);
    std::size_t bucket = static_cast<std::size_t>(h % dim);
    double sign = (h & 0x8000000000000000ULL) ? -1.0 : 1.0;
    values[bucket] += sign;
  }
  if (tokens == 0) {
    throw ApiError("mock embedding: text has no whitespace tokens");
  }
  double norm = 0.0;
  for (double v : values) norm += v * v;
  norm = std::sqrt(norm);
  if (!(norm > 0.0)) {
    throw ApiError("mock embedding: tokens cancelled to a zero vector");
  }
  for (double& v : values) v /= norm;
  return values;
}

std::vector<std::vector<double>> MockBackend::embed(
    const ModelEndpoint& endpoint, const std::vector<std::string>& texts) {
  (void)endpoint;
  InFlight guard(this);
  maybe_fail();
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (const std::string& text : texts) {
    out.push_back(feature_hash_embedding(text, embedding_dim_, embedding_seed_));
  }
  return out;
}

void MockBackend::script_chat_reply(const std::string& prompt,
                                    const std::string& reply) {
  chat_exact_[fnv1a64(prompt)] = reply;
}

void MockBackend::script_chat_rule(std::vector<std::string> contains,
                                   std::string reply) {
  chat_rules_.emplace_back(std::move(contains), std::move(reply));
}

void MockBackend::set_chat_default(std::string reply) {
  chat_default_ = std::move(reply);
}

void MockBackend::set_chat_handler(ChatHandler handler) {
  chat_handler_ = std::move(handler);
}

void MockBackend::script_completion_emit(const std::string& prefix,
                                         std::vector<std::string> emit) {
  completion_exact_[fnv1a64(prefix)] = std::move(emit);
}

void MockBackend::script_completion_rule(std::vector<std::string> contains,
                                         std::vector<std::string> emit) {
  completion_rules_.emplace_back(std::move(contains), std::move(emit));
}

void MockBackend::set_completion_default(std::vector<std::string> emit) {
  completion_default_ = std::move(emit);
}

void MockBackend::set_completion_table(ScriptedTable table) {
  table.validate();
  table_ = std::move(table);
}

void MockBackend::set_completion_handler(CompletionHandler handler) {
  completion_handler_ = std::move(handler);
}

void MockBackend::set_embedding(std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw ConfigError("mock embedding: dim must be positive");
  embedding_dim_ = dim;
  embedding_seed_ = seed;
}

void MockBackend::fail_next(int times, int status) {
  std::lock_guard<std::mutex> lock(fail_mutex_);
  fail_remaining_ = times;
  fail_status_ = status;
}

void MockBackend::load_spec_file(const std::string& path) {
  std::string text = read_text_file(path);
  std::vector<std::string> lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    std::size_t line_number = i + 1;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw IoError(path + ": line " + std::to_string(line_number) +
                    ": malformed JSON: " + e.what());
    }
    std::string type = record.value("type", "");
    if (type == "chat") {
      if (record.contains("prompt")) {
        script_chat_reply(record["prompt"].get<std::string>(),
                          record.at("reply").get<std::string>());
      } else {
        script_chat_rule(
            record.at("contains").get<std::vector<std::string>>(),
            record.at("reply").get<std::string>());
      }
    } else if (type == "chat_default") {
      set_chat_default(record.at("reply").get<std::string>());
    } else if (type == "completion") {
      ScriptedTable table = table_.value_or(ScriptedTable{});
      table.states[record.at("state").get<std::vector<std::string>>()] =
          record.at("dist").get<std::map<std::string, double>>();
      set_completion_table(std::move(table));
    } else if (type == "completion_emit") {
      if (record.contains("prompt")) {
        script_completion_emit(
            record["prompt"].get<std::string>(),
            record.at("emit").get<std::vector<std::string>>());
      } else {
        script_completion_rule(
            record.at("contains").get<std::vector<std::string>>(),
            record.at("emit").get<std::vector<std::string>>());
      }
    } else if (type == "completion_default") {
      set_completion_default(
          record.at("emit").get<std::vector<std::string>>());
    } else if (type == "embedding") {
      set_embedding(record.value("dim", std::size_t{8}),
                    record.value("seed", std::uint64_t{0}));
    } else if (type == "program") {
      install_mock_program(*this, record.dump());
    } else {
      throw IoError(path + ": line " + std::to_string(line_number) +
                    ": unknown record type \"" + type + "\"");
    }
  }
}

}  // namespace goalgauge
