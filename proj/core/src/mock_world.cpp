#include "goalgauge/mock_world.hpp"

#include <optional>
#include <regex>

#include <json.hpp>

#include "goalgauge/errors.hpp"
#include "goalgauge/prompts.hpp"

namespace goalgauge {

namespace {

using json = nlohmann::json;

constexpr const char* kDoneMarker = "FINAL ANSWER";

std::optional<int> extract_case_number(const std::string& text) {
  static const std::regex kCase("case (\\d+)");
  std::smatch match;
  if (!std::regex_search(text, match, kCase)) return std::nullopt;
  return std::stoi(match[1].str());
}

int topic_of_case(int case_number, std::size_t topic_count) {
  int topic = case_number / 1000 - 1;
  if (topic < 0 || static_cast<std::size_t>(topic) >= topic_count) return -1;
  return topic;
}

std::size_t count_occurrences(const std::string& text,
                              const std::string& needle) {
  if (needle.empty()) return 0;
  std::size_t count = 0;
  for (std::size_t pos = text.find(needle); pos != std::string::npos;
       pos = text.find(needle, pos + needle.size())) {
    ++count;
  }
  return count;
}

std::string span_between(const std::string& text, const std::string& from,
                         const std::string& to) {
  std::size_t begin = text.find(from);
  if (begin == std::string::npos) return "";
  begin += from.size();
  std::size_t end = text.find(to, begin);
  if (end == std::string::npos) end = text.size();
  return text.substr(begin, end - begin);
}

// Majority topic among the phrases mentioned in `text`; ties and misses
// resolve to the lowest index, or -1 when no phrase occurs at all.
int dominant_topic(const std::string& text,
                   const std::vector<std::string>& topics) {
  int best = -1;
  std::size_t best_count = 0;
  for (std::size_t t = 0; t < topics.size(); ++t) {
    std::size_t count = count_occurrences(text, topics[t]);
    if (count > best_count) {
      best_count = count;
      best = static_cast<int>(t);
    }
  }
  return best;
}

MockBackend::ChatHandler make_chat_handler(std::vector<std::string> topics) {
  return [topics = std::move(topics)](const std::vector<ChatMessage>& messages)
             -> std::optional<std::string> {
    std::string prompt = MockBackend::chat_prompt_key(messages);

    if (prompt.find("[GROUP 1]") != std::string::npos) {
      std::string group1 = span_between(prompt, "[GROUP 1]", "[GROUP 2]");
      std::string group2 = span_between(prompt, "[GROUP 2]", "[NOT IN GROUP]");
      bool overlap = false;
      for (const auto& topic : topics) {
        if (group1.find(topic) != std::string::npos &&
            group2.find(topic) != std::string::npos) {
          overlap = true;
          break;
        }
      }
      return overlap ? "YES, merge the groups." : "NO, keep them separate.";
    }

    if (prompt.find("[GROUP]") != std::string::npos &&
        prompt.find("[NOT IN GROUP]") != std::string::npos) {
      std::string group = span_between(prompt, "[GROUP]", "[NOT IN GROUP]");
      int topic = dominant_topic(group, topics);
      if (topic < 0) return std::nullopt;
      return "Tasks about " + topics[static_cast<std::size_t>(topic)] + ".";
    }

    if (prompt.find("You will see an input log") != std::string::npos) {
      std::optional<int> case_number = extract_case_number(prompt);
      if (!case_number) return std::nullopt;
      int topic = topic_of_case(*case_number, topics.size());
      if (topic < 0) return std::nullopt;
      return "Intent: " + topics[static_cast<std::size_t>(topic)] + " case " +
             std::to_string(*case_number);
    }

    if (prompt.find("[LOG]") != std::string::npos) {
      return prompt.find(kDoneMarker) != std::string::npos
                 ? "YES, the objective was completed."
                 : "NO, tasks remain.";
    }

    if (prompt.find("[USER INPUT LOG]") != std::string::npos) {
      std::optional<int> case_number = extract_case_number(prompt);
      if (!case_number) return std::nullopt;
      int topic = topic_of_case(*case_number, topics.size());
      if (topic < 0) return std::nullopt;
      return topics[static_cast<std::size_t>(topic)];
    }

    return std::nullopt;
  };
}

CompletionResult emit_result(const std::vector<std::string>& tokens,
                             const GenerationParams& params) {
  CompletionResult result;
  std::size_t limit = params.max_output_tokens < 0
                          ? 0
                          : static_cast<std::size_t>(params.max_output_tokens);
  for (const auto& token : tokens) {
    if (result.steps.size() >= limit) {
      result.stop_reason = StopReason::length;
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

// Last role serialized in a TURN/STEP log, or empty when the prefix is not a
// serialized log at all.
std::string last_serialized_role(const std::string& prefix) {
  static const std::vector<std::string> kRoles = {"user", "assistant",
                                                  "system", "tool"};
  std::string best_role;
  std::size_t best_pos = std::string::npos;
  for (const auto& role : kRoles) {
    std::string marker = ", " + role + " chat:\n";
    std::size_t pos = prefix.rfind(marker);
    if (pos != std::string::npos &&
        (best_pos == std::string::npos || pos > best_pos)) {
      best_pos = pos;
      best_role = role;
    }
  }
  return best_role;
}

MockBackend::CompletionHandler make_completion_handler() {
  std::string instruct = PromptSet::defaults().instruct_completion;
  return [instruct = std::move(instruct)](const std::string& prefix,
                                          const GenerationParams& params)
             -> std::optional<CompletionResult> {
    if (prefix.size() >= instruct.size() &&
        prefix.compare(prefix.size() - instruct.size(), instruct.size(),
                       instruct) == 0) {
      std::string log = prefix.substr(0, prefix.size() - instruct.size());
      bool done = log.find(kDoneMarker) != std::string::npos;
      if (done) return emit_result({"<end of system logs>"}, params);
      return emit_result({"The", " remaining", " tasks", " continue", "."},
                         params);
    }
    std::string role = last_serialized_role(prefix);
    if (role.empty() || role == "user") {
      return std::nullopt;  // response-tree prompts fall through to the table
    }
    bool done = prefix.find(kDoneMarker) != std::string::npos;
    if (done) return emit_result({"<end>"}, params);
    return emit_result({"More", " work", " remains", "."}, params);
  };
}

ScriptedTable default_table() {
  ScriptedTable table;
  table.states[{}] = {{" done", 0.7}, {" maybe", 0.3}};
  table.states[{" maybe"}] = {{" later", 1.0}};
  return table;
}

}  // namespace

void PlantedWorld::install(MockBackend& backend) const {
  backend.set_embedding(config.embedding_dim, config.seed);
  backend.set_chat_handler(make_chat_handler(config.topics));
  backend.set_completion_handler(make_completion_handler());
  backend.set_completion_table(default_table());
}

PlantedWorld make_planted_world(const PlantedWorldConfig& config) {
  if (config.topics.empty()) {
    throw Error("planted world: at least one topic is required");
  }
  if (config.samples_per_topic < 1) {
    throw Error("planted world: samples_per_topic must be at least 1");
  }
  if (config.min_turns < 1 || config.max_turns < config.min_turns) {
    throw Error("planted world: turn bounds must satisfy 1 <= min <= max");
  }
  if (config.embedding_dim == 0) {
    throw Error("planted world: embedding_dim must be positive");
  }
  if (config.topics.size() > 8) {
    throw Error("planted world: case numbering supports at most 8 topics");
  }

  PlantedWorld world;
  world.config = config;
  int span = config.max_turns - config.min_turns + 1;
  for (std::size_t t = 0; t < config.topics.size(); ++t) {
    const std::string& topic = config.topics[t];
    for (int i = 0; i < config.samples_per_topic; ++i) {
      int case_number = 1000 * (static_cast<int>(t) + 1) + i;
      std::string case_text = std::to_string(case_number);
      Interaction interaction;
      interaction.id = "case-" + case_text;
      int pairs = config.min_turns + (i + static_cast<int>(t)) % span;
      for (int p = 1; p <= pairs; ++p) {
        std::string part = std::to_string(p);
        if (p == 1) {
          interaction.turns.push_back(
              {Role::user, "Please help with " + topic + ", this is case " +
                               case_text + "."});
        } else {
          interaction.turns.push_back(
              {Role::user, "Continue the " + topic + " work on case " +
                               case_text + ", part " + part + "."});
        }
        if (p == pairs) {
          interaction.turns.push_back(
              {Role::assistant, std::string(kDoneMarker) + ": " + topic +
                                    " case " + case_text + " is complete."});
        } else {
          interaction.turns.push_back(
              {Role::assistant, "Progress on " + topic + " case " + case_text +
                                    ", part " + part + " done."});
        }
      }
      interaction.n_turns = pairs;
      interaction.complete_label = true;
      world.dataset.push_back(std::move(interaction));
      world.topic_index["case-" + case_text] = static_cast<int>(t);
    }
  }
  return world;
}

void install_mock_program(MockBackend& backend,
                          const std::string& record_json) {
  json record = json::parse(record_json);
  std::string name = record.value("name", "");
  if (name != "planted_world") {
    throw IoError("mock spec: unknown program \"" + name + "\"");
  }
  PlantedWorldConfig config;
  if (record.contains("topics")) {
    config.topics = record["topics"].get<std::vector<std::string>>();
  }
  config.samples_per_topic =
      record.value("samples_per_topic", config.samples_per_topic);
  config.min_turns = record.value("min_turns", config.min_turns);
  config.max_turns = record.value("max_turns", config.max_turns);
  config.seed = record.value("seed", config.seed);
  config.embedding_dim = record.value("embedding_dim", config.embedding_dim);
  make_planted_world(config).install(backend);
}

}  // namespace goalgauge
