#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "goalgauge/gateway.hpp"
#include "goalgauge/interaction.hpp"
#include "goalgauge/prompts.hpp"
#include "goalgauge/rng.hpp"

namespace goalgauge {

enum class CompletionStrategy {
  finetuned_continuation,  // continue the raw log, look for an end tag
  instruct_prompt,         // append an instruction turn, look for an end tag
  judge,                   // ask a chat model for a yes/no verdict
};

const std::string& completion_strategy_name(CompletionStrategy strategy);
CompletionStrategy completion_strategy_from_name(const std::string& name);

std::vector<std::string> default_end_tag_patterns();

struct CompletionConfig {
  CompletionStrategy strategy = CompletionStrategy::finetuned_continuation;
  std::vector<std::string> patterns = default_end_tag_patterns();
  int max_continuation_tokens = 16;
  bool empty_is_complete = true;
  std::size_t match_window = 32;
  bool strict_suffix = false;
  double truncate_fraction = 0.5;
  std::string end_tag = "<end>";  // appended to SFT targets
  PromptSet prompts = PromptSet::defaults();
  TurnTemplate turn_template;
  ModelEndpoint completion_endpoint;
  ModelEndpoint chat_endpoint;
};

struct CompletionVerdict {
  std::string id;
  bool predicted_complete = false;
  std::optional<std::string> matched_pattern;
  std::string continuation;  // raw continuation text, or the judge reply
  std::optional<bool> ground_truth;
};

// Leading whitespace stripped, ASCII characters lowercased. Both the
// continuation and the patterns are normalized this way before matching.
std::string normalize_for_match(const std::string& text);

// First pattern (in the given order) that matches the continuation. A
// pattern only qualifies when its normalized form fits inside match_window;
// it matches when the normalized continuation starts with it, or, with
// strict_suffix, equals it exactly after trailing whitespace is trimmed.
std::optional<std::string> match_end_tag(
    const std::string& continuation, const std::vector<std::string>& patterns,
    std::size_t match_window = 32, bool strict_suffix = false);

CompletionVerdict label_completion(const Interaction& interaction,
                                   ModelGateway& gateway,
                                   const CompletionConfig& config);

// Evaluation set: every interaction in order, each multi-pair interaction
// followed by a truncated copy with probability truncate_fraction. The draw
// is only made for interactions that can be truncated.
std::vector<Interaction> prepare_completion_eval(
    const std::vector<Interaction>& dataset, Rng& rng,
    double truncate_fraction);

struct ClassificationReport {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t tn = 0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::vector<std::string> flags;
};

// Positive class is "complete". Undefined ratios score 0.0 and raise
// undefined_precision / undefined_recall / undefined_f1 flags. Throws when a
// verdict has no ground-truth label, naming the sample.
ClassificationReport classification_metrics(
    const std::vector<CompletionVerdict>& verdicts);

}  // namespace goalgauge
