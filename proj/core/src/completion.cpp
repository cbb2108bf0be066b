#include "goalgauge/completion.hpp"

#include <algorithm>
#include <cctype>

#include "goalgauge/errors.hpp"

namespace goalgauge {

namespace {

bool is_blank(const std::string& text) {
  return std::all_of(text.begin(), text.end(), [](unsigned char c) {
    return std::isspace(c) != 0;
  });
}

std::string trim_trailing(const std::string& text) {
  std::size_t end = text.find_last_not_of(" \t\r\n");
  if (end == std::string::npos) return "";
  return text.substr(0, end + 1);
}

GenerationParams continuation_params(const CompletionConfig& config) {
  GenerationParams params;
  params.max_output_tokens = config.max_continuation_tokens;
  params.temperature = 0.0;
  return params;
}

CompletionVerdict tag_verdict(const Interaction& interaction,
                              const std::string& continuation,
                              const CompletionConfig& config) {
  CompletionVerdict verdict;
  verdict.id = interaction.id;
  verdict.continuation = continuation;
  verdict.ground_truth = interaction.complete_label;
  verdict.matched_pattern =
      match_end_tag(continuation, config.patterns, config.match_window,
                    config.strict_suffix);
  if (verdict.matched_pattern.has_value()) {
    verdict.predicted_complete = true;
  } else if (config.empty_is_complete && is_blank(continuation)) {
    verdict.predicted_complete = true;
  }
  return verdict;
}

}  // namespace

const std::string& completion_strategy_name(CompletionStrategy strategy) {
  static const std::string kNames[] = {"finetuned_continuation",
                                       "instruct_prompt", "judge"};
  switch (strategy) {
    case CompletionStrategy::finetuned_continuation:
      return kNames[0];
    case CompletionStrategy::instruct_prompt:
      return kNames[1];
    case CompletionStrategy::judge:
      return kNames[2];
  }
  throw Error("completion_strategy_name: invalid strategy");
}

CompletionStrategy completion_strategy_from_name(const std::string& name) {
  if (name == "finetuned_continuation") {
    return CompletionStrategy::finetuned_continuation;
  }
  if (name == "instruct_prompt") return CompletionStrategy::instruct_prompt;
  if (name == "judge") return CompletionStrategy::judge;
  throw Error("unknown completion strategy \"" + name + "\"");
}

std::vector<std::string> default_end_tag_patterns() {
  return {"<end>", "end system", "<end of system logs>"};
}

std::string normalize_for_match(const std::string& text) {
  std::size_t begin = text.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  std::string out = text.substr(begin);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

std::optional<std::string> match_end_tag(
    const std::string& continuation, const std::vector<std::string>& patterns,
    std::size_t match_window, bool strict_suffix) {
  std::string normalized = normalize_for_match(continuation);
  std::string strict = trim_trailing(normalized);
  for (const auto& pattern : patterns) {
    std::string needle = normalize_for_match(pattern);
    if (needle.empty() || needle.size() > match_window) continue;
    if (strict_suffix) {
      if (strict == needle) return pattern;
    } else if (normalized.compare(0, needle.size(), needle) == 0) {
      return pattern;
    }
  }
  return std::nullopt;
}

CompletionVerdict label_completion(const Interaction& interaction,
                                   ModelGateway& gateway,
                                   const CompletionConfig& config) {
  switch (config.strategy) {
    case CompletionStrategy::finetuned_continuation: {
      std::string prefix = concat_turns(interaction, -1, config.turn_template);
      CompletionResult result = gateway.complete_with_logprobs(
          config.completion_endpoint, prefix, continuation_params(config));
      return tag_verdict(interaction, result.text(), config);
    }
    case CompletionStrategy::instruct_prompt: {
      std::string prefix = concat_turns(interaction, -1, config.turn_template) +
                           config.prompts.instruct_completion;
      CompletionResult result = gateway.complete_with_logprobs(
          config.completion_endpoint, prefix, continuation_params(config));
      return tag_verdict(interaction, result.text(), config);
    }
    case CompletionStrategy::judge: {
      std::string prompt = PromptSet::render(
          config.prompts.judge,
          {{"log", concat_turns(interaction, -1, config.turn_template)}});
      std::string reply = gateway.chat(config.chat_endpoint,
                                       {{"user", prompt}});
      CompletionVerdict verdict;
      verdict.id = interaction.id;
      verdict.continuation = reply;
      verdict.ground_truth = interaction.complete_label;
      verdict.predicted_complete =
          is_affirmative(reply, judge_affirmative_regex());
      return verdict;
    }
  }
  throw Error("label_completion: invalid strategy");
}

std::vector<Interaction> prepare_completion_eval(
    const std::vector<Interaction>& dataset, Rng& rng,
    double truncate_fraction) {
  if (truncate_fraction < 0.0 || truncate_fraction > 1.0) {
    throw Error("prepare_completion_eval: truncate_fraction must be in "
                "[0, 1]");
  }
  std::vector<Interaction> eval;
  eval.reserve(dataset.size() * 2);
  for (const auto& interaction : dataset) {
    eval.push_back(interaction);
    if (interaction.n_turns < 2 || truncate_fraction == 0.0) continue;
    if (rng.uniform_real() < truncate_fraction) {
      eval.push_back(truncate_interaction(interaction, rng));
    }
  }
  return eval;
}

ClassificationReport classification_metrics(
    const std::vector<CompletionVerdict>& verdicts) {
  if (verdicts.empty()) {
    throw Error("classification_metrics: no verdicts");
  }
  ClassificationReport report;
  for (const auto& verdict : verdicts) {
    if (!verdict.ground_truth.has_value()) {
      throw Error("classification_metrics: ground-truth label missing for \"" +
                  verdict.id + "\"");
    }
    bool truth = *verdict.ground_truth;
    bool predicted = verdict.predicted_complete;
    if (truth && predicted) {
      ++report.tp;
    } else if (!truth && predicted) {
      ++report.fp;
    } else if (truth && !predicted) {
      ++report.fn;
    } else {
      ++report.tn;
    }
  }
  double total = static_cast<double>(report.tp + report.fp + report.fn +
                                     report.tn);
  report.accuracy =
      static_cast<double>(report.tp + report.tn) / total;
  if (report.tp + report.fp > 0) {
    report.precision = static_cast<double>(report.tp) /
                       static_cast<double>(report.tp + report.fp);
  } else {
    report.flags.push_back("undefined_precision");
  }
  if (report.tp + report.fn > 0) {
    report.recall = static_cast<double>(report.tp) /
                    static_cast<double>(report.tp + report.fn);
  } else {
    report.flags.push_back("undefined_recall");
  }
  if (report.precision + report.recall > 0.0) {
    report.f1 = 2.0 * report.precision * report.recall /
                (report.precision + report.recall);
  } else {
    report.flags.push_back("undefined_f1");
  }
  return report;
}

}  // namespace goalgauge
