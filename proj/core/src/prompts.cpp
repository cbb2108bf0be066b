#include "goalgauge/prompts.hpp"

#include <filesystem>

#include "goalgauge/io.hpp"

namespace goalgauge {

namespace {

const char* kSummarize =
    "{context}You will see an input log [USER INPUT LOG] of a conversation "
    "between a user and an AI assistant. Based on the [USER INPUT LOG], "
    "please describe the user's **high-level intent**.\n"
    "[USER INPUT LOG]\n"
    "{log}";

const char* kDescribe =
    "You will see a list [GROUP] of task descriptions that all have something "
    "in common, and a list [NOT IN GROUP] of task descriptions that do not "
    "fit with the group. Please summarize the [GROUP] in one sentence. The "
    "sentence should describe tasks in the [GROUP], and should not describe "
    "tasks listed under [NOT IN GROUP].\n"
    "[GROUP]\n"
    "{group}\n"
    "[NOT IN GROUP]\n"
    "{not_in_group}";

const char* kMerge =
    "You will see two groups of task descriptions, and a third list of "
    "unrelated tasks that aren't in either group. Your goal is to determine "
    "whether the two groups should be merged. If so, determine a description "
    "for the merged groups that accurately describes them and does not "
    "describe the unrelated tasks.\n"
    "[GROUP 1]\n"
    "{group1}\n"
    "[GROUP 2]\n"
    "{group2}\n"
    "[NOT IN GROUP]\n"
    "{not_in_group}";

const char* kBaselineFirst =
    "Based on the [USER INPUT LOG], please describe the user's **high-level "
    "intent** in three to five words.\n"
    "[USER INPUT LOG]\n"
    "{log}";

const char* kBaselineNext =
    "Based on the [USER INPUT LOG], please select one or more of the "
    "following categories to describe the user's **high-level intent**. If "
    "the user expresses an intent that does not fit any category, you may "
    "define a new category in three to five words.\n"
    "{categories}\n"
    "[USER INPUT LOG]\n"
    "{log}";

const char* kInstructCompletion =
    "USER CHAT: Concisely summarize the remaining tasks. If there are no "
    "more tasks, output <end of system logs>. ASSISTANT CHAT: ";

// Not part of the canonical method; kept for comparisons against a direct
// yes/no judge.
const char* kJudge =
    "You will see a log of a conversation between a user and an AI "
    "assistant. Decide whether the user's objective was fully completed by "
    "the end of the log. Answer YES if the objective was completed, or NO if "
    "tasks remain.\n"
    "[LOG]\n"
    "{log}";

}  // namespace

PromptSet PromptSet::defaults() {
  PromptSet prompts;
  prompts.summarize = kSummarize;
  prompts.describe = kDescribe;
  prompts.merge = kMerge;
  prompts.baseline_first = kBaselineFirst;
  prompts.baseline_next = kBaselineNext;
  prompts.instruct_completion = kInstructCompletion;
  prompts.judge = kJudge;
  return prompts;
}

void PromptSet::load_overrides(const std::string& dir) {
  auto maybe_load = [&dir](const char* name, std::string& slot) {
    std::string path =
        (std::filesystem::path(dir) / (std::string(name) + ".txt")).string();
    if (file_exists(path)) slot = read_text_file(path);
  };
  maybe_load("summarize", summarize);
  maybe_load("describe", describe);
  maybe_load("merge", merge);
  maybe_load("baseline_first", baseline_first);
  maybe_load("baseline_next", baseline_next);
  maybe_load("instruct_completion", instruct_completion);
  maybe_load("judge", judge);
}

std::string PromptSet::render(
    const std::string& text, const std::map<std::string, std::string>& vars) {
  std::string out = text;
  for (const auto& [name, value] : vars) {
    std::string key = "{" + name + "}";
    std::size_t pos = 0;
    while ((pos = out.find(key, pos)) != std::string::npos) {
      out.replace(pos, key.size(), value);
      pos += value.size();
    }
  }
  return out;
}

const std::regex& merge_affirmative_regex() {
  static const std::regex kPattern("^\\s*(yes|true|merge)",
                                   std::regex::icase);
  return kPattern;
}

const std::regex& judge_affirmative_regex() {
  static const std::regex kPattern("^\\s*(yes|true|complete)",
                                   std::regex::icase);
  return kPattern;
}

bool is_affirmative(const std::string& reply, const std::regex& pattern) {
  return std::regex_search(reply, pattern);
}

}  // namespace goalgauge
