#pragma once

#include <map>
#include <regex>
#include <string>

namespace goalgauge {

// Prompt templates used by clustering, baseline labeling and completion
// labeling. Placeholders use {name} syntax; render() substitutes every
// occurrence. Defaults ship with the library; any template can be overridden
// by a same-named .txt file in a template directory.
struct PromptSet {
  std::string summarize;            // {context}, {log}
  std::string describe;             // {group}, {not_in_group}
  std::string merge;                // {group1}, {group2}, {not_in_group}
  std::string baseline_first;       // {log}
  std::string baseline_next;        // {categories}, {log}
  std::string instruct_completion;  // appended verbatim after the log
  std::string judge;                // {log}

  static PromptSet defaults();

  // Overrides from <dir>/<name>.txt (summarize.txt, describe.txt, merge.txt,
  // baseline_first.txt, baseline_next.txt, instruct_completion.txt,
  // judge.txt). Missing files keep the default.
  void load_overrides(const std::string& dir);

  static std::string render(const std::string& text,
                            const std::map<std::string, std::string>& vars);
};

// A merge judge reply counts as YES when it starts with yes, true or merge.
const std::regex& merge_affirmative_regex();

// A completion judge reply counts as complete when it starts with yes, true
// or complete.
const std::regex& judge_affirmative_regex();

bool is_affirmative(const std::string& reply, const std::regex& pattern);

}  // namespace goalgauge
