#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "goalgauge/rng.hpp"

namespace goalgauge {

enum class Role { user, assistant, system, tool };

const std::string& role_name(Role role);
Role role_from_name(const std::string& name);

struct Turn {
  Role role = Role::user;
  std::string content;

  bool operator==(const Turn&) const = default;
};

// One objective-driven conversation. `turns` is ordered. `n_turns` counts
// user/assistant prompt-response pairs; system and tool steps are preserved
// in serialization but never counted as pairs.
struct Interaction {
  std::string id;
  std::vector<Turn> turns;
  int n_turns = 0;
  std::optional<bool> complete_label;
  std::map<std::string, std::string> metadata;

  bool operator==(const Interaction&) const = default;
};

struct SftPair {
  std::string input;
  std::string target;
  std::string source_id;

  bool operator==(const SftPair&) const = default;
};

// Serialization template for one turn. Placeholders: {turn}, {step}, {role},
// {content}.
struct TurnTemplate {
  std::string format = "TURN {turn}, STEP {step}, {role} chat:\n{content}\n\n";
};

struct IngestOptions {
  // Label applied to records that carry no "complete" field.
  std::optional<bool> assume_complete;
};

// Number of complete prompt-response pairs in `turns`. A pair is a user turn
// plus at least one assistant turn before the next user turn.
int count_pairs(const std::vector<Turn>& turns);

// Index one past the last turn of pair `upto`, including interleaved tool or
// system steps inside that pair's span.
std::size_t pair_end_index(const std::vector<Turn>& turns, int upto);

std::vector<Interaction> ingest_dataset(const std::string& path,
                                        const IngestOptions& options = {});

void write_dataset(const std::string& path,
                   const std::vector<Interaction>& dataset);

// Serializes the first `upto` pairs (plus any leading preamble turns).
// upto < 0 serializes every turn, including a trailing unanswered prompt.
std::string concat_turns(const Interaction& interaction, int upto = -1,
                         const TurnTemplate& turn_template = {});

// Uniform draw of k in {1, ..., n_turns - 1}; keeps the first k pairs, labels
// the copy incomplete and suffixes the id with ":trunc".
Interaction truncate_interaction(const Interaction& interaction, Rng& rng);

// input = serialization up to (not including) the final assistant turn,
// target = final assistant turn content + end_tag. The end tag may be empty.
std::vector<SftPair> export_sft_pairs(const std::vector<Interaction>& dataset,
                                      const std::string& end_tag = "<end>",
                                      const TurnTemplate& turn_template = {});

std::string sft_input(const Interaction& interaction,
                      const TurnTemplate& turn_template = {});

void write_sft_pairs(const std::string& path,
                     const std::vector<SftPair>& pairs);

}  // namespace goalgauge
