#include "goalgauge/interaction.hpp"

#include <filesystem>
#include <map>

#include <json.hpp>

#include "goalgauge/errors.hpp"
#include "goalgauge/io.hpp"

namespace goalgauge {

using nlohmann::json;

namespace {

const std::map<std::string, Role> kRolesByName = {
    {"user", Role::user},
    {"assistant", Role::assistant},
    {"system", Role::system},
    {"tool", Role::tool},
};

// TURN numbers start at 1 and advance when a user turn opens a new
// prompt-response pair; STEP numbers run over all turns.
std::vector<int> turn_numbers(const std::vector<Turn>& turns) {
  std::vector<int> numbers(turns.size(), 1);
  for (std::size_t i = 1; i < turns.size(); ++i) {
    numbers[i] = numbers[i - 1] + (turns[i].role == Role::user ? 1 : 0);
  }
  return numbers;
}

std::string render_turn(const TurnTemplate& turn_template, int turn, int step,
                        const Turn& t) {
  std::string out = turn_template.format;
  auto substitute = [&out](const std::string& key, const std::string& value) {
    std::size_t pos = 0;
    while ((pos = out.find(key, pos)) != std::string::npos) {
      out.replace(pos, key.size(), value);
      pos += value.size();
    }
  };
  substitute("{turn}", std::to_string(turn));
  substitute("{step}", std::to_string(step));
  substitute("{role}", role_name(t.role));
  substitute("{content}", t.content);
  return out;
}

std::string serialize_range(const Interaction& interaction, std::size_t end,
                            const TurnTemplate& turn_template) {
  std::vector<int> numbers = turn_numbers(interaction.turns);
  std::string out;
  for (std::size_t i = 0; i < end; ++i) {
    out += render_turn(turn_template, numbers[i], static_cast<int>(i) + 1,
                       interaction.turns[i]);
  }
  return out;
}

std::string line_error(const std::string& path, std::size_t line,
                       const std::string& what) {
  return path + ": line " + std::to_string(line) + ": " + what;
}

Interaction parse_record(const json& record, const std::string& path,
                         std::size_t line, const std::string& fallback_id,
                         const IngestOptions& options) {
  if (!record.is_object()) {
    throw IoError(line_error(path, line, "record must be a JSON object"));
  }
  Interaction interaction;
  if (record.contains("id")) {
    if (!record["id"].is_string()) {
      throw IoError(line_error(path, line, "id must be a string"));
    }
    interaction.id = record["id"].get<std::string>();
  } else {
    interaction.id = fallback_id;
  }
  if (!record.contains("turns")) {
    throw IoError(line_error(path, line, "missing field turns"));
  }
  const json& turns = record["turns"];
  if (!turns.is_array() || turns.empty()) {
    throw IoError(line_error(path, line, "turns must be a non-empty array"));
  }
  for (const json& t : turns) {
    if (!t.is_object() || !t.contains("role")) {
      throw IoError(line_error(path, line, "missing field role"));
    }
    if (!t.contains("content")) {
      throw IoError(line_error(path, line, "missing field content"));
    }
    if (!t["role"].is_string() || !t["content"].is_string()) {
      throw IoError(
          line_error(path, line, "role and content must be strings"));
    }
    std::string role = t["role"].get<std::string>();
    auto it = kRolesByName.find(role);
    if (it == kRolesByName.end()) {
      throw IoError(line_error(path, line, "unknown role \"" + role + "\""));
    }
    interaction.turns.push_back({it->second, t["content"].get<std::string>()});
  }
  if (record.contains("complete")) {
    if (!record["complete"].is_boolean()) {
      throw IoError(line_error(path, line, "complete must be a boolean"));
    }
    interaction.complete_label = record["complete"].get<bool>();
  } else {
    interaction.complete_label = options.assume_complete;
  }
  if (record.contains("metadata")) {
    const json& metadata = record["metadata"];
    if (!metadata.is_object()) {
      throw IoError(line_error(path, line, "metadata must be an object"));
    }
    for (auto it = metadata.begin(); it != metadata.end(); ++it) {
      if (!it.value().is_string()) {
        throw IoError(
            line_error(path, line, "metadata values must be strings"));
      }
      interaction.metadata[it.key()] = it.value().get<std::string>();
    }
  }
  interaction.n_turns = count_pairs(interaction.turns);
  if (interaction.n_turns < 1) {
    throw IoError(
        line_error(path, line, "no user/assistant prompt-response pair"));
  }
  return interaction;
}

}  // namespace

const std::string& role_name(Role role) {
  static const std::string kNames[] = {"user", "assistant", "system", "tool"};
  return kNames[static_cast<int>(role)];
}

Role role_from_name(const std::string& name) {
  auto it = kRolesByName.find(name);
  if (it == kRolesByName.end()) {
    throw ConfigError("unknown role \"" + name + "\"");
  }
  return it->second;
}

int count_pairs(const std::vector<Turn>& turns) {
  int pairs = 0;
  bool open_prompt = false;
  bool answered = false;
  for (const Turn& t : turns) {
    if (t.role == Role::user) {
      if (open_prompt && answered) ++pairs;
      open_prompt = true;
      answered = false;
    } else if (t.role == Role::assistant && open_prompt) {
      answered = true;
    }
  }
  if (open_prompt && answered) ++pairs;
  return pairs;
}

std::size_t pair_end_index(const std::vector<Turn>& turns, int upto) {
  if (upto <= 0) return 0;
  int pairs = 0;
  bool open_prompt = false;
  bool answered = false;
  std::size_t end = 0;
  for (std::size_t i = 0; i < turns.size(); ++i) {
    const Turn& t = turns[i];
    if (t.role == Role::user) {
      if (open_prompt && answered && ++pairs == upto) return end;
      open_prompt = true;
      answered = false;
    } else if (t.role == Role::assistant && open_prompt) {
      answered = true;
    }
    if (open_prompt && answered) end = i + 1;
  }
  if (open_prompt && answered) ++pairs;
  if (pairs < upto) {
    throw Error("pair_end_index: interaction has only " +
                std::to_string(pairs) + " pairs, requested " +
                std::to_string(upto));
  }
  return end;
}

std::vector<Interaction> ingest_dataset(const std::string& path,
                                        const IngestOptions& options) {
  std::string text = read_text_file(path);
  std::string filename = std::filesystem::path(path).filename().string();
  std::vector<std::string> lines = split_lines(text);
  std::vector<Interaction> dataset;
  std::map<std::string, std::size_t> seen_ids;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    std::size_t line_number = i + 1;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw IoError(line_error(path, line_number,
                               std::string("malformed JSON: ") + e.what()));
    }
    std::string fallback_id = filename + ":" + std::to_string(line_number);
    Interaction interaction =
        parse_record(record, path, line_number, fallback_id, options);
    auto [it, inserted] = seen_ids.emplace(interaction.id, line_number);
    if (!inserted) {
      throw IoError(path + ": duplicate id \"" + interaction.id +
                    "\" at lines " + std::to_string(it->second) + " and " +
                    std::to_string(line_number));
    }
    dataset.push_back(std::move(interaction));
  }
  return dataset;
}

void write_dataset(const std::string& path,
                   const std::vector<Interaction>& dataset) {
  std::string out;
  for (const Interaction& interaction : dataset) {
    json record;
    record["id"] = interaction.id;
    json turns = json::array();
    for (const Turn& t : interaction.turns) {
      turns.push_back({{"role", role_name(t.role)}, {"content", t.content}});
    }
    record["turns"] = std::move(turns);
    if (interaction.complete_label.has_value()) {
      record["complete"] = *interaction.complete_label;
    }
    if (!interaction.metadata.empty()) {
      record["metadata"] = interaction.metadata;
    }
    out += record.dump();
    out += "\n";
  }
  write_text_file_atomic(path, out);
}

std::string concat_turns(const Interaction& interaction, int upto,
                         const TurnTemplate& turn_template) {
  std::size_t end = interaction.turns.size();
  if (upto >= 0) {
    if (upto > interaction.n_turns) {
      throw Error("concat_turns: upto " + std::to_string(upto) +
                  " exceeds n_turns " + std::to_string(interaction.n_turns) +
                  " for \"" + interaction.id + "\"");
    }
    end = pair_end_index(interaction.turns, upto);
  }
  return serialize_range(interaction, end, turn_template);
}

Interaction truncate_interaction(const Interaction& interaction, Rng& rng) {
  if (interaction.n_turns < 2) {
    throw Error("cannot truncate single-turn interaction \"" +
                interaction.id + "\"");
  }
  int k = rng.uniform_int(1, interaction.n_turns - 1);
  Interaction out;
  out.id = interaction.id + ":trunc";
  std::size_t end = pair_end_index(interaction.turns, k);
  out.turns.assign(interaction.turns.begin(),
                   interaction.turns.begin() +
                       static_cast<std::ptrdiff_t>(end));
  out.n_turns = k;
  out.complete_label = false;
  out.metadata = interaction.metadata;
  return out;
}

std::string sft_input(const Interaction& interaction,
                      const TurnTemplate& turn_template) {
  if (interaction.turns.empty() ||
      interaction.turns.back().role != Role::assistant) {
    throw Error("sft_input: interaction \"" + interaction.id +
                "\" does not end in an assistant turn");
  }
  return serialize_range(interaction, interaction.turns.size() - 1,
                         turn_template);
}

std::vector<SftPair> export_sft_pairs(const std::vector<Interaction>& dataset,
                                      const std::string& end_tag,
                                      const TurnTemplate& turn_template) {
  std::vector<std::string> offenders;
  for (const Interaction& interaction : dataset) {
    if (interaction.turns.empty() ||
        interaction.turns.back().role != Role::assistant) {
      offenders.push_back(interaction.id);
    }
  }
  if (!offenders.empty()) {
    throw Error(
        "export_sft_pairs: interactions not ending in an assistant turn: " +
        join(offenders, ", "));
  }
  std::vector<SftPair> pairs;
  pairs.reserve(dataset.size());
  for (const Interaction& interaction : dataset) {
    SftPair pair;
    pair.input = sft_input(interaction, turn_template);
    pair.target = interaction.turns.back().content + end_tag;
    pair.source_id = interaction.id;
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

void write_sft_pairs(const std::string& path,
                     const std::vector<SftPair>& pairs) {
  std::string out;
  for (const SftPair& pair : pairs) {
    json record = {{"input", pair.input},
                   {"target", pair.target},
                   {"source_id", pair.source_id}};
    out += record.dump();
    out += "\n";
  }
  write_text_file_atomic(path, out);
}

}  // namespace goalgauge
