#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "goalgauge/interaction.hpp"
#include "goalgauge/mock_backend.hpp"

namespace goalgauge {

// A synthetic corpus with known topic structure, plus the mock-backend
// scripting that makes every pipeline phase behave consistently with it:
// summaries name the planted topic, cluster labels collapse to one string
// per topic, the merge judge says yes exactly for same-topic groups, and
// continuations end with an end tag exactly for logs whose objective was
// reached. Case numbers are globally unique (1000 * (topic + 1) + index) and
// appear verbatim in the logs, which is how the scripted replies recover the
// topic without storing the dataset.
struct PlantedWorldConfig {
  std::vector<std::string> topics = {"flight and hotel booking",
                                     "python code debugging",
                                     "dinner recipe planning"};
  int samples_per_topic = 40;
  int min_turns = 2;  // prompt-response pairs per interaction
  int max_turns = 4;
  std::uint64_t seed = 0;
  std::size_t embedding_dim = 96;
};

struct PlantedWorld {
  PlantedWorldConfig config;
  std::vector<Interaction> dataset;
  std::map<std::string, int> topic_index;  // sample id -> topic

  void install(MockBackend& backend) const;
  const std::map<std::string, int>& topic_assignments() const {
    return topic_index;
  }
};

PlantedWorld make_planted_world(const PlantedWorldConfig& config = {});

// Entry point for {"type": "program"} records in a mock spec file. The only
// supported program is "planted_world"; its record may override any
// PlantedWorldConfig field.
void install_mock_program(MockBackend& backend,
                          const std::string& record_json);

}  // namespace goalgauge
