#pragma once

#include <optional>
#include <string>
#include <vector>

#include "goalgauge/gateway.hpp"

namespace goalgauge {

// Raw-prompt chat serialization for completion endpoints that front a
// chat-tuned model. Defaults follow the llama3 format.
struct ChatTemplate {
  std::string begin = "<|begin_of_text|>";
  std::string header_prefix = "<|start_header_id|>";
  std::string header_suffix = "<|end_header_id|>\n\n";
  std::string turn_end = "<|eot_id|>";
  std::vector<std::string> roles = {"system", "user", "assistant"};

  static ChatTemplate llama3() { return ChatTemplate{}; }
};

// Serializes the conversation and opens an assistant turn; `partial`, when
// given, continues that turn and is never followed by a turn-end marker, so
// render(conv, partial) == render(conv, nullopt) + partial. Throws on an
// empty conversation or a role the template does not know.
std::string render_prompt(const std::vector<ChatMessage>& conversation,
                          const std::optional<std::string>& partial =
                              std::nullopt,
                          const ChatTemplate& chat_template = {});

}  // namespace goalgauge
