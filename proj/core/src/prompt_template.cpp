#include "goalgauge/prompt_template.hpp"

#include <algorithm>

#include "goalgauge/errors.hpp"

namespace goalgauge {

std::string render_prompt(const std::vector<ChatMessage>& conversation,
                          const std::optional<std::string>& partial,
                          const ChatTemplate& chat_template) {
  if (conversation.empty()) {
    throw Error("render_prompt: empty conversation");
  }
  std::string out = chat_template.begin;
  for (const ChatMessage& message : conversation) {
    if (std::find(chat_template.roles.begin(), chat_template.roles.end(),
                  message.role) == chat_template.roles.end()) {
      throw Error("render_prompt: unknown role \"" + message.role + "\"");
    }
    out += chat_template.header_prefix;
    out += message.role;
    out += chat_template.header_suffix;
    out += message.content;
    out += chat_template.turn_end;
  }
  out += chat_template.header_prefix;
  out += "assistant";
  out += chat_template.header_suffix;
  if (partial.has_value()) out += *partial;
  return out;
}

}  // namespace goalgauge
