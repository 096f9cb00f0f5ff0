#pragma once

#include <span>
#include <string_view>

namespace selfevo::llm::detail {

struct EmbeddedPrompt {
  std::string_view file_name;
  std::string_view content;
};

std::span<const EmbeddedPrompt> embedded_prompts();

}  // namespace selfevo::llm::detail
