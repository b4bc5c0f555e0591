// maac/keywords/text.h

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace maac::kw {

struct Caption {
  std::string clip_id;
  std::vector<std::string> tokens;
};

// Lowercases ASCII letters and treats every ASCII punctuation character
// (hyphens and apostrophes included) as a separator. Digits stay as tokens.
// Throws std::invalid_argument when nothing is left.
Caption tokenize_caption(std::string_view text, std::string clip_id = {});

std::string join_tokens(const std::vector<std::string>& tokens);

}  // namespace maac::kw
