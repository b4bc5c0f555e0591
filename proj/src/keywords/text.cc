// maac/keywords/text.cc

#include "maac/keywords/text.h"

#include <cctype>
#include <stdexcept>

namespace maac::kw {

Caption tokenize_caption(std::string_view text, std::string clip_id) {
  Caption out;
  out.clip_id = std::move(clip_id);
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.tokens.push_back(std::move(current));
    current.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x80 && (std::isspace(c) || std::ispunct(c))) {
      flush();
    } else if (c < 0x80) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else {
      current.push_back(ch);
    }
  }
  flush();
  if (out.tokens.empty()) {
    throw std::invalid_argument("tokenize_caption: empty caption after cleaning");
  }
  return out;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string s;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) s.push_back(' ');
    s += tokens[i];
  }
  return s;
}

}  // namespace maac::kw
