// maac/data/vocab.h
//
// Caption vocabulary. Ids 0..3 are fixed: BOS, EOS, PAD, UNK. Words follow
// in descending training frequency, ties lexicographic.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "maac/keywords/text.h"

namespace maac::data {

inline constexpr int kBos = 0;
inline constexpr int kEos = 1;
inline constexpr int kPad = 2;
inline constexpr int kUnk = 3;
inline constexpr int kNumSpecials = 4;

class Vocab {
 public:
  Vocab();
  // Counts tokens of `captions`; `extra` words (keyword canonical forms) are
  // added with zero count when absent so every keyword has an id.
  static Vocab build(std::span<const kw::Caption> captions,
                     std::span<const std::string> extra = {});
  static Vocab from_words(std::vector<std::string> words_in_id_order);

  std::size_t size() const { return words_.size(); }
  const std::string& word(int id) const;
  // kUnk for unknown words.
  int id(const std::string& word) const;
  bool contains(const std::string& word) const { return ids_.count(word) > 0; }
  const std::vector<std::string>& words() const { return words_; }

  std::vector<int> encode(std::span<const std::string> tokens) const;
  // Stops at EOS; skips BOS and PAD.
  std::vector<std::string> decode(std::span<const int> ids) const;
  std::string hash() const;

  nlohmann::json to_json() const { return words_; }
  static Vocab from_json(const nlohmann::json& j);

  bool operator==(const Vocab& other) const { return words_ == other.words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> ids_;
};

}  // namespace maac::data
