// maac/data/vocab.cc

#include "maac/data/vocab.h"

#include <algorithm>
#include <cstdio>
#include <map>
#include <stdexcept>

#include "maac/numerics/rng.h"

namespace maac::data {

namespace {
const std::vector<std::string>& specials() {
  static const std::vector<std::string> s = {"<bos>", "<eos>", "<pad>", "<unk>"};
  return s;
}
}  // namespace

Vocab::Vocab() : words_(specials()) {
  for (int i = 0; i < kNumSpecials; ++i) ids_[words_[static_cast<std::size_t>(i)]] = i;
}

Vocab Vocab::from_words(std::vector<std::string> words_in_id_order) {
  Vocab v;
  std::size_t start = 0;
  if (words_in_id_order.size() >= specials().size() &&
      std::equal(specials().begin(), specials().end(), words_in_id_order.begin())) {
    start = specials().size();
  }
  for (std::size_t i = start; i < words_in_id_order.size(); ++i) {
    const std::string& w = words_in_id_order[i];
    if (w.empty() || !v.ids_.emplace(w, static_cast<int>(v.words_.size())).second) {
      throw std::invalid_argument("vocab: empty or duplicate word '" + w + "'");
    }
    v.words_.push_back(w);
  }
  return v;
}

Vocab Vocab::build(std::span<const kw::Caption> captions,
                   std::span<const std::string> extra) {
  std::map<std::string, std::uint64_t> counts;
  for (const auto& c : captions) {
    for (const auto& t : c.tokens) ++counts[t];
  }
  for (const auto& w : extra) counts.emplace(w, 0);
  for (const auto& s : specials()) counts.erase(s);
  std::vector<std::pair<std::string, std::uint64_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> words;
  for (auto& [w, c] : ranked) words.push_back(w);
  return from_words(std::move(words));
}

const std::string& Vocab::word(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= words_.size()) {
    throw std::out_of_range("vocab: id " + std::to_string(id) + " out of range");
  }
  return words_[static_cast<std::size_t>(id)];
}

int Vocab::id(const std::string& word) const {
  auto it = ids_.find(word);
  return it == ids_.end() ? kUnk : it->second;
}

std::vector<int> Vocab::encode(std::span<const std::string> tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

std::vector<std::string> Vocab::decode(std::span<const int> ids) const {
  std::vector<std::string> out;
  for (int i : ids) {
    if (i == kEos) break;
    if (i == kBos || i == kPad) continue;
    out.push_back(word(i));
  }
  return out;
}

std::string Vocab::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(nlohmann::json(words_).dump())));
  return buf;
}

Vocab Vocab::from_json(const nlohmann::json& j) {
  return from_words(j.get<std::vector<std::string>>());
}

}  // namespace maac::data
