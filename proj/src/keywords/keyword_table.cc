// maac/keywords/keyword_table.cc

#include "maac/keywords/keyword_table.h"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace maac::kw {

const Stoplist& default_stoplist() {
  static const Stoplist list = {"make", "go",   "others", "be",  "have",
                                "do",   "get",  "come",   "take", "thing",
                                "something", "someone", "sound", "sounds",
                                "noise", "background"};
  return list;
}

Stoplist read_stoplist(std::istream& in) {
  Stoplist out;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string w;
    if (ls >> w && w[0] != '#') out.insert(w);
  }
  return out;
}

KeywordTable::KeywordTable(std::vector<std::string> entries,
                           std::vector<std::uint64_t> frequencies,
                           Stoplist stoplist)
    : entries_(std::move(entries)),
      freqs_(std::move(frequencies)),
      stoplist_(std::move(stoplist)),
      requested_(entries_.size()) {
  if (freqs_.size() != entries_.size()) {
    throw std::invalid_argument("KeywordTable: entries/frequencies differ");
  }
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!index_.emplace(entries_[i], static_cast<int>(i)).second) {
      throw std::invalid_argument("KeywordTable: duplicate keyword " +
                                  entries_[i]);
    }
  }
}

int KeywordTable::index_of(const std::string& keyword) const {
  auto it = index_.find(keyword);
  return it == index_.end() ? -1 : it->second;
}

void KeywordTable::write_tsv(std::ostream& out) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    out << entries_[i] << '\t' << freqs_[i] << '\n';
  }
}

KeywordTable KeywordTable::read_tsv(std::istream& in) {
  std::vector<std::string> entries;
  std::vector<std::uint64_t> freqs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw std::invalid_argument("keyword TSV line " +
                                  std::to_string(line_no) +
                                  ": expected keyword<TAB>frequency");
    }
    entries.push_back(line.substr(0, tab));
    try {
      freqs.push_back(std::stoull(line.substr(tab + 1)));
    } catch (const std::exception&) {
      throw std::invalid_argument("keyword TSV line " +
                                  std::to_string(line_no) +
                                  ": bad frequency");
    }
  }
  return KeywordTable(std::move(entries), std::move(freqs));
}

std::map<std::string, std::uint64_t> count_keyword_candidates(
    std::span<const Caption> corpus, const Stoplist& stoplist,
    const Tagger& tagger) {
  std::map<std::string, std::uint64_t> counts;
  for (const auto& cap : corpus) {
    for (const auto& tok : cap.tokens) {
      Tagged t = tagger.tag(tok);
      if (t.pos == Pos::kOther || stoplist.count(t.canonical)) continue;
      ++counts[t.canonical];
    }
  }
  return counts;
}

KeywordTable build_keyword_table(std::span<const Caption> corpus,
                                 std::size_t n, const Stoplist& stoplist,
                                 const Tagger& tagger) {
  if (n == 0) throw std::invalid_argument("build_keyword_table: N must be >= 1");
  if (corpus.empty()) {
    throw std::invalid_argument("build_keyword_table: empty corpus");
  }
  auto counts = count_keyword_candidates(corpus, stoplist, tagger);
  if (counts.empty()) {
    throw std::invalid_argument(
        "build_keyword_table: no noun/verb candidates outside the stoplist");
  }
  std::vector<std::pair<std::string, std::uint64_t>> ranked(counts.begin(),
                                                            counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) {
                     if (a.second != b.second) return a.second > b.second;
                     return a.first < b.first;
                   });
  if (ranked.size() > n) ranked.resize(n);
  std::vector<std::string> entries;
  std::vector<std::uint64_t> freqs;
  for (auto& [w, c] : ranked) {
    entries.push_back(w);
    freqs.push_back(c);
  }
  KeywordTable table(std::move(entries), std::move(freqs), stoplist);
  table.set_requested_size(n);
  return table;
}

MultiHotLabel encode_multihot(std::span<const Caption> clip_captions,
                              const KeywordTable& table, const Tagger& tagger) {
  MultiHotLabel label;
  label.bits.assign(table.size(), 0);
  if (!clip_captions.empty()) label.clip_id = clip_captions.front().clip_id;
  for (const auto& cap : clip_captions) {
    for (const auto& tok : cap.tokens) {
      const int idx = table.index_of(tagger.tag(tok).canonical);
      if (idx >= 0) label.bits[static_cast<std::size_t>(idx)] = 1;
    }
  }
  return label;
}

}  // namespace maac::kw
