// maac/keywords/keyword_table.h
//
// Keyword vocabulary mined from captions and the per-clip multi-hot targets
// used to pretrain the keyword encoder.

#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "maac/keywords/lexicon.h"
#include "maac/keywords/text.h"

namespace maac::kw {

using Stoplist = std::unordered_set<std::string>;

// make, go, others plus auxiliaries and light verbs.
const Stoplist& default_stoplist();
Stoplist read_stoplist(std::istream& in);

class KeywordTable {
 public:
  KeywordTable() = default;
  KeywordTable(std::vector<std::string> entries,
               std::vector<std::uint64_t> frequencies, Stoplist stoplist = {});

  std::size_t size() const { return entries_.size(); }
  // N that was requested; size() may be smaller when candidates ran out.
  std::size_t requested_size() const { return requested_; }
  void set_requested_size(std::size_t n) { requested_ = n; }

  const std::vector<std::string>& entries() const { return entries_; }
  const std::vector<std::uint64_t>& frequencies() const { return freqs_; }
  const Stoplist& stoplist() const { return stoplist_; }
  const std::string& entry(std::size_t i) const { return entries_.at(i); }
  // Position of a canonical keyword, or -1.
  int index_of(const std::string& keyword) const;

  // "keyword<TAB>frequency" per line in rank order.
  void write_tsv(std::ostream& out) const;
  static KeywordTable read_tsv(std::istream& in);

 private:
  std::vector<std::string> entries_;
  std::vector<std::uint64_t> freqs_;
  std::unordered_map<std::string, int> index_;
  Stoplist stoplist_;
  std::size_t requested_ = 0;
};

// Counts of canonical noun/verb forms over all caption tokens, stoplist
// removed.
std::map<std::string, std::uint64_t> count_keyword_candidates(
    std::span<const Caption> corpus, const Stoplist& stoplist,
    const Tagger& tagger = LexiconTagger::bundled());

// Top-n candidates by descending frequency, ties lexicographic. Fewer than n
// candidates yields all of them. Throws on an empty corpus, n == 0 or when
// no candidate survives the stoplist.
KeywordTable build_keyword_table(std::span<const Caption> corpus,
                                 std::size_t n, const Stoplist& stoplist,
                                 const Tagger& tagger = LexiconTagger::bundled());

struct MultiHotLabel {
  std::string clip_id;
  std::vector<std::uint8_t> bits;

  bool operator==(const MultiHotLabel&) const = default;
};

// Union over the clip's captions of the keywords their canonical tokens hit.
MultiHotLabel encode_multihot(std::span<const Caption> clip_captions,
                              const KeywordTable& table,
                              const Tagger& tagger = LexiconTagger::bundled());

}  // namespace maac::kw
