// maac/keywords/lexicon.h
//
// Part-of-speech tagging and canonicalization for keyword mining. Verbs map
// to their base form; nouns are returned unchanged (a plural noun is a
// different keyword from its singular); everything else is tagged kOther.

#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>

namespace maac::kw {

enum class Pos { kNoun, kVerb, kOther };

std::string_view pos_name(Pos pos);

struct Tagged {
  Pos pos;
  std::string canonical;

  bool operator==(const Tagged&) const = default;
};

class Tagger {
 public:
  virtual ~Tagger() = default;
  virtual Tagged tag(std::string_view token) const = 0;
};

// Lookup order: explicit form overrides, irregular verb forms, noun bases,
// verb bases, regular verb suffix rules (-ies, -ing, -ed, -es, -s with
// e-restoration and doubled-consonant undoubling), regular noun plurals.
class LexiconTagger : public Tagger {
 public:
  LexiconTagger() = default;

  // Built-in lexicon covering common sound-description vocabulary.
  static const LexiconTagger& bundled();

  // Lines: "word<TAB>noun", "word<TAB>verb", "form<TAB>verb<TAB>base" for
  // irregular forms, "form<TAB>noun|other" for overrides. '#' starts a
  // comment line.
  static LexiconTagger from_stream(std::istream& in);

  void add_noun(std::string word) { nouns_.insert(std::move(word)); }
  void add_verb(std::string word) { verbs_.insert(std::move(word)); }
  void add_irregular(std::string form, std::string base) {
    irregular_.emplace(std::move(form), std::move(base));
  }
  void add_override(std::string form, Pos pos) {
    overrides_.emplace(std::move(form), pos);
  }

  Tagged tag(std::string_view token) const override;

  std::size_t size() const {
    return nouns_.size() + verbs_.size() + irregular_.size() +
           overrides_.size();
  }
  const std::unordered_set<std::string>& nouns() const { return nouns_; }
  const std::unordered_set<std::string>& verbs() const { return verbs_; }
  const std::unordered_map<std::string, std::string>& irregular() const {
    return irregular_;
  }

 private:
  std::unordered_set<std::string> nouns_;
  std::unordered_set<std::string> verbs_;
  std::unordered_map<std::string, std::string> irregular_;
  std::unordered_map<std::string, Pos> overrides_;
};

// Tags with the bundled lexicon unless another tagger is supplied.
Tagged tag_and_canonicalize(std::string_view token,
                            const Tagger& tagger = LexiconTagger::bundled());

}  // namespace maac::kw
