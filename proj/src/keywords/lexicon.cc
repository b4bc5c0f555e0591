// maac/keywords/lexicon.cc

#include "maac/keywords/lexicon.h"

#include <sstream>
#include <stdexcept>
#include <vector>

namespace maac::kw {
namespace {

// Nouns and verbs that show up in sound-event descriptions. Words that are
// both are listed under the reading that dominates in captions.
constexpr std::string_view kNouns =
    "air aircraft airplane alarm animal applause audience baby background "
    "bag ball band bass beach beat bee bell bells bicycle bike bird birds "
    "blender boat bottle bowl branch brook bus buzzer cafe call car cart cat "
    "chain chair chicken child children chime church city clap clock cloth "
    "coin computer construction conversation cow crickets crow crowd cup "
    "cymbal dishes distance dog door doorbell drill drum drums duck electricity "
    "engine fan faucet feet fire firework fireworks floor fly food footsteps "
    "forest fountain frog frogs fryer gate glass goat goose gravel ground "
    "guitar gun gunshot gust hair hall hallway hammer hand hands heater "
    "helicopter highway hill horn horse house insect insects instrument jet "
    "kettle key keyboard keys kid kids kitchen knife lake lawnmower leaf "
    "leaves liquid machine man market metal microwave mixer morning motor "
    "motorcycle mouse music night noise object ocean office oil orchestra "
    "paper park people person phone piano pigeon pipe plane plastic plate "
    "pot printer pump rain river road rock roof room rooster rope saw scissors "
    "sea seagull sheep shoe shoes shop shower silence siren sky snow sound "
    "sounds speaker speech static station steam stick stone storm stove "
    "stream street string subway surface table tap thunder tin toilet tool "
    "town toy track traffic train tree trees truck trumpet tube tunnel typewriter "
    "vacuum van vehicle violin voice voices wall washer watch water waterfall "
    "wave waves whistle wind window wing wings wire woman women wood woodpecker "
    "wool zipper";

constexpr std::string_view kVerbs =
    "bang bark beat beep begin blow boil bounce break breathe brush bubble "
    "buzz call cheer chew chirp chop clang clap clatter click close clink "
    "coo cough crackle crash creak croak crunch cry cut dance drip drive drop "
    "echo fall fill flap flick flow fly fry gallop gargle giggle go grind "
    "growl grunt gurgle hammer hiss hit honk hoot howl hum idle jingle kick "
    "knock land laugh leak make meow mix moo move murmur open pass patter "
    "pause peck play pound pour pull purr push quack rattle ride ring roar "
    "rub run rustle scrape scratch scream shake shout shut sing sizzle "
    "slam slide snap snore speak splash spray squeak squeal start step stir "
    "stop strike sweep swing swish tap talk tap thud tick type vibrate walk "
    "wash whine whir whistle whoosh wind yell";

constexpr std::string_view kIrregular =
    "am be are be is be was be were be been be being be "
    "has have had have having have does do did do done do "
    "made make went go gone go goes go "
    "rang ring rung ring blew blow blown blow ran run flew fly flown fly "
    "fell fall fallen fall sang sing sung sing spoke speak spoken speak "
    "drove drive driven drive rode ride ridden ride shook shake shaken shake "
    "broke break broken break threw throw thrown throw struck strike "
    "swung swing began begin begun begin came come took take taken take "
    "sat sit stood stand hung hang";

void add_words(std::string_view words, auto&& add) {
  std::istringstream in{std::string(words)};
  std::string w;
  while (in >> w) add(std::move(w));
}

bool is_vowel(char c) {
  return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
}

// Candidate base forms for an inflected verb, most specific first.
std::vector<std::string> verb_candidates(std::string_view w) {
  std::vector<std::string> out;
  auto stem = [&](std::size_t n) { return std::string(w.substr(0, w.size() - n)); };
  auto undoubled = [&](const std::string& s) -> std::string {
    if (s.size() >= 3 && s.back() == s[s.size() - 2] && !is_vowel(s.back())) {
      return s.substr(0, s.size() - 1);
    }
    return {};
  };
  if (w.ends_with("ies") && w.size() > 4) out.push_back(stem(3) + "y");
  if (w.ends_with("ing") && w.size() > 4) {
    const std::string s = stem(3);
    out.push_back(s);
    out.push_back(s + "e");
    if (auto u = undoubled(s); !u.empty()) out.push_back(u);
  }
  if (w.ends_with("ied") && w.size() > 4) out.push_back(stem(3) + "y");
  if (w.ends_with("ed") && w.size() > 3) {
    const std::string s = stem(2);
    out.push_back(s);
    out.push_back(stem(1));
    if (auto u = undoubled(s); !u.empty()) out.push_back(u);
  }
  if (w.ends_with("es") && w.size() > 3) out.push_back(stem(2));
  if (w.ends_with("s") && !w.ends_with("ss") && w.size() > 2) {
    out.push_back(stem(1));
  }
  return out;
}

std::vector<std::string> noun_candidates(std::string_view w) {
  std::vector<std::string> out;
  auto stem = [&](std::size_t n) { return std::string(w.substr(0, w.size() - n)); };
  if (w.ends_with("ies") && w.size() > 4) out.push_back(stem(3) + "y");
  if (w.ends_with("es") && w.size() > 3) out.push_back(stem(2));
  if (w.ends_with("s") && !w.ends_with("ss") && w.size() > 2) {
    out.push_back(stem(1));
  }
  return out;
}

}  // namespace

std::string_view pos_name(Pos pos) {
  switch (pos) {
    case Pos::kNoun:
      return "noun";
    case Pos::kVerb:
      return "verb";
    case Pos::kOther:
      return "other";
  }
  return "other";
}

const LexiconTagger& LexiconTagger::bundled() {
  static const LexiconTagger tagger = [] {
    LexiconTagger t;
    add_words(kNouns, [&](std::string w) { t.add_noun(std::move(w)); });
    add_words(kVerbs, [&](std::string w) { t.add_verb(std::move(w)); });
    std::istringstream in{std::string(kIrregular)};
    std::string form, base;
    while (in >> form >> base) t.add_irregular(form, base);
    t.add_override("others", Pos::kOther);
    return t;
  }();
  return tagger;
}

LexiconTagger LexiconTagger::from_stream(std::istream& in) {
  LexiconTagger t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols;
    std::istringstream ls(line);
    std::string col;
    while (std::getline(ls, col, '\t')) cols.push_back(col);
    if (cols.size() == 2 && cols[1] == "noun") {
      t.add_noun(cols[0]);
    } else if (cols.size() == 2 && cols[1] == "verb") {
      t.add_verb(cols[0]);
    } else if (cols.size() == 2 && cols[1] == "other") {
      t.add_override(cols[0], Pos::kOther);
    } else if (cols.size() == 3 && cols[1] == "verb") {
      t.add_irregular(cols[0], cols[2]);
      t.add_verb(cols[2]);
    } else {
      throw std::invalid_argument("lexicon line " + std::to_string(line_no) +
                                  ": expected word<TAB>noun|verb|other");
    }
  }
  return t;
}

Tagged LexiconTagger::tag(std::string_view token) const {
  const std::string w(token);
  if (auto it = overrides_.find(w); it != overrides_.end()) {
    return {it->second, w};
  }
  if (auto it = irregular_.find(w); it != irregular_.end()) {
    return {Pos::kVerb, it->second};
  }
  if (nouns_.count(w)) return {Pos::kNoun, w};
  if (verbs_.count(w)) return {Pos::kVerb, w};
  for (auto& base : verb_candidates(w)) {
    if (verbs_.count(base)) return {Pos::kVerb, base};
  }
  for (auto& base : noun_candidates(w)) {
    if (nouns_.count(base)) return {Pos::kNoun, w};
  }
  return {Pos::kOther, w};
}

Tagged tag_and_canonicalize(std::string_view token, const Tagger& tagger) {
  return tagger.tag(token);
}

}  // namespace maac::kw
