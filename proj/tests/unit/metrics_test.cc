#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "maac/data/corpus.h"
#include "maac/data/csv.h"
#include "maac/metrics/metrics.h"
#include "maac/numerics/rng.h"

namespace maac::metrics {
namespace {

Tokens T(std::string_view s) { return kw::tokenize_caption(s).tokens; }

std::vector<EvalPair> golden_pairs() {
  const std::string dir = MAAC_TEST_DATA_DIR;
  const auto refs = data::read_captions_csv(std::filesystem::path(dir + "/golden_references.csv"));
  std::ifstream hin(dir + "/golden_hypotheses.csv");
  const auto hyps = data::read_hypotheses_csv(hin);
  std::vector<EvalPair> out;
  for (const auto& c : refs.clips) {
    EvalPair p;
    p.clip_id = c.clip_id;
    p.hypothesis = T(hyps.at(c.clip_id));
    for (const auto& cap : c.captions) p.references.push_back(cap.tokens);
    out.push_back(std::move(p));
  }
  return out;
}

TEST(MetricsGolden, MatchesOracle) {
  const auto pairs = golden_pairs();
  ASSERT_EQ(pairs.size(), 5u);
  EXPECT_NEAR(bleu_n(pairs, 1), 0.699593273346, 1e-4);
  EXPECT_NEAR(bleu_n(pairs, 2), 0.649942572903, 1e-4);
  EXPECT_NEAR(bleu_n(pairs, 3), 0.578212845626, 1e-4);
  EXPECT_NEAR(bleu_n(pairs, 4), 0.404154458237, 1e-4);
  EXPECT_NEAR(rouge_l(pairs), 0.561415425143, 1e-4);
  const CiderResult c = cider_d(pairs);
  EXPECT_NEAR(c.corpus, 1.583806321429, 1e-4);
  const double per[] = {2.564820775393, 1.691014127530, 1.890019821998, 1.773176882224, 0.0};
  ASSERT_EQ(c.per_clip.size(), 5u);
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(c.per_clip[i], per[i], 1e-4) << i;
}

// Same numbers the oracle script writes; guards against the two drifting.
TEST(MetricsGolden, OracleFileAgrees) {
  std::ifstream in(std::string(MAAC_SOURCE_DIR) + "/tests/oracle/golden_values.txt");
  ASSERT_TRUE(in);
  std::map<std::string, double> want;
  std::string k;
  double v;
  while (in >> k >> v) want[k] = v;
  const auto pairs = golden_pairs();
  EXPECT_NEAR(bleu_n(pairs, 4), want.at("bleu4"), 1e-4);
  EXPECT_NEAR(cider_d(pairs).corpus, want.at("cider_d"), 1e-4);
}

std::vector<EvalPair> identical_corpus() {
  const char* caps[] = {"a dog barks loudly in the distance",
                        "birds chirp in the tall trees",
                        "rain falls on a metal roof today",
                        "an engine hums while a car drives by"};
  std::vector<EvalPair> out;
  for (const char* c : caps) out.push_back({c, T(c), {T(c)}});
  return out;
}

TEST(MetricsMaxima, IdenticalCorpusIsExact) {
  const auto pairs = identical_corpus();
  for (int n = 1; n <= 4; ++n) EXPECT_EQ(bleu_n(pairs, n), 1.0) << n;
  EXPECT_EQ(rouge_l(pairs), 1.0);
  const CiderResult c = cider_d(pairs);
  EXPECT_EQ(c.corpus, 10.0);
  for (double x : c.per_clip) EXPECT_EQ(x, 10.0);
}

TEST(Bleu, ClippedRepeatedWord) {
  std::vector<EvalPair> p = {{"x", T("the the the"), {T("the cat")}}};
  EXPECT_NEAR(bleu_n(p, 1), 1.0 / 3.0, 1e-12);
}

TEST(Bleu, SingleIdenticalReference) {
  std::vector<EvalPair> p = {{"x", T("a b c"), {T("a b c")}}};
  EXPECT_EQ(bleu_n(p, 1), 1.0);
}

TEST(Bleu, NoMatchesIsZero) {
  std::vector<EvalPair> p = {{"x", T("a b c"), {T("d e f")}}};
  for (int n = 1; n <= 4; ++n) EXPECT_EQ(bleu_n(p, n), 0.0);
  std::vector<EvalPair> q = {{"x", T("a b c d"), {T("a c b d")}}};
  EXPECT_EQ(bleu_n(q, 3), 0.0);
  EXPECT_GT(bleu_n(q, 3, {.add_one_smoothing = true}), 0.0);
}

TEST(Bleu, ClosestReferenceLengthTiesToShorter) {
  // Hypothesis of 3 tokens, references of 2 and 4: tie, so r = 2 and BP = 1.
  std::vector<EvalPair> p = {{"x", T("a b c"), {T("a b"), T("a b c d")}}};
  EXPECT_EQ(bleu_n(p, 1), 1.0);
  // Only the 4-token reference: BP = exp(1 - 4/3).
  std::vector<EvalPair> q = {{"x", T("a b c"), {T("a b c d")}}};
  EXPECT_NEAR(bleu_n(q, 1), std::exp(1.0 - 4.0 / 3.0), 1e-12);
}

TEST(Bleu, Errors) {
  std::vector<EvalPair> none;
  EXPECT_THROW(bleu_n(none, 1), std::invalid_argument);
  std::vector<EvalPair> p = {{"x", T("a"), {T("a")}}};
  EXPECT_THROW(bleu_n(p, 0), std::invalid_argument);
  EXPECT_THROW(bleu_n(p, 5), std::invalid_argument);
}

TEST(RougeL, HandExample) {
  std::vector<Tokens> refs = {T("a c d")};
  EXPECT_NEAR(rouge_l_sentence(T("a b c d"), refs), 0.8798076923076923, 1e-12);
}

TEST(RougeL, IdenticalAndDisjoint) {
  std::vector<Tokens> same = {T("a b")};
  EXPECT_EQ(rouge_l_sentence(T("a b"), same), 1.0);
  std::vector<Tokens> other = {T("c d")};
  EXPECT_EQ(rouge_l_sentence(T("a b"), other), 0.0);
}

TEST(RougeL, EmptyReferenceIsError) {
  std::vector<EvalPair> p = {{"x", T("a"), {Tokens{}}}};
  EXPECT_THROW(rouge_l(p), std::invalid_argument);
  std::vector<Tokens> refs = {Tokens{}};
  EXPECT_THROW(rouge_l_sentence(T("a"), refs), std::invalid_argument);
}

TEST(CiderD, SingleClipExactMatchIsTen) {
  std::vector<EvalPair> p = {{"x", T("a dog barks in the park"), {T("a dog barks in the park")}}};
  EXPECT_NEAR(cider_d(p).corpus, 10.0, 1e-12);
}

TEST(CiderD, NoSharedNgramsIsZero) {
  auto pairs = identical_corpus();
  pairs[0].hypothesis = T("zzz yyy xxx");
  EXPECT_EQ(cider_d(pairs).per_clip[0], 0.0);
  std::vector<EvalPair> none;
  EXPECT_THROW(cider_d(none), std::invalid_argument);
}

TEST(MetricsProperties, PermutationInvariantAndBounded) {
  auto pairs = golden_pairs();
  const MetricReport ref = evaluate(pairs);
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    for (std::size_t k = pairs.size(); k > 1; --k) std::swap(pairs[k - 1], pairs[rng.below(k)]);
    for (auto& p : pairs) {
      for (std::size_t k = p.references.size(); k > 1; --k) {
        std::swap(p.references[k - 1], p.references[rng.below(k)]);
      }
    }
    const MetricReport r = evaluate(pairs);
    for (int n = 0; n < 4; ++n) EXPECT_NEAR(r.bleu[n], ref.bleu[n], 1e-12);
    EXPECT_NEAR(r.rouge_l, ref.rouge_l, 1e-12);
    EXPECT_NEAR(r.cider_d, ref.cider_d, 1e-12);
    for (int n = 0; n < 4; ++n) {
      EXPECT_GE(r.bleu[n], 0.0);
      EXPECT_LE(r.bleu[n], 1.0);
    }
    for (double c : r.cider_per_clip) {
      EXPECT_GE(c, 0.0);
      EXPECT_LE(c, 10.0 + 1e-12);
    }
  }
}

TEST(MetricsProperties, RandomCorporaStayInRange) {
  Rng rng(9);
  const char* words[] = {"a", "dog", "barks", "the", "bird", "sings", "rain", "falls"};
  auto sentence = [&] {
    Tokens t;
    const std::size_t n = 1 + rng.below(7);
    for (std::size_t i = 0; i < n; ++i) t.push_back(words[rng.below(8)]);
    return t;
  };
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<EvalPair> pairs;
    const std::size_t clips = 1 + rng.below(4);
    for (std::size_t c = 0; c < clips; ++c) {
      EvalPair p{std::to_string(c), sentence(), {}};
      const std::size_t nr = 1 + rng.below(5);
      for (std::size_t r = 0; r < nr; ++r) p.references.push_back(sentence());
      pairs.push_back(p);
    }
    const MetricReport r = evaluate(pairs);
    for (double b : r.bleu) {
      EXPECT_GE(b, 0.0);
      EXPECT_LE(b, 1.0 + 1e-12);
    }
    EXPECT_GE(r.rouge_l, 0.0);
    EXPECT_LE(r.rouge_l, 1.0 + 1e-12);
    for (double c : r.cider_per_clip) {
      EXPECT_GE(c, 0.0);
      EXPECT_LE(c, 10.0 + 1e-9);
    }
  }
}

TEST(Spider, TableArithmetic) {
  EXPECT_NEAR(spider(49.1, 13.1), 31.1, 1e-12);
  EXPECT_NEAR(spider(0.491, 0.131) * 100, 31.1, 1e-9);
  EXPECT_EQ(spider(0.4, 0.4), 0.4);
  EXPECT_NEAR(spider(4.0, 0.2, SpiderMode::kUnitMean), 0.3, 1e-12);
}

TEST(Spider, OmittedWithoutSpice) {
  const auto pairs = golden_pairs();
  const MetricReport r = evaluate(pairs);
  EXPECT_FALSE(r.spider.has_value());
  const auto j = r.to_json(pairs);
  EXPECT_FALSE(j["raw"].contains("spider"));
  EXPECT_FALSE(j["raw"].contains("spice"));
  EXPECT_NEAR(j["display_x100"]["cider_d"].get<double>(), 100 * r.cider_d, 1e-9);
  EXPECT_EQ(j["cider_d_per_clip"].size(), 5u);

  const MetricReport s = evaluate(pairs, 0.1);
  ASSERT_TRUE(s.spider.has_value());
  EXPECT_NEAR(*s.spider, (s.cider_d + 0.1) / 2, 1e-12);
  EXPECT_EQ(s.to_json(pairs)["spider_mode"], "raw_mean");
}

TEST(Csv, QuotesAndLineNumbers) {
  std::istringstream in("\xEF\xBB\xBF" "a,b\r\n\"x, y\",\"he said \"\"hi\"\"\"\n\n\"multi\nline\",z\n");
  const auto rows = data::read_csv(in);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].fields, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(rows[1].fields, (std::vector<std::string>{"x, y", "he said \"hi\""}));
  EXPECT_EQ(rows[2].line, 4u);
  EXPECT_EQ(rows[2].fields[0], "multi\nline");
  std::istringstream bad("a,b\n\"open,c\n");
  try {
    data::read_csv(bad);
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(Csv, EscapeRoundTrip) {
  std::ostringstream out;
  data::write_csv_row(out, {"plain", "with,comma", "quote\"d", "new\nline"});
  std::istringstream in(out.str());
  const auto rows = data::read_csv(in);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].fields,
            (std::vector<std::string>{"plain", "with,comma", "quote\"d", "new\nline"}));
}

TEST(CaptionsCsv, EmptyCaptionsSkippedAndRowsRejected) {
  std::istringstream in(
      "file_name,caption_1,caption_2\n"
      "a.wav,A dog barks.,\n"
      "b.wav,,\n"
      "c.wav,?!,birds sing\n");
  const auto t = data::read_captions_csv(in);
  ASSERT_EQ(t.clips.size(), 2u);
  EXPECT_EQ(t.clips[0].captions.size(), 1u);
  EXPECT_EQ(t.clips[0].captions[0].tokens, (Tokens{"a", "dog", "barks"}));
  EXPECT_EQ(t.clips[1].clip_id, "c.wav");
  ASSERT_EQ(t.rejected.size(), 1u);
  EXPECT_EQ(t.rejected[0].line, 3u);
}

TEST(CaptionsCsv, MalformedRowsNameTheLine) {
  std::istringstream ragged("file_name,caption_1\na.wav,x\nb.wav,y,z\n");
  try {
    data::read_captions_csv(ragged);
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  std::istringstream dup("file_name,caption_1\na.wav,x\na.wav,y\n");
  EXPECT_THROW(data::read_captions_csv(dup), std::runtime_error);
  std::istringstream header("name,text\na,b\n");
  EXPECT_THROW(data::read_captions_csv(header), std::runtime_error);
}

TEST(CaptionsCsv, MissingDataFilesListed) {
  const auto dir = std::filesystem::temp_directory_path() / "maac_corpus_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "caps.csv") << "file_name,caption_1\nhere.wav,x y\ngone.wav,z\nalso.wav,w\n";
    std::ofstream(dir / "here.wav") << "stub";
  }
  try {
    data::load_corpus_csv(dir / "caps.csv", dir, data::DataKind::kAudio);
    FAIL();
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("gone.wav"), std::string::npos);
    EXPECT_NE(msg.find("also.wav"), std::string::npos);
    EXPECT_NE(msg.find("line 3"), std::string::npos);
    EXPECT_EQ(msg.find("here.wav"), std::string::npos);
  }
  EXPECT_EQ(data::clip_data_path(dir, "x.wav", data::DataKind::kFeatures), dir / "x.feat");
  std::filesystem::remove_all(dir);
}

TEST(CaptionsCsv, WriteReadRoundTrip) {
  std::istringstream in("file_name,caption_1,caption_2\na.wav,a dog barks,the dog\nb.wav,rain,\n");
  const auto t = data::read_captions_csv(in);
  std::stringstream io;
  data::write_captions_csv(io, t);
  const auto back = data::read_captions_csv(io);
  ASSERT_EQ(back.clips.size(), 2u);
  EXPECT_EQ(back.clips[0].captions[1].tokens, (Tokens{"the", "dog"}));
  EXPECT_EQ(back.clips[1].captions.size(), 1u);
}

}  // namespace
}  // namespace maac::metrics
