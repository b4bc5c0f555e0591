#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <set>

#include "maac/data/corpus.h"
#include "maac/data/synth.h"
#include "maac/keywords/keyword_table.h"

namespace maac::data {
namespace {

std::vector<kw::Caption> captions_of(const SynthClip& c) {
  std::vector<kw::Caption> out;
  for (const auto& s : c.captions) out.push_back(kw::tokenize_caption(s, c.clip_id));
  return out;
}

TEST(Synth, SameSeedSameDataset) {
  SynthOptions opt;
  opt.n_clips = 6;
  const auto a = generate_synthetic(opt);
  const auto b = generate_synthetic(opt);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].clip_id, b[i].clip_id);
    EXPECT_EQ(a[i].events, b[i].events);
    EXPECT_EQ(a[i].captions, b[i].captions);
    EXPECT_EQ(a[i].wave.samples, b[i].wave.samples);
  }
  opt.seed = 1;
  const auto c = generate_synthetic(opt);
  EXPECT_NE(a[0].wave.samples, c[0].wave.samples);
}

TEST(Synth, ClipShapeAndEventCounts) {
  SynthOptions opt;
  opt.n_clips = 30;
  for (const auto& clip : generate_synthetic(opt)) {
    EXPECT_GE(clip.events.size(), 2u);
    EXPECT_LE(clip.events.size(), 4u);
    EXPECT_TRUE(std::is_sorted(clip.events.begin(), clip.events.end()));
    EXPECT_EQ(clip.captions.size(), 5u);
    EXPECT_EQ(clip.wave.sample_rate, 16000);
    EXPECT_EQ(clip.wave.samples.size(), 24000u);
    for (double s : clip.wave.samples) ASSERT_LT(std::abs(s), 1.0);
  }
}

TEST(Synth, FirstCaptionIsCanonical) {
  SynthOptions opt;
  opt.n_clips = 20;
  for (const auto& clip : generate_synthetic(opt)) {
    std::string want;
    for (int e : clip.events) {
      const auto& ev = synth_events()[static_cast<std::size_t>(e)];
      const bool vowel = std::string("aeiou").find(ev.noun[0]) != std::string::npos;
      const std::string article = vowel ? "an " : "a ";
      want += (want.empty() ? "" : " and ") + article + ev.noun + " " + ev.verb_3s;
    }
    want[0] = static_cast<char>(std::toupper(want[0]));
    EXPECT_EQ(clip.captions[0], want + ".");
  }
}

TEST(Synth, EveryPlantedKeywordIsInEveryCaption) {
  SynthOptions opt;
  opt.n_clips = 30;
  for (const auto& clip : generate_synthetic(opt)) {
    const auto planted = planted_keywords(clip);
    for (const auto& cap : captions_of(clip)) {
      std::set<std::string> canon;
      for (const auto& t : cap.tokens) canon.insert(kw::tag_and_canonicalize(t).canonical);
      for (const auto& k : planted) EXPECT_TRUE(canon.count(k)) << k << " in " << clip.clip_id;
    }
  }
}

TEST(Synth, KeywordPipelineRecoversPlantedLabels) {
  SynthOptions opt;
  opt.n_clips = 50;
  const auto clips = generate_synthetic(opt);
  std::vector<kw::Caption> all;
  std::set<std::string> planted_union;
  for (const auto& c : clips) {
    for (auto& cap : captions_of(c)) all.push_back(std::move(cap));
    for (const auto& k : planted_keywords(c)) planted_union.insert(k);
  }
  const auto table = kw::build_keyword_table(all, 20, kw::default_stoplist());
  EXPECT_EQ(std::set<std::string>(table.entries().begin(), table.entries().end()),
            planted_union);
  for (const auto& c : clips) {
    const auto label = kw::encode_multihot(captions_of(c), table);
    const auto planted = planted_keywords(c);
    for (std::size_t i = 0; i < table.size(); ++i) {
      const bool want = std::count(planted.begin(), planted.end(), table.entry(i)) > 0;
      EXPECT_EQ(label.bits[i] == 1, want) << c.clip_id << " " << table.entry(i);
    }
  }
}

TEST(Synth, EventBandsAreDistinctAndInside) {
  const auto p = audio::LogMelParams::tiny();
  double prev = 0;
  for (std::size_t e = 0; e < 10; ++e) {
    const double hz = synth_event_hz(e, 10, p);
    EXPECT_GT(hz, prev);
    EXPECT_LT(hz, p.sample_rate / 2.0);
    prev = hz;
  }
}

TEST(Synth, BadOptionsRejected) {
  SynthOptions opt;
  opt.n_clips = 0;
  EXPECT_THROW(opt.validate(), std::invalid_argument);
  opt = {};
  opt.n_events = 13;
  EXPECT_THROW(opt.validate(), std::invalid_argument);
  opt = {};
  opt.max_events = 11;
  EXPECT_THROW(opt.validate(), std::invalid_argument);
}

TEST(Synth, FiftyClipsWrittenQuicklyAndReadBack) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "maac_synth_test";
  fs::remove_all(dir);
  SynthOptions opt;
  const auto t0 = std::chrono::steady_clock::now();
  const auto clips = generate_synthetic(opt);
  write_synthetic(dir, opt, clips);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_LT(secs, 10.0);
  const auto corpus = load_corpus_csv(dir / "captions.csv", dir / "features", DataKind::kFeatures);
  EXPECT_EQ(corpus.table.clips.size(), 50u);
  EXPECT_TRUE(fs::exists(dir / "planted.json"));
  const auto feat = audio::read_feature_cache(dir / "features" / "synth_0000.feat", opt.features);
  EXPECT_EQ(feat.n_frames(), 92u);
  EXPECT_EQ(feat.n_mels(), 32u);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace maac::data
