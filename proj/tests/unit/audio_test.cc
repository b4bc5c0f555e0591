#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "maac/audio/augment.h"
#include "maac/audio/features.h"
#include "maac/audio/wav.h"

namespace maac::audio {
namespace {

namespace fs = std::filesystem;

Waveform tone_mix(std::size_t n, int rate) {
  Waveform w;
  w.sample_rate = rate;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    w.samples.push_back(0.5 * std::sin(2 * std::numbers::pi * 440 * t) +
                        0.25 * std::sin(2 * std::numbers::pi * 3000 * t));
  }
  return w;
}

Waveform sine(double hz, std::size_t n, int rate, double amp = 1.0) {
  Waveform w;
  w.sample_rate = rate;
  for (std::size_t i = 0; i < n; ++i) {
    w.samples.push_back(amp * std::sin(2 * std::numbers::pi * hz * i / rate));
  }
  return w;
}

fs::path temp_path(const std::string& name) {
  return fs::temp_directory_path() / ("maac_audio_test_" + name);
}

// Reference values from tests/oracle/logmel_oracle.py.
TEST(MelFilterbank, MatchesReference) {
  const Tensor fb = mel_filterbank(LogMelParams::tiny());
  ASSERT_EQ(fb.shape(), (Shape{32, 257}));
  auto row_sum = [&](std::size_t j) {
    double s = 0;
    for (std::size_t k = 0; k < 257; ++k) s += fb.at(j, k);
    return s;
  };
  EXPECT_NEAR(row_sum(0), 1.80947422059309, 1e-12);
  EXPECT_NEAR(row_sum(7), 3.15798884441675, 1e-12);
  EXPECT_NEAR(row_sum(31), 19.7095665452296, 1e-11);
  EXPECT_NEAR(fb.at(10, 29), 0.872445981830568, 1e-12);
}

TEST(LogMelTest, MatchesReference) {
  const LogMel m = logmel(tone_mix(2048, 16000), LogMelParams::tiny());
  ASSERT_EQ(m.frames.shape(), (Shape{7, 32}));
  EXPECT_NEAR(m.frames.at(0, 0), -11.852085339078, 1e-9);
  EXPECT_NEAR(m.frames.at(0, 9), -9.80335612319807, 1e-9);
  EXPECT_NEAR(m.frames.at(3, 9), -9.85611536623252, 1e-9);
  EXPECT_NEAR(m.frames.at(3, 20), 5.7393260449116, 1e-9);
  EXPECT_NEAR(m.frames.at(6, 31), -23.0159798267972, 1e-9);
}

TEST(LogMelTest, ZeroSignalIsFloor) {
  Waveform w{std::vector<double>(4000, 0.0), 16000};
  const LogMelParams p = LogMelParams::tiny();
  const LogMel m = logmel(w, p);
  for (double v : m.frames.data()) EXPECT_EQ(v, std::log(p.floor_eps));
}

TEST(LogMelTest, SineAtMelCenterPeaksInThatBin) {
  for (const LogMelParams& p : {LogMelParams::tiny(), LogMelParams{}}) {
    const auto edges = mel_edges_hz(p);
    for (int j = 0; j < p.n_mels; ++j) {
      const LogMel m = logmel(sine(edges[j + 1], 4096, p.sample_rate), p);
      for (std::size_t t = 1; t + 1 < m.n_frames(); ++t) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < m.n_mels(); ++k) {
          if (m.frames.at(t, k) > m.frames.at(t, best)) best = k;
        }
        EXPECT_EQ(best, static_cast<std::size_t>(j)) << "frame " << t;
      }
    }
  }
}

TEST(LogMelTest, DoublingAmplitudeAddsAtMostLog4) {
  const LogMelParams p = LogMelParams::tiny();
  const LogMel a = logmel(tone_mix(4096, 16000), p);
  Waveform w2 = tone_mix(4096, 16000);
  for (double& s : w2.samples) s *= 2;
  const LogMel b = logmel(w2, p);
  for (std::size_t i = 0; i < a.frames.size(); ++i) {
    const double d = b.frames[i] - a.frames[i];
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, std::log(4.0) + 1e-12);
    if (a.frames[i] > std::log(p.floor_eps) + 20) {
      EXPECT_NEAR(d, std::log(4.0), 1e-6);
    }
  }
}

TEST(LogMelTest, ShiftByWholeHopsShiftsFrames) {
  const LogMelParams p = LogMelParams::tiny();
  Waveform w = tone_mix(6000, 16000);
  Rng rng(3);
  for (double& s : w.samples) s += 0.1 * rng.normal();
  Waveform shifted = w;
  const std::size_t k = 2;
  shifted.samples.erase(shifted.samples.begin(),
                        shifted.samples.begin() + k * static_cast<std::size_t>(p.hop));
  const LogMel a = logmel(w, p), b = logmel(shifted, p);
  ASSERT_EQ(b.n_frames() + k, a.n_frames());
  for (std::size_t t = 0; t < b.n_frames(); ++t) {
    for (std::size_t j = 0; j < a.n_mels(); ++j) {
      EXPECT_EQ(b.frames.at(t, j), a.frames.at(t + k, j));
    }
  }
}

TEST(LogMelTest, FrameCountAndErrors) {
  const LogMelParams p = LogMelParams::tiny();
  EXPECT_EQ(frame_count(512, p), 1u);
  EXPECT_EQ(frame_count(767, p), 1u);
  EXPECT_EQ(frame_count(768, p), 2u);
  EXPECT_THROW(logmel(Waveform{std::vector<double>(511, 0.0), 16000}, p),
               std::invalid_argument);
  EXPECT_THROW(logmel(Waveform{std::vector<double>(1000, 0.0), 32000}, p),
               std::invalid_argument);
  const LogMel m = logmel(Waveform{std::vector<double>(512, 0.1), 16000}, p);
  for (double v : m.frames.data()) EXPECT_GE(v, std::log(p.floor_eps));
}

TEST(FeatureCache, RoundTripAndParamCheck) {
  const LogMelParams p = LogMelParams::tiny();
  const LogMel m = logmel(tone_mix(3000, 16000), p);
  const fs::path path = temp_path("cache.bin");
  write_feature_cache(path, m);
  const LogMel back = read_feature_cache(path, p);
  EXPECT_EQ(back.frames, m.frames);
  EXPECT_EQ(back.params, p);
  LogMelParams other = p;
  other.hop = 128;
  EXPECT_THROW(read_feature_cache(path, other), std::runtime_error);
  EXPECT_NE(other.digest(), p.digest());

  // Truncate the body.
  const auto size = fs::file_size(path);
  fs::resize_file(path, size - 3);
  EXPECT_THROW(read_feature_cache(path), std::runtime_error);
  fs::remove(path);
}

TEST(Wav, RoundTripWithin16BitQuantization) {
  const Waveform w = sine(440, 1000, 16000, 0.8);
  const fs::path path = temp_path("tone.wav");
  write_wav(path, w);
  const Waveform back = read_wav(path);
  EXPECT_EQ(back.sample_rate, 16000);
  ASSERT_EQ(back.samples.size(), w.samples.size());
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    EXPECT_NEAR(back.samples[i], w.samples[i], 0.5 / 32768 + 1e-15);
  }
  fs::remove(path);
}

TEST(Wav, StereoIsAveraged) {
  const fs::path path = temp_path("stereo.wav");
  {
    std::ofstream out(path, std::ios::binary);
    auto u32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
    auto u16 = [&](std::uint16_t v) { out.write(reinterpret_cast<const char*>(&v), 2); };
    out.write("RIFF", 4);
    u32(36 + 8);
    out.write("WAVEfmt ", 8);
    u32(16);
    u16(1);
    u16(2);
    u32(8000);
    u32(8000 * 4);
    u16(4);
    u16(16);
    out.write("data", 4);
    u32(8);
    for (std::int16_t s : {16384, 0, -16384, -16384}) u16(static_cast<std::uint16_t>(s));
  }
  const Waveform w = read_wav(path);
  EXPECT_EQ(w.sample_rate, 8000);
  ASSERT_EQ(w.samples.size(), 2u);
  EXPECT_DOUBLE_EQ(w.samples[0], 0.25);
  EXPECT_DOUBLE_EQ(w.samples[1], -0.5);
  fs::remove(path);
}

TEST(Wav, RejectsGarbage) {
  const fs::path path = temp_path("bad.wav");
  std::ofstream(path) << "not a wave file at all";
  EXPECT_THROW(read_wav(path), std::runtime_error);
  fs::remove(path);
}

Tensor ramp(std::size_t t, std::size_t f) {
  Tensor x({t, f});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(0.37 * i) * 3.0;
  return x;
}

TEST(SpecAugment, ZeroMasksIsIdentity) {
  LogMel x{ramp(20, 8), LogMelParams::tiny()};
  Rng rng(1);
  SpecAugmentConfig cfg{0, 0, 0, 0};
  EXPECT_EQ(spec_augment(x, cfg, rng).frames, x.frames);
}

TEST(SpecAugment, FullWidthTimeMaskIsMean) {
  const Tensor x = ramp(10, 4);
  double mean = 0;
  for (double v : x.data()) mean += v;
  mean /= static_cast<double>(x.size());
  const Tensor y = apply_masks(x, MaskPlan{{{0, 10}}, {}});
  for (double v : y.data()) EXPECT_EQ(v, mean);
}

TEST(SpecAugment, OnlyStripesChange) {
  const Tensor x = ramp(40, 16);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(seed);
    const MaskPlan plan = draw_masks(40, 16, SpecAugmentConfig{}, rng);
    ASSERT_EQ(plan.time.size(), 2u);
    ASSERT_EQ(plan.freq.size(), 2u);
    const Tensor y = apply_masks(x, plan);
    for (std::size_t t = 0; t < 40; ++t) {
      for (std::size_t f = 0; f < 16; ++f) {
        bool masked = false;
        for (const auto& s : plan.time) masked |= t >= s.start && t < s.start + s.width;
        for (const auto& s : plan.freq) masked |= f >= s.start && f < s.start + s.width;
        if (!masked) EXPECT_EQ(y.at(t, f), x.at(t, f));
      }
    }
    for (const auto& s : plan.time) {
      EXPECT_GE(s.width, 1u);
      EXPECT_LE(s.width, 4u);  // ceil(40 / 10)
    }
    for (const auto& s : plan.freq) EXPECT_LE(s.width, 8u);
  }
}

TEST(SpecAugment, SameSeedSameMasks) {
  Rng a(9), b(9);
  EXPECT_EQ(draw_masks(100, 32, {}, a), draw_masks(100, 32, {}, b));
}

TEST(SpecAugment, WidthBoundEnforced) {
  Rng rng(0);
  EXPECT_THROW(draw_masks(10, 4, SpecAugmentConfig{1, 11, 0, 0}, rng),
               std::invalid_argument);
  EXPECT_THROW(draw_masks(10, 4, SpecAugmentConfig{0, 0, 1, 5}, rng),
               std::invalid_argument);
}

TEST(Mixup, Endpoints) {
  const Tensor x1 = ramp(3, 2), x2 = Tensor({3, 2}, 1.0);
  const Tensor y1 = Tensor::vector({1, 0}), y2 = Tensor::vector({0, 1});
  Mixed m = mixup_with_lambda(x1, y1, x2, y2, 1.0);
  EXPECT_EQ(m.x, x1);
  EXPECT_EQ(m.y, y1);
  m = mixup_with_lambda(x1, y1, x2, y2, 0.5);
  EXPECT_EQ(m.y, Tensor::vector({0.5, 0.5}));
}

TEST(Mixup, ConvexEnvelopeAndSoftTargets) {
  const Tensor x1 = ramp(6, 5);
  Tensor x2 = ramp(6, 5);
  for (std::size_t i = 0; i < x2.size(); ++i) x2[i] = -x2[i] + 0.1 * i;
  const Tensor y1 = Tensor::vector({1, 0, 1}), y2 = Tensor::vector({0, 0, 1});
  Rng rng(4);
  double lambda_sum = 0;
  for (int i = 0; i < 2000; ++i) {
    const Mixed m = mixup_batch(x1, y1, x2, y2, rng, 1.0);
    lambda_sum += m.lambda;
    for (std::size_t k = 0; k < x1.size(); ++k) {
      EXPECT_GE(m.x[k], std::min(x1[k], x2[k]));
      EXPECT_LE(m.x[k], std::max(x1[k], x2[k]));
    }
    for (double v : m.y.data()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  EXPECT_NEAR(lambda_sum / 2000, 0.5, 0.03);
}

TEST(Mixup, ShapeMismatch) {
  Rng rng(0);
  EXPECT_THROW(mixup_batch(ramp(2, 2), Tensor::vector({1}), ramp(2, 3),
                           Tensor::vector({1}), rng),
               std::invalid_argument);
  EXPECT_THROW(mixup_batch(ramp(2, 2), Tensor::vector({1}), ramp(2, 2),
                           Tensor::vector({1, 0}), rng),
               std::invalid_argument);
}

}  // namespace
}  // namespace maac::audio
