#include <gtest/gtest.h>

#include <cmath>

#include "maac/inference/search.h"
#include "maac/numerics/rng.h"

namespace maac::infer {
namespace {

// Next-token distribution is a fixed random function of the prefix.
struct ToyModel {
  using State = std::vector<int>;
  std::uint64_t seed;
  std::size_t vocab = 6;
  double sharpness = 2.0;
  mutable int expansions = 0;

  State initial() { return {}; }
  Expansion<State> expand(const State& prefix) {
    ++expansions;
    std::uint64_t h = seed;
    for (int t : prefix) h = mix64(h ^ static_cast<std::uint64_t>(t + 1));
    Rng rng(h);
    std::vector<double> logits(vocab);
    for (double& l : logits) l = sharpness * rng.normal();
    double mx = *std::max_element(logits.begin(), logits.end()), z = 0;
    for (double l : logits) z += std::exp(l - mx);
    std::vector<double> lp;
    for (double l : logits) lp.push_back(l - mx - std::log(z));
    return {lp, [prefix](int tok) {
              State s = prefix;
              s.push_back(tok);
              return s;
            }};
  }
};

// Every sequence that ends in EOS or reaches max_len, with its score.
void enumerate(ToyModel& m, std::vector<int>& prefix, double lp, std::size_t max_len,
               std::vector<std::pair<double, std::vector<int>>>& out) {
  const std::vector<double> dist = mask_specials(m.expand(prefix).log_probs);
  for (int tok = 0; tok < static_cast<int>(dist.size()); ++tok) {
    if (tok == data::kBos || tok == data::kPad) continue;
    prefix.push_back(tok);
    const double s = lp + dist[static_cast<std::size_t>(tok)];
    if (tok == data::kEos || prefix.size() == max_len) {
      out.emplace_back(s, prefix);
    } else {
      enumerate(m, prefix, s, max_len, out);
    }
    prefix.pop_back();
  }
}

TEST(Search, ExhaustiveBeamMatchesBruteForce) {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    ToyModel m{seed};
    std::vector<std::pair<double, std::vector<int>>> all;
    std::vector<int> prefix;
    enumerate(m, prefix, 0.0, 4, all);
    auto best = all.front();
    for (const auto& c : all) {
      if (ranks_before(c.first, c.second, best.first, best.second)) best = c;
    }
    const auto hyps = beam_search(m, SearchOptions{1296, 4, 0.0});
    ASSERT_FALSE(hyps.empty());
    EXPECT_EQ(hyps.front().tokens, best.second) << "seed " << seed;
    EXPECT_NEAR(hyps.front().logprob, best.first, 1e-12);
    EXPECT_EQ(hyps.size(), all.size());
  }
}

TEST(Search, BeamOneIsGreedy) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    ToyModel m{seed, 9, 1.0};
    const auto g = greedy_decode(m, 12);
    const auto b = beam_search(m, SearchOptions{1, 12, 0.0});
    ASSERT_EQ(b.size(), 1u);
    EXPECT_EQ(b.front().tokens, g.tokens);
    EXPECT_EQ(b.front().logprob, g.logprob);
  }
}

TEST(Search, ScoresAreConsistentWithRescoring) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ToyModel m{seed, 8};
    for (const auto& h : beam_search(m, SearchOptions{4, 6, 0.0})) {
      EXPECT_NEAR(score_sequence(m, h.tokens), h.logprob, 1e-10);
      EXPECT_LE(h.logprob, 0.0);
      for (std::size_t i = 0; i < h.tokens.size(); ++i) {
        EXPECT_NE(h.tokens[i], data::kBos);
        EXPECT_NE(h.tokens[i], data::kPad);
        if (h.tokens[i] == data::kEos) EXPECT_EQ(i + 1, h.tokens.size());
      }
    }
  }
}

// Beam search is not monotone in the beam width for every possible model,
// so this is checked empirically on a fixed family of random toy models.
TEST(Search, WiderBeamNeverLowersBestScore) {
  int decreases = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    ToyModel m{seed, 6, 1.5};
    double prev = -std::numeric_limits<double>::infinity();
    for (std::size_t beam = 1; beam <= 8; ++beam) {
      const double best = beam_search(m, SearchOptions{beam, 4, 0.0}).front().logprob;
      if (best < prev - 1e-12) ++decreases;
      prev = std::max(prev, best);
    }
    const double exhaustive = beam_search(m, SearchOptions{1296, 4, 0.0}).front().logprob;
    EXPECT_GE(exhaustive, prev - 1e-12);
  }
  EXPECT_EQ(decreases, 0);
}

struct Rigged {
  using State = std::size_t;
  std::vector<int> script;
  State initial() { return 0; }
  Expansion<State> expand(const State& t) {
    std::vector<double> lp(8, std::log(0.02));
    const int want = t < script.size() ? script[t] : data::kEos;
    lp[static_cast<std::size_t>(want)] = std::log(1 - 0.02 * 7);
    return {lp, [t](int) { return t + 1; }};
  }
};

TEST(Search, RiggedModelEmitsScript) {
  Rigged m{{5, 4, data::kEos}};
  EXPECT_EQ(strip_eos(greedy_decode(m, 10).tokens), (std::vector<int>{5, 4}));
  EXPECT_EQ(beam_search(m, SearchOptions{3, 10, 0.0}).front().tokens,
            (std::vector<int>{5, 4, data::kEos}));
  // A script that asks for PAD gets the best remaining token instead.
  Rigged pad{{data::kPad}};
  EXPECT_NE(greedy_decode(pad, 1).tokens.front(), data::kPad);
  Rigged eos{{data::kEos}};
  EXPECT_TRUE(strip_eos(greedy_decode(eos, 10).tokens).empty());
}

TEST(Search, LengthNormalizationIsOptIn) {
  EXPECT_EQ(ranking_score(-4.0, 4, 0.0), -4.0);
  EXPECT_EQ(ranking_score(-4.0, 4, 1.0), -1.0);
  ToyModel m{3};
  EXPECT_THROW(beam_search(m, SearchOptions{0, 4, 0.0}), std::invalid_argument);
}

}  // namespace
}  // namespace maac::infer
