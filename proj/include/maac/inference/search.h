// maac/inference/search.h
//
// Greedy and beam search over any step model. A step model exposes
//
//   State initial();
//   Expansion<State> expand(const State&);   // next-token log-probs
//
// where Expansion::child(token) builds the successor state. BOS and PAD are
// never emitted: their log-probabilities are dropped and the remaining ones
// renormalized before scoring.

#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "maac/data/vocab.h"

namespace maac::infer {

template <typename State>
struct Expansion {
  std::vector<double> log_probs;
  std::function<State(int)> child;
};

template <typename M>
concept StepModel = requires(M& m, const typename M::State& s) {
  { m.initial() } -> std::convertible_to<typename M::State>;
  { m.expand(s) } -> std::convertible_to<Expansion<typename M::State>>;
};

// Drops BOS and PAD and renormalizes over the remaining tokens.
std::vector<double> mask_specials(const std::vector<double>& log_probs);

template <typename State>
struct Hypothesis {
  std::vector<int> tokens;  // emitted tokens, EOS included when finished
  double logprob = 0.0;
  bool finished = false;
  State state;
};

struct SearchOptions {
  std::size_t beam = 4;
  std::size_t max_len = 30;  // decode steps
  // Final ranking uses logprob / len^gamma; 0 disables normalization.
  double length_gamma = 0.0;
};

double ranking_score(double logprob, std::size_t length, double gamma);

// Strict "better than" for hypotheses: higher score, then lexicographically
// smaller token ids.
bool ranks_before(double score_a, const std::vector<int>& a, double score_b,
                  const std::vector<int>& b);

// Sequences truncated at max_len count as finished. Returns every finished
// hypothesis, best first.
template <StepModel M>
std::vector<Hypothesis<typename M::State>> beam_search(M& model,
                                                       const SearchOptions& opt) {
  using State = typename M::State;
  using Hyp = Hypothesis<State>;
  if (opt.beam == 0) throw std::invalid_argument("beam_search: beam must be >= 1");
  if (opt.max_len == 0) throw std::invalid_argument("beam_search: max_len must be >= 1");

  struct Candidate {
    std::size_t parent;
    int token;
    double logprob;
    std::vector<int> tokens;
  };
  std::vector<Hyp> alive{Hyp{{}, 0.0, false, model.initial()}};
  std::vector<Hyp> finished;
  for (std::size_t step = 0; step < opt.max_len && !alive.empty(); ++step) {
    std::vector<Expansion<State>> expansions;
    std::vector<Candidate> cands;
    for (std::size_t i = 0; i < alive.size(); ++i) {
      expansions.push_back(model.expand(alive[i].state));
      const std::vector<double> lp = mask_specials(expansions.back().log_probs);
      for (std::size_t tok = 0; tok < lp.size(); ++tok) {
        if (lp[tok] == -std::numeric_limits<double>::infinity()) continue;
        Candidate c{i, static_cast<int>(tok), alive[i].logprob + lp[tok], alive[i].tokens};
        c.tokens.push_back(static_cast<int>(tok));
        cands.push_back(std::move(c));
      }
    }
    const std::size_t keep = std::min(opt.beam, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep),
                      cands.end(), [](const Candidate& a, const Candidate& b) {
                        return ranks_before(a.logprob, a.tokens, b.logprob, b.tokens);
                      });
    std::vector<Hyp> next;
    for (std::size_t k = 0; k < keep; ++k) {
      Candidate& c = cands[k];
      Hyp h{std::move(c.tokens), c.logprob, c.token == data::kEos,
            expansions[c.parent].child(c.token)};
      if (h.finished || step + 1 == opt.max_len) {
        finished.push_back(std::move(h));
      } else {
        next.push_back(std::move(h));
      }
    }
    alive = std::move(next);
  }
  std::stable_sort(finished.begin(), finished.end(), [&](const Hyp& a, const Hyp& b) {
    return ranks_before(ranking_score(a.logprob, a.tokens.size(), opt.length_gamma),
                        a.tokens,
                        ranking_score(b.logprob, b.tokens.size(), opt.length_gamma),
                        b.tokens);
  });
  return finished;
}

// Argmax at every step, lowest id on ties.
template <StepModel M>
Hypothesis<typename M::State> greedy_decode(M& model, std::size_t max_len) {
  if (max_len == 0) throw std::invalid_argument("greedy_decode: max_len must be >= 1");
  Hypothesis<typename M::State> h{{}, 0.0, false, model.initial()};
  for (std::size_t step = 0; step < max_len; ++step) {
    auto ex = model.expand(h.state);
    const std::vector<double> lp = mask_specials(ex.log_probs);
    const auto best = static_cast<int>(std::max_element(lp.begin(), lp.end()) - lp.begin());
    h.tokens.push_back(best);
    h.logprob += lp[static_cast<std::size_t>(best)];
    h.state = ex.child(best);
    if (best == data::kEos) {
      h.finished = true;
      break;
    }
  }
  return h;
}

// Teacher-forced log-probability of a token sequence under the same
// masking.
template <StepModel M>
double score_sequence(M& model, const std::vector<int>& tokens) {
  auto state = model.initial();
  double total = 0.0;
  for (int tok : tokens) {
    auto ex = model.expand(state);
    total += mask_specials(ex.log_probs).at(static_cast<std::size_t>(tok));
    state = ex.child(tok);
  }
  return total;
}

// Tokens without the trailing EOS.
std::vector<int> strip_eos(const std::vector<int>& tokens);

}  // namespace maac::infer
