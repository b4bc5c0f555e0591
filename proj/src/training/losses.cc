// maac/training/losses.cc

#include "maac/training/losses.h"

#include <cmath>
#include <stdexcept>

#include "maac/data/vocab.h"
#include "maac/inference/search.h"
#include "maac/numerics/ops.h"

namespace maac::train {

Var ce_loss_smoothed(const Var& log_probs, std::span<const int> targets, double eps,
                     int pad_id) {
  if (log_probs.value().rank() != 2 || log_probs.shape()[0] != targets.size()) {
    throw std::invalid_argument("ce_loss_smoothed: expected [T x V] rows for " +
                                std::to_string(targets.size()) + " targets, got " +
                                shape_string(log_probs.shape()));
  }
  if (eps < 0 || eps >= 1) throw std::invalid_argument("ce_loss_smoothed: eps outside [0, 1)");
  const std::size_t T = targets.size(), V = log_probs.shape()[1];
  Tensor q({T, V}, 0.0);
  std::size_t counted = 0;
  for (std::size_t t = 0; t < T; ++t) {
    const int y = targets[t];
    if (y == pad_id) continue;
    if (y < 0 || static_cast<std::size_t>(y) >= V) {
      throw std::out_of_range("ce_loss_smoothed: target " + std::to_string(y));
    }
    ++counted;
    if (eps > 0) {
      for (std::size_t w = 0; w < V; ++w) q.at(t, w) = eps / static_cast<double>(V);
    }
    q.at(t, static_cast<std::size_t>(y)) += 1.0 - eps;
  }
  if (counted == 0) throw std::invalid_argument("ce_loss_smoothed: every target is PAD");
  return ops::scale(ops::sum(ops::mul_const(log_probs, q)),
                    -1.0 / static_cast<double>(counted));
}

Var masked_log_prob(const Var& log_probs, int token) {
  if (token == data::kBos || token == data::kPad) {
    throw std::invalid_argument("masked_log_prob: BOS/PAD have no probability");
  }
  const std::size_t V = log_probs.size();
  Tensor mask({V}, 1.0);
  mask[data::kBos] = 0.0;
  mask[data::kPad] = 0.0;
  const Var norm = ops::log(ops::sum(ops::mul_const(ops::exp(log_probs), mask)));
  const Var column = ops::reshape(log_probs, {V, 1});
  return ops::sub(ops::select(column, static_cast<std::size_t>(token)), norm);
}

int sample_token(std::span<const double> log_probs, Rng& rng) {
  const std::vector<double> lp =
      infer::mask_specials(std::vector<double>(log_probs.begin(), log_probs.end()));
  std::vector<double> p(lp.size());
  for (std::size_t i = 0; i < lp.size(); ++i) p[i] = std::exp(lp[i]);
  return static_cast<int>(rng.categorical(p));
}

Var scst_loss(const Var& seq_logprob, double r_sample, double r_greedy) {
  return ops::scale(seq_logprob, -(r_sample - r_greedy));
}

}  // namespace maac::train
