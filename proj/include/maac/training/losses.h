// maac/training/losses.h

#pragma once

#include <span>
#include <vector>

#include "maac/numerics/graph.h"
#include "maac/numerics/rng.h"

namespace maac::train {

// log_probs: [T x V] rows of log v_t. Mean over the steps whose target is
// not pad_id of -sum_w q(w) log v_t(w), q = (1 - eps) onehot + eps / V.
// Throws std::invalid_argument when every target is pad_id.
Var ce_loss_smoothed(const Var& log_probs, std::span<const int> targets,
                     double eps, int pad_id);

// BOS and PAD are never emitted; these renormalize over the other tokens,
// matching infer::mask_specials.
Var masked_log_prob(const Var& log_probs, int token);
int sample_token(std::span<const double> log_probs, Rng& rng);

// -(r_sample - r_greedy) * seq_logprob.
Var scst_loss(const Var& seq_logprob, double r_sample, double r_greedy);

}  // namespace maac::train
