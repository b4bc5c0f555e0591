// maac/audio/augment.h
//
// SpecAugment time/frequency masking (no time warping) and mixup.

#pragma once

#include <cstddef>
#include <vector>

#include "maac/audio/features.h"
#include "maac/numerics/rng.h"
#include "maac/numerics/tensor.h"

namespace maac::audio {

struct SpecAugmentConfig {
  int n_time_masks = 2;
  int max_time_width = 0;  // 0 means ceil(T / 10)
  int n_freq_masks = 2;
  int max_freq_width = 8;
};

struct Stripe {
  std::size_t start = 0;
  std::size_t width = 0;

  bool operator==(const Stripe&) const = default;
};

struct MaskPlan {
  std::vector<Stripe> time;
  std::vector<Stripe> freq;

  bool operator==(const MaskPlan&) const = default;
};

// Widths are uniform in [1, max], starts uniform over valid positions.
// Throws std::invalid_argument when a max width exceeds its dimension.
MaskPlan draw_masks(std::size_t n_frames, std::size_t n_mels,
                    const SpecAugmentConfig& cfg, Rng& rng);

// Masked stripes take the mean of the unmasked input over the whole
// utterance; all other entries are copied untouched.
Tensor apply_masks(const Tensor& frames, const MaskPlan& plan);

LogMel spec_augment(const LogMel& x, const SpecAugmentConfig& cfg, Rng& rng);

struct Mixed {
  Tensor x;
  Tensor y;
  double lambda = 1.0;
};

// x = lambda x1 + (1 - lambda) x2, likewise y. Shapes must match pairwise.
Mixed mixup_with_lambda(const Tensor& x1, const Tensor& y1, const Tensor& x2,
                        const Tensor& y2, double lambda);
// lambda ~ Beta(alpha, alpha).
Mixed mixup_batch(const Tensor& x1, const Tensor& y1, const Tensor& x2,
                  const Tensor& y2, Rng& rng, double alpha = 1.0);

}  // namespace maac::audio
