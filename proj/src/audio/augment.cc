// maac/audio/augment.cc

#include "maac/audio/augment.h"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace maac::audio {
namespace {

std::vector<Stripe> draw_stripes(std::size_t dim, int count, int max_width,
                                 const char* axis, Rng& rng) {
  if (count < 0) throw std::invalid_argument("negative mask count");
  std::vector<Stripe> out;
  if (count == 0) return out;
  if (max_width < 1 || static_cast<std::size_t>(max_width) > dim) {
    throw std::invalid_argument(std::string("spec_augment: ") + axis +
                                " mask width " + std::to_string(max_width) +
                                " exceeds dimension " + std::to_string(dim));
  }
  for (int i = 0; i < count; ++i) {
    Stripe s;
    s.width = 1 + rng.below(static_cast<std::uint64_t>(max_width));
    s.start = rng.below(dim - s.width + 1);
    out.push_back(s);
  }
  return out;
}

void check_pair(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string("mixup: ") + what + " shapes " +
                                shape_string(a.shape()) + " and " +
                                shape_string(b.shape()) + " differ");
  }
}

}  // namespace

MaskPlan draw_masks(std::size_t n_frames, std::size_t n_mels,
                    const SpecAugmentConfig& cfg, Rng& rng) {
  const int max_t = cfg.max_time_width > 0
                        ? cfg.max_time_width
                        : static_cast<int>((n_frames + 9) / 10);
  MaskPlan plan;
  plan.time = draw_stripes(n_frames, cfg.n_time_masks, max_t, "time", rng);
  plan.freq = draw_stripes(n_mels, cfg.n_freq_masks, cfg.max_freq_width,
                           "frequency", rng);
  return plan;
}

Tensor apply_masks(const Tensor& frames, const MaskPlan& plan) {
  if (frames.rank() != 2) throw std::invalid_argument("apply_masks: need [T x F]");
  const std::size_t T = frames.dim(0), F = frames.dim(1);
  for (const auto& s : plan.time) {
    if (s.start + s.width > T) throw std::invalid_argument("time stripe out of range");
  }
  for (const auto& s : plan.freq) {
    if (s.start + s.width > F) throw std::invalid_argument("freq stripe out of range");
  }
  if (plan.time.empty() && plan.freq.empty()) return frames;
  const double mean =
      std::accumulate(frames.data().begin(), frames.data().end(), 0.0) /
      static_cast<double>(frames.size());
  Tensor out = frames;
  for (const auto& s : plan.time) {
    for (std::size_t t = s.start; t < s.start + s.width; ++t) {
      for (std::size_t f = 0; f < F; ++f) out.at(t, f) = mean;
    }
  }
  for (const auto& s : plan.freq) {
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t f = s.start; f < s.start + s.width; ++f) out.at(t, f) = mean;
    }
  }
  return out;
}

LogMel spec_augment(const LogMel& x, const SpecAugmentConfig& cfg, Rng& rng) {
  MaskPlan plan = draw_masks(x.n_frames(), x.n_mels(), cfg, rng);
  return {apply_masks(x.frames, plan), x.params};
}

Mixed mixup_with_lambda(const Tensor& x1, const Tensor& y1, const Tensor& x2,
                        const Tensor& y2, double lambda) {
  check_pair(x1, x2, "input");
  check_pair(y1, y2, "target");
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw std::invalid_argument("mixup: lambda outside [0, 1]");
  }
  Mixed m{x1, y1, lambda};
  if (lambda == 1.0) return m;
  for (std::size_t i = 0; i < x1.size(); ++i) {
    // Clamp so rounding never leaves the [min, max] envelope.
    const double v = lambda * x1[i] + (1.0 - lambda) * x2[i];
    m.x[i] = std::clamp(v, std::min(x1[i], x2[i]), std::max(x1[i], x2[i]));
  }
  for (std::size_t i = 0; i < y1.size(); ++i) {
    const double v = lambda * y1[i] + (1.0 - lambda) * y2[i];
    m.y[i] = std::clamp(v, std::min(y1[i], y2[i]), std::max(y1[i], y2[i]));
  }
  return m;
}

Mixed mixup_batch(const Tensor& x1, const Tensor& y1, const Tensor& x2,
                  const Tensor& y2, Rng& rng, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("mixup: alpha must be > 0");
  check_pair(x1, x2, "input");
  check_pair(y1, y2, "target");
  return mixup_with_lambda(x1, y1, x2, y2, rng.beta(alpha, alpha));
}

}  // namespace maac::audio
