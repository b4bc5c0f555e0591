// maac/training/optim.h

#pragma once

#include <span>
#include <vector>

#include "maac/numerics/graph.h"

namespace maac::train {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam. Non-trainable parameters are skipped.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamConfig cfg = {});

  void step(double lr);
  long steps() const { return t_; }

 private:
  std::vector<Parameter*> params_;
  AdamConfig cfg_;
  std::vector<Tensor> m_, v_;
  long t_ = 0;
};

// Scales all gradients so their global L2 norm is at most max_norm. Returns
// the norm before scaling.
double clip_grad_norm(std::span<Parameter* const> params, double max_norm);

}  // namespace maac::train
