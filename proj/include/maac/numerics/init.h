// maac/numerics/init.h

#pragma once

#include <string_view>

#include "maac/numerics/rng.h"
#include "maac/numerics/tensor.h"

namespace maac {

// Per-parameter stream: draws depend only on (seed, name), so adding or
// removing unrelated parameter groups leaves the others unchanged.
inline Rng parameter_rng(std::uint64_t seed, std::string_view name) {
  return Rng(seed).derive(name);
}

Tensor uniform_init(const Shape& shape, double bound, Rng& rng,
                    Precision precision = Precision::kDouble);
// Glorot/Xavier uniform: bound = sqrt(6 / (fan_in + fan_out)).
Tensor xavier_uniform(const Shape& shape, std::size_t fan_in,
                      std::size_t fan_out, Rng& rng,
                      Precision precision = Precision::kDouble);
Tensor normal_init(const Shape& shape, double stddev, Rng& rng,
                   Precision precision = Precision::kDouble);

}  // namespace maac
