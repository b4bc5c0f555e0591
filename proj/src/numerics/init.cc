// maac/numerics/init.cc

#include "maac/numerics/init.h"

#include <cmath>

namespace maac {

Tensor uniform_init(const Shape& shape, double bound, Rng& rng,
                    Precision precision) {
  Tensor t(shape, 0.0);
  for (auto& v : t.storage()) v = rng.uniform(-bound, bound);
  t.set_precision(precision);
  return t;
}

Tensor xavier_uniform(const Shape& shape, std::size_t fan_in,
                      std::size_t fan_out, Rng& rng, Precision precision) {
  const double bound =
      std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return uniform_init(shape, bound, rng, precision);
}

Tensor normal_init(const Shape& shape, double stddev, Rng& rng,
                   Precision precision) {
  Tensor t(shape, 0.0);
  for (auto& v : t.storage()) v = rng.normal(0.0, stddev);
  t.set_precision(precision);
  return t;
}

}  // namespace maac
