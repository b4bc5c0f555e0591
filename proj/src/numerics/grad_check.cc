// maac/numerics/grad_check.cc

#include "maac/numerics/grad_check.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace maac {

GradCheckResult grad_check(const std::function<Var()>& f,
                           std::span<Parameter* const> params,
                           const GradCheckOptions& options) {
  for (auto* p : params) p->zero_grad();
  const Var loss = f();
  if (loss.size() != 1) {
    throw std::invalid_argument("grad_check: f must return a scalar");
  }
  const double base = loss.value()[0];
  if (f().value()[0] != base) {
    throw std::logic_error(
        "grad_check: f is not deterministic (unfrozen dropout or shared rng?)");
  }
  backward(loss);
  const double floor = options.floor_scale * std::max(1.0, std::abs(base));

  GradCheckResult result;
  Rng rng(options.seed);
  for (Parameter* p : params) {
    std::vector<std::size_t> coords(p->value.size());
    std::iota(coords.begin(), coords.end(), 0);
    if (options.coords_per_param && coords.size() > options.coords_per_param) {
      // Partial Fisher-Yates draw.
      for (std::size_t i = 0; i < options.coords_per_param; ++i) {
        std::swap(coords[i], coords[i + rng.below(coords.size() - i)]);
      }
      coords.resize(options.coords_per_param);
    }
    for (std::size_t k : coords) {
      const double saved = p->value[k];
      auto at = [&](double offset) {
        p->value[k] = saved + offset;
        return f().value()[0];
      };
      const double h = options.epsilon;
      const double d1 = at(h) - at(-h);
      const double d2 = at(2 * h) - at(-2 * h);
      p->value[k] = saved;
      const double fd = (8.0 * d1 - d2) / (12.0 * h);
      const double ad = p->grad[k];
      const double rel = std::abs(ad - fd) / std::max(floor, std::abs(ad) + std::abs(fd));
      ++result.coords_checked;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_coord = p->name + "[" + std::to_string(k) + "]";
        result.worst_analytic = ad;
        result.worst_numeric = fd;
      }
    }
  }
  for (auto* p : params) p->zero_grad();
  return result;
}

}  // namespace maac
