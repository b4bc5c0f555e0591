// maac/numerics/grad_check.h

#pragma once

#include <functional>
#include <span>
#include <string>

#include "maac/numerics/graph.h"

namespace maac {

struct GradCheckOptions {
  double epsilon = 1e-5;
  // Denominator floor is floor_scale * max(1, |loss|). Rounding noise in the
  // difference quotient grows with |loss|, and coordinates whose true
  // gradient is zero would otherwise score a relative error near 1.
  double floor_scale = 1e-6;
  // Coordinates sampled per parameter; 0 checks every coordinate.
  std::size_t coords_per_param = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  std::string worst_coord;  // "name[index]"
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Compares reverse-mode gradients of the scalar loss f() against the
// five-point central difference
//   (8 (f(t+e) - f(t-e)) - (f(t+2e) - f(t-2e))) / 12e.
// The relative error of a coordinate is
// |g_ad - g_fd| / max(floor, |g_ad| + |g_fd|). f must rebuild its graph on
// every call and be deterministic; a repeated evaluation that differs raises
// std::logic_error. Parameter gradients are zeroed before and after.
GradCheckResult grad_check(const std::function<Var()>& f,
                           std::span<Parameter* const> params,
                           const GradCheckOptions& options = {});

}  // namespace maac
