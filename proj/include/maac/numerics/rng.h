// maac/numerics/rng.h
//
// Deterministic random source. The engine is std::mt19937_64, whose output
// sequence is fixed by the C++ standard; every distribution below is
// implemented here rather than taken from <random>, because the standard
// distributions are implementation-defined and differ across toolchains.

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace maac {

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  // Standard normal via Box-Muller (one value per call, no caching).
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  // Marsaglia-Tsang gamma(shape, 1).
  double gamma(double shape);
  double beta(double a, double b);
  bool bernoulli(double p) { return uniform() < p; }
  // Index drawn proportionally to non-negative weights.
  std::size_t categorical(std::span<const double> weights);

  // Independent stream derived from this generator's seed and a label.
  Rng derive(std::string_view label) const;
  Rng derive(std::uint64_t index) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes,
                    std::uint64_t basis = 0xcbf29ce484222325ULL);
// splitmix64 finalizer used to decorrelate derived seeds.
std::uint64_t mix64(std::uint64_t x);

}  // namespace maac
