#pragma once

#include <cstdint>
#include <random>

namespace tlease {

// Seeded PRNG with distribution transforms written out explicitly so traces
// stay identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  // Uniform integer on [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n);
  double exponential(double mean);
  bool bernoulli(double p) { return uniform01() < p; }

  // Independent stream for a sub-component (host, run index, ...).
  Rng fork(std::uint64_t stream) const;

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_material() const;
};

// SplitMix64 finalizer; used to derive well-separated seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b = 0);

}  // namespace tlease
