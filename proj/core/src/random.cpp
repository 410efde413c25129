#include "tlease/random.hpp"

#include <cmath>

namespace tlease {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t Rng::below(std::uint64_t n) {
  // Rejection sampling keeps the result unbiased.
  const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double Rng::exponential(double mean) {
  if (mean <= 0.0) return 0.0;
  return -std::log1p(-uniform01()) * mean;
}

std::uint64_t Rng::seed_material() const {
  std::mt19937_64 copy = engine_;
  return copy();
}

Rng Rng::fork(std::uint64_t stream) const { return Rng(mix_seed(seed_material(), stream)); }

}  // namespace tlease
