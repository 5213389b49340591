#pragma once

#include <cmath>
#include <cstdint>

namespace sadrift {

// Counter-based randomness: every draw is a pure function of
// (seed, stream, counter), so ensemble members can run in any order, on any
// number of threads, and still produce bit-identical results.

inline std::uint64_t mix64(std::uint64_t z) noexcept {
  // splitmix64 finalizer
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t counter_u64(std::uint64_t seed, std::uint64_t stream,
                                 std::uint64_t counter) noexcept {
  std::uint64_t h = mix64(seed ^ (0x8bb84b93962eacc9ull * (stream + 1)));
  return mix64(mix64(h ^ counter));
}

// Uniform in [0, 1) with 53 random bits.
inline double counter_uniform(std::uint64_t seed, std::uint64_t stream,
                              std::uint64_t counter) noexcept {
  return static_cast<double>(counter_u64(seed, stream, counter) >> 11) *
         0x1.0p-53;
}

// Sequential view over one (seed, stream) pair, for generator-style code
// where the draw order is fixed (random MDPs, test probes).
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream) {}

  std::uint64_t next_u64() { return counter_u64(seed_, stream_, counter_++); }

  double uniform() { return counter_uniform(seed_, stream_, counter_++); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double exponential() { return -std::log1p(-uniform()); }

  // Box-Muller; two uniforms per draw, no cached spare.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925286766559 * u2);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
};

}  // namespace sadrift
