#pragma once

#include <cstdint>

#include "heatsdf/core.hpp"

namespace heatsdf {

// Counter-based generator built on the SplitMix64 output function:
//
//   value(seed, stream, i) = mix(key(seed, stream) + (i+1) * 0x9E3779B97F4A7C15)
//
// where mix is the SplitMix64 finalizer and key hashes (seed, stream).
// Every draw is a pure function of (seed, stream, counter), so batches are
// reproducible across platforms and parallel workers derive independent
// streams without shared state.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(derive_key(seed, stream)) {}

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  static std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream) {
    return mix(mix(seed) ^ (stream * 0x9E3779B97F4A7C15ull + 0xD1B54A32D192ED03ull));
  }

  std::uint64_t next_u64() {
    counter_ += 0x9E3779B97F4A7C15ull;
    return mix(key_ + counter_);
  }

  // Uniform in [0,1), 53-bit resolution.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in (0,1); never returns an exact endpoint.
  double next_open() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Uniform index in [0, n).
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

  // Point strictly inside the computational domain.
  Vec3 next_in_domain() {
    return {uniform_open(-domain_half, domain_half), uniform_open(-domain_half, domain_half),
            uniform_open(-domain_half, domain_half)};
  }

  double uniform_open(double lo, double hi) { return lo + (hi - lo) * next_open(); }

  // Standard normal via Box-Muller; consumes two draws per value.
  double normal() {
    const double u1 = next_open();
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace heatsdf
