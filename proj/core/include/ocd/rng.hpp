#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace ocd {

// splitmix64 finalizer (Steele/Lea/Flood). Used both as the core generator
// step and as the seed-derivation mixer, so every stream is a pure function
// of its 64-bit seed.
constexpr std::uint64_t splitmix64_mix(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Derives an independent substream seed from (seed, stream index). Feeding
// the index through the mixer twice keeps low-entropy indices (0, 1, 2, ...)
// from producing correlated streams.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return splitmix64_mix(seed ^ splitmix64_mix(stream ^ 0x6a09e667f3bcc909ull));
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a,
                                    std::uint64_t b) noexcept {
  return derive_seed(derive_seed(seed, a), b);
}

// Minimal deterministic PRNG: a splitmix64 counter stream. Distributions are
// implemented here rather than via <random> because libstdc++/libc++ do not
// guarantee identical normal_distribution streams, and sweeps must reproduce
// bit-for-bit for a fixed seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next_u64() noexcept { return splitmix64_mix(state_++); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  bool bit() noexcept { return (next_u64() >> 63) != 0; }

  // Standard normal via Box-Muller; generates pairs, caches the spare.
  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace ocd
