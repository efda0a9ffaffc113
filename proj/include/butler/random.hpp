#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace butler {

/// SplitMix64 finalizer. Used to derive independent seeds and for
/// counter-based per-element noise.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a,
                                    std::uint64_t b = 0) noexcept {
  return splitmix64(seed ^ splitmix64(a ^ splitmix64(b + 0x632be59bd9b4e019ULL)));
}

/// Maps 64 random bits to [0, 1) using the top 53 bits.
constexpr double bits_to_unit(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Portable random stream. The standard distributions are implementation
/// defined, so uniform and normal draws are computed here to keep outputs
/// identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return bits_to_unit(engine_()); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Standard normal draw that depends only on (seed, index).
inline double counter_normal(std::uint64_t seed, std::uint64_t index) noexcept {
  const std::uint64_t a = splitmix64(seed ^ splitmix64(2 * index + 1));
  const std::uint64_t b = splitmix64(a ^ 0xd1b54a32d192ed03ULL);
  double u1 = bits_to_unit(a);
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  const double u2 = bits_to_unit(b);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace butler
