#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>

namespace mmce {

/// SplitMix64 finalizer. Used both to condition raw seeds and as the mixing
/// step of seed_combine below.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Stable seed derivation: child = splitmix64(splitmix64(seed) ^ splitmix64(salt + 1)).
/// This is the documented contract for substream/trial seeds; any tool that
/// wants to reproduce a run's random inputs bit-identically can re-derive them
/// from the master seed with this function.
constexpr std::uint64_t seed_combine(std::uint64_t seed, std::uint64_t salt) noexcept
{
  return splitmix64(splitmix64(seed) ^ splitmix64(salt + 1));
}

/// Splittable deterministic random stream.
///
/// The engine is std::mt19937_64 (bit-exact across platforms); the uniform and
/// normal mappings are implemented here rather than via std::*_distribution so
/// that draws are reproducible independent of the standard library in use.
/// split(i) derives an independent substream from (seed, i) without consuming
/// any state of the parent.
class RngStream {
public:
  explicit RngStream(std::uint64_t seed) : seed_(seed), gen_(splitmix64(seed)) {}

  std::uint64_t seed() const noexcept { return seed_; }

  RngStream split(std::uint64_t index) const { return RngStream(seed_combine(seed_, index)); }

  std::uint64_t raw() { return gen_(); }

  /// Uniform on [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; draws are generated in pairs.
  double normal()
  {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double const u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    double const u2 = uniform();
    double const r = std::sqrt(-2.0 * std::log(u1));
    double const t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    have_spare_ = true;
    return r * std::cos(t);
  }

  /// Circularly symmetric complex normal CN(0, 1): unit total variance.
  std::complex<double> cnormal()
  {
    double const re = normal();
    double const im = normal();
    return {re * std::numbers::sqrt2 / 2.0, im * std::numbers::sqrt2 / 2.0};
  }

private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace mmce
