#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace mcgp {

/// Counter-based random stream.
///
/// A stream is a 64-bit key plus a counter; the n-th output is a SplitMix64
/// finalisation of (key + n * golden-gamma). Child streams are obtained with
/// derive(), which hashes the parent key with a tag. Draws on a child stream
/// therefore depend only on (root seed, tag path), never on how many values
/// sibling streams have consumed. Satisfies UniformRandomBitGenerator so it
/// can drive the <random> distributions.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  explicit RandomStream(std::uint64_t seed = 0) noexcept : key_(mix(seed ^ kSeedSalt)) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  result_type operator()() noexcept {
    ++counter_;
    return mix(key_ + counter_ * kGamma);
  }

  [[nodiscard]] RandomStream derive(std::uint64_t tag) const noexcept {
    RandomStream child;
    child.key_ = mix(key_ ^ mix(tag + kGamma));
    return child;
  }

  [[nodiscard]] RandomStream derive(std::uint64_t a, std::uint64_t b) const noexcept {
    return derive(a).derive(b);
  }

  [[nodiscard]] RandomStream derive(std::string_view name) const noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
    for (char c : name) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001B3ULL;
    }
    return derive(h);
  }

  /// Uniform on the open interval (0, 1).
  double uniform() noexcept {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Standard normal (Box-Muller; one variate per call so the output does not
  /// depend on hidden caching).
  double normal() noexcept {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double sd) noexcept { return mean + sd * normal(); }

  [[nodiscard]] std::uint64_t key() const noexcept { return key_; }
  [[nodiscard]] std::uint64_t counter() const noexcept { return counter_; }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
  static constexpr std::uint64_t kSeedSalt = 0xD1B54A32D192ED03ULL;

  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

/// log of a Gamma(shape, 1) variate; stays finite for very small shapes where
/// the variate itself underflows.
double log_gamma_variate(double shape, RandomStream& rng);

/// Gamma(shape, rate) variate.
double gamma_variate(double shape, double rate, RandomStream& rng);

}  // namespace mcgp
