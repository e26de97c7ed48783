#pragma once

// Counter-based, splittable random streams.
//
// A stream is a 64-bit key plus a 64-bit counter. Draw n of a stream is
//
//   mix64(key + (n + 1) * 0x9E3779B97F4A7C15)
//
// where mix64 is the SplitMix64 finalizer. A named child stream has key
//
//   mix64(parent_key ^ fnv1a64(name))
//
// and a root stream for seed s has key mix64(s). Distributions below are
// defined bit-exactly so the same seed reproduces across implementations.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>
#include <utility>

namespace tfal {

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

class RandomStream {
 public:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

  explicit constexpr RandomStream(std::uint64_t seed) : key_(mix64(seed)) {}

  constexpr RandomStream split(std::string_view name) const {
    RandomStream child(0);
    child.key_ = mix64(key_ ^ fnv1a64(name));
    return child;
  }

  constexpr std::uint64_t next() { return mix64(key_ + (++counter_) * kGolden); }

  /// Uniform in [lo, hi] by rejection on the top of the 64-bit range.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi <= lo) return lo;
    const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
    if (range == 0) return static_cast<std::int64_t>(next());
    const std::uint64_t limit = -range % range;  // 2^64 mod range
    std::uint64_t x;
    do {
      x = next();
    } while (x < limit);
    return lo + static_cast<std::int64_t>(x % range);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  bool coin() { return (next() >> 63) != 0; }

  /// Standard normal via Box-Muller (cosine branch only).
  double normal() {
    const double u1 = 1.0 - uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace tfal
