// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace dmha {

namespace detail {

// splitmix64 finalizer; the whole generator is built on it.
inline uint64_t mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xCBF29CE484222325ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ull;
  }
  return h;
}

}  // namespace detail

/// Counter-based random stream. A stream is identified by a 64-bit key;
/// the i-th draw is a pure function of (key, i), so streams can be derived
/// by name and replayed independently of each other.
class RngStream {
 public:
  explicit RngStream(uint64_t seed) : key_(detail::mix64(seed ^ 0x7445B1D04F8D5C6Bull)) {}

  /// Child stream with an independent key and a fresh counter.
  RngStream derive(std::string_view name) const {
    return RngStream(key_ ^ detail::fnv1a64(name), own{});
  }
  RngStream derive(uint64_t n) const {
    return RngStream(key_ ^ detail::mix64(n + 0x9E3779B97F4A7C15ull), own{});
  }

  uint64_t next_u64() {
    ++counter_;
    return detail::mix64(key_ + counter_ * 0x9E3779B97F4A7C15ull);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  int uniform_int(int n) {
    const uint64_t un = static_cast<uint64_t>(n);
    const uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    uint64_t z = next_u64();
    while (z >= limit) z = next_u64();
    return static_cast<int>(z % un);
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via Box-Muller; two draws consumed per value.
  double normal() {
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

 private:
  struct own {};
  RngStream(uint64_t key, own) : key_(key) {}

  uint64_t key_;
  uint64_t counter_ = 0;
};

}  // namespace dmha
