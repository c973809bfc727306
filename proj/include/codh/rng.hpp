#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

#include "codh/tensor.hpp"

namespace codh {

/// Counter-based generator: the i-th draw of a stream is a pure function of
/// (key, i), so any tensor can be filled in any order with identical results.
/// Streams are keyed by a root seed and a name (e.g. "head/fc1/weight").
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  static CounterRng stream(std::uint64_t seed, std::string_view name) {
    return CounterRng(mix(seed ^ mix(fnv1a(name))));
  }

  std::uint64_t key() const { return key_; }

  std::uint64_t bits(std::uint64_t counter) const {
    return mix(key_ + (counter + 1) * 0x9E3779B97F4A7C15ULL);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform(std::uint64_t counter) const {
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller on counters (2i, 2i+1).
  double normal(std::uint64_t index) const {
    const double u1 = 1.0 - uniform(2 * index);  // (0, 1]
    const double u2 = uniform(2 * index + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  static std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001B3ULL;
    }
    return h;
  }

 private:
  std::uint64_t key_;
};

inline Tensord normal_tensor(Shape shape, const CounterRng& rng, double scale = 1.0) {
  Tensord t(std::move(shape));
  for (Index i = 0; i < t.size(); ++i) t[i] = scale * rng.normal(static_cast<std::uint64_t>(i));
  return t;
}

/// Uniform in [-bound, bound).
inline Tensord uniform_tensor(Shape shape, const CounterRng& rng, double bound) {
  Tensord t(std::move(shape));
  for (Index i = 0; i < t.size(); ++i) {
    t[i] = bound * (2.0 * rng.uniform(static_cast<std::uint64_t>(i)) - 1.0);
  }
  return t;
}

}  // namespace codh
