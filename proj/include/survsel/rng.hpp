#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string_view>
#include <utility>
#include <vector>

namespace survsel {

/// Deterministic 64-bit generator (SplitMix64). All randomness in the library
/// flows through this type so that results are reproducible across platforms;
/// std::mt19937 distributions are not bit-portable, this is.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Unbiased uniform integer in [0, n). n must be > 0.
  std::size_t uniform_below(std::size_t n) {
    const std::uint64_t un = static_cast<std::uint64_t>(n);
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    // reject draws above the largest multiple of n representable in 2^64
    const std::uint64_t residue = (max % un + 1) % un;
    const std::uint64_t accept_max = max - residue;
    std::uint64_t x = next_u64();
    while (x > accept_max) x = next_u64();
    return static_cast<std::size_t>(x % un);
  }

  bool bernoulli(double p) { return uniform01() < p; }

  /// Standard normal via Box-Muller. Consumes exactly two draws per call.
  double normal() {
    const double u1 = 1.0 - uniform01();  // (0, 1]
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  /// In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = uniform_below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  /// A shuffled index vector [0, n).
  std::vector<std::size_t> permutation(std::size_t n) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    shuffle(idx);
    return idx;
  }

 private:
  std::uint64_t state_;
};

/// Pure function from (master seed, purpose tag, indices) to a sub-seed.
/// Every experiment stage draws from a seed derived this way; nothing uses a
/// global generator.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ master;
  for (char c : purpose) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  auto mix = [](std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  };
  h = mix(h + 0x9E3779B97F4A7C15ULL * (a + 1));
  h = mix(h + 0x9E3779B97F4A7C15ULL * (b + 1));
  return h;
}

}  // namespace survsel
