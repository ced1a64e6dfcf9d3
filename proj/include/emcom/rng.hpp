#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace emcom {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a parent seed and a stream tag.
/// Streams are keyed by name, so adding a new consumer never shifts the
/// values seen by existing ones.
inline std::uint64_t derive_seed(std::uint64_t parent, std::string_view tag,
                                 std::uint64_t counter = 0) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a over the tag
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return splitmix64(splitmix64(parent ^ h) + counter);
}

/// Seeded engine with portable helpers. Every draw goes through the raw
/// 64-bit output so results do not depend on the standard library's
/// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in the open interval (0, 1).
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    const std::uint64_t bound = n;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t r = 0;
    do {
      r = engine_();
    } while (r >= limit);
    return static_cast<std::size_t>(r % bound);
  }

  template <class T>
  void shuffle(T& v) {
    for (std::size_t i = std::size(v); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

  /// Draws from a discrete distribution given by non-negative weights.
  template <class Range>
  std::size_t categorical(const Range& probs) {
    double total = 0.0;
    for (double p : probs) total += p;
    double u = uniform() * total;
    std::size_t last = 0;
    std::size_t i = 0;
    for (double p : probs) {
      if (p > 0.0) {
        last = i;
        if (u < p) return i;
      }
      u -= p;
      ++i;
    }
    return last;
  }

  Rng split(std::string_view tag, std::uint64_t counter = 0) {
    return Rng(derive_seed(engine_(), tag, counter));
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace emcom
