#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace dribble {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Folds a sequence of integers into one well-mixed 64-bit key.
template <typename... Parts>
constexpr std::uint64_t derive_key(std::uint64_t seed, Parts... parts) {
  std::uint64_t k = splitmix64(seed);
  ((k = splitmix64(k ^ splitmix64(static_cast<std::uint64_t>(parts) + 0x632BE59BD9B4E019ull))), ...);
  return k;
}

/// Stream-kind tags mixed into derived keys so independent consumers never alias.
enum class StreamKind : std::uint64_t {
  kEpisode = 1,
  kActionSampling = 2,
  kShuffle = 3,
  kInit = 4,
  kEval = 5,
  kServe = 6,
};

/// Counter-based random stream: output i is a pure function of (key, i).
/// Satisfies UniformRandomBitGenerator, and its full state is two integers,
/// so a stream can be checkpointed and resumed exactly.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng() = default;
  explicit CounterRng(std::uint64_t key, std::uint64_t counter = 0) : key_(key), counter_(counter) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return splitmix64(key_ ^ splitmix64(counter_++)); }

  /// Uniform double in [0, 1).
  double uniform01() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Standard normal via a fresh distribution object, so no cached state leaks across calls.
  double normal(double mean = 0.0, double sigma = 1.0) {
    if (sigma == 0.0) return mean;
    std::normal_distribution<double> d(mean, sigma);
    return d(*this);
  }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace dribble
