#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace mixvae {

/// Seeded random stream.
///
/// Wraps std::mt19937_64, whose output sequence is fixed by the C++ standard,
/// and derives every distribution locally instead of through <random>'s
/// implementation-defined distributions. Integer and branch decisions are
/// therefore identical on every conforming platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  /// Independent stream keyed by (seed, stream...), e.g. (seed, epoch, sample).
  static Rng derive(std::uint64_t seed, std::initializer_list<std::uint64_t> stream);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer on [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n);
  bool bernoulli(double p) { return uniform() < p; }
  /// Standard normal via Box-Muller (one variate per call).
  double normal();
  /// Gamma(shape, 1) via Marsaglia-Tsang.
  double gamma(double shape);
  double beta(double a, double b);

  /// Uniformly random permutation of [0, n).
  std::vector<std::size_t> permutation(std::size_t n);

  template <class RandomIt>
  void shuffle(RandomIt first, RandomIt last) {
    const auto n = static_cast<std::size_t>(last - first);
    for (std::size_t i = n; i > 1; --i) {
      std::size_t j = uniform_index(i);
      using std::swap;
      swap(first[i - 1], first[j]);
    }
  }

  /// Textual engine state, suitable for checkpoints.
  std::string state() const;
  void restore(const std::string& state);

  friend bool operator==(const Rng& a, const Rng& b) {
    return a.seed_ == b.seed_ && a.engine_ == b.engine_;
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer; used for seed derivation.
std::uint64_t mix64(std::uint64_t x);

}  // namespace mixvae
