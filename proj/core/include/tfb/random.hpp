#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace tfb {

/// Seeded generator whose output is identical on every platform:
/// std::mt19937_64 is fully specified by the standard, and all
/// transforms below are written out by hand instead of relying on the
/// implementation-defined std:: distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  /// Uniform on (0, 1).
  double uniform_open();
  /// Unbiased integer in [0, n).
  std::uint64_t index(std::uint64_t n);
  /// Standard normal via the Box-Muller transform (pairs are cached).
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

/// Mixes a base seed with a stream id so that derived streams do not overlap.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace tfb
