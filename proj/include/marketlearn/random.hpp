#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace marketlearn {

/// SplitMix64 (Steele, Lea & Flood). Output sequences are fixed by the seed
/// on every platform, which std distributions do not guarantee; all draws in
/// this library go through the helpers below.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }

  /// Uniform point in the open simplex (flat Dirichlet via normalized
  /// exponential spacings).
  std::vector<double> simplex_point(std::size_t n) {
    std::vector<double> v(n);
    double sum = 0.0;
    for (double& x : v) {
      x = -std::log(1.0 - uniform());
      if (x <= 0.0) x = 1e-300;
      sum += x;
    }
    for (double& x : v) x /= sum;
    return v;
  }

  std::vector<double> box(std::size_t n, double half_width) {
    std::vector<double> v(n);
    for (double& x : v) x = uniform(-half_width, half_width);
    return v;
  }

 private:
  std::uint64_t state_;
};

}  // namespace marketlearn
