#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>
#include <vector>

#include "duo/numerics/tensor.hpp"

namespace duo {

// Counter-based generator: sample i of stream s under seed k is
// mix(k, s, i), so streams can be split off without sharing state.
class Rng {
public:
  explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0) : seed_(seed), stream_(stream) {}

  // Independent generator for a named sub-task (init, shuffle, data, ...).
  Rng split(std::uint64_t stream) const { return Rng(seed_, mix(stream_ + 0x632be59bd9b4e019ULL, stream)); }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64() { return mix(mix(seed_, stream_), counter_++); }

  // Uniform in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) {
    const double v = lo + (hi - lo) * next_double();
    return v < hi ? v : std::nextafter(hi, lo);
  }

  // Box-Muller; one normal per call, the pair partner is discarded so the
  // stream position stays a pure function of the call count.
  double normal(double mean = 0.0, double stddev = 1.0) {
    double u1 = next_double();
    const double u2 = next_double();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return mean + stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Integer in [0, n).
  std::size_t below(std::size_t n) {
    if (n == 0) throw ArgumentError("Rng::below: n must be positive");
    // rejection keeps the draw unbiased
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t v;
    do { v = next_u64(); } while (v >= limit);
    return static_cast<std::size_t>(v % n);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

private:
  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
};

inline Tensor uniform(Rng& rng, double lo, double hi, const Shape& shape) {
  if (!(lo < hi)) throw ArgumentError("uniform: require lo < hi");
  Tensor t(shape);
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

inline Tensor normal(Rng& rng, double mean, double stddev, const Shape& shape) {
  Tensor t(shape);
  for (auto& v : t.data()) v = rng.normal(mean, stddev);
  return t;
}

} // namespace duo
