#pragma once

#include <cstdint>

#include "stekit/tensor.hpp"

namespace stekit {

/// Counter-based deterministic generator: draw i is a fixed 64-bit mix of
/// (seed, i), so a given seed yields the same sequence on every platform.
/// Substreams derived with fork() are independent of the parent's position.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), counter_(0) {}

  std::uint64_t seed() const { return seed_; }

  static std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next_u64() {
    return mix64(seed_ + 0xA0761D6478BD642FULL * ++counter_);
  }

  /// Uniform in [0, 1) with 53 random bits; exact in double.
  double uniform() {
    return double(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::size_t uniform_index(std::size_t n) {
    return std::size_t(next_u64() % n);
  }

  /// Keyed substream; independent of how many draws this stream has made.
  Rng fork(std::uint64_t stream) const {
    return Rng(mix64(seed_ ^ mix64(stream)));
  }

  template <typename S>
  void fill_uniform(Tensor<S>& t, double lo, double hi) {
    for (std::size_t i = 0; i < t.size(); ++i)
      t[i] = static_cast<S>(uniform(lo, hi));
  }

  template <typename S>
  Tensor<S> uniform_tensor(Shape shape, double lo, double hi) {
    Tensor<S> t(std::move(shape));
    fill_uniform(t, lo, hi);
    return t;
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

}  // namespace stekit
