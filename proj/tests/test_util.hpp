#pragma once

#include <cstddef>

#include "stekit/rng.hpp"
#include "stekit/tensor.hpp"

namespace stekit::test {

template <typename S>
Tensor<S> random_tensor(Rng& rng, Shape shape, double lo = -1.0,
                        double hi = 1.0) {
  return rng.uniform_tensor<S>(std::move(shape), lo, hi);
}

/// Independent triple-loop product used to check the library matmul.
template <typename S>
Tensor<S> matmul_oracle(const Tensor<S>& a, const Tensor<S>& b) {
  const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
  Tensor<S> out({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      S acc = S(0);
      for (std::size_t l = 0; l < k; ++l) acc += a(i, l) * b(l, j);
      out(i, j) = acc;
    }
  return out;
}

}  // namespace stekit::test
