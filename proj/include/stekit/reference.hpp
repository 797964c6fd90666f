#pragma once

#include <cstddef>
#include <vector>

#include "stekit/ste.hpp"
#include "stekit/tensor.hpp"

namespace stekit::reference {

/// Naive nested-loop evaluation of one layer, written directly from the
/// definitions (replicate padding, per-unit circular windows, slide-major
/// channel layout). It shares nothing with the recorded implementation and
/// serves as the verification oracle for it.
template <typename S>
Tensor<S> layer_forward_naive(const Tensor<S>& z, const LayerSpec& spec,
                              const Tensor<S>& kernel, const Tensor<S>& bias) {
  const std::size_t t = z.extent(0), p = z.extent(1), d = z.extent(2);
  const std::size_t t_u = std::size_t(spec.t_u);
  const std::size_t t_o = std::size_t(spec.t_o);
  const std::size_t t_w = std::size_t(spec.t_w);
  const std::size_t t_s = std::size_t(spec.t_s);
  const std::size_t n = t_u / t_s;
  const std::size_t c = t_o * d / n;

  const std::size_t k = (t_u - t % t_u) % t_u;
  const std::size_t units = (t + k) / t_u;

  // replicate-padded frame lookup
  const auto frame = [&](std::size_t f, std::size_t q, std::size_t j) -> S {
    return z(f < t ? f : t - 1, q, j);
  };

  Tensor<S> out({units * t_o, p, d});
  std::vector<S> window(t_w * d);
  for (std::size_t u = 0; u < units; ++u) {
    for (std::size_t q = 0; q < p; ++q) {
      std::vector<S> features(t_o * d);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t a = 0; a < t_w; ++a) {
          const std::size_t fu = (i * t_s + a) % t_u;  // wrap inside the unit
          for (std::size_t j = 0; j < d; ++j)
            window[a * d + j] = frame(u * t_u + fu, q, j);
        }
        for (std::size_t ch = 0; ch < c; ++ch) {
          S acc = bias[ch];
          for (std::size_t m = 0; m < t_w * d; ++m)
            acc += kernel(ch, m) * window[m];
          features[i * c + ch] = acc;  // slide-major
        }
      }
      for (std::size_t r = 0; r < t_o; ++r)
        for (std::size_t j = 0; j < d; ++j)
          out(u * t_o + r, q, j) = features[r * d + j];
    }
  }
  return out;
}

template <typename S>
Tensor<S> stack_forward_naive(const Tensor<S>& z, const StackSpec& stack,
                              const std::vector<LayerWeights<S>>& ws) {
  Tensor<S> cur = z;
  for (std::size_t l = 0; l < stack.layers.size(); ++l) {
    if (l > 0 && stack.activation == Activation::tanh) cur = tanh_elem(cur);
    cur = layer_forward_naive(cur, stack.layers[l], ws[l].kernel, ws[l].bias);
  }
  return cur;
}

}  // namespace stekit::reference
