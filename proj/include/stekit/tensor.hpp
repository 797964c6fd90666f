#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "stekit/error.hpp"

namespace stekit {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  os << ']';
  return os.str();
}

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t e : s) n *= e;
  return n;
}

/// Dense row-major tensor of a floating scalar type. Values are treated as
/// immutable once an operation has produced them; every operation below
/// returns a fresh tensor.
template <typename S>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape)
      : shape_(std::move(shape)), data_(shape_numel(shape_), S(0)) {
    check_extents();
  }

  Tensor(Shape shape, std::vector<S> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    check_extents();
    if (data_.size() != shape_numel(shape_))
      throw dim_error("tensor: " + std::to_string(data_.size()) +
                      " values do not fill shape " + shape_str(shape_));
  }

  static Tensor scalar(S v) { return Tensor({1}, {v}); }

  static Tensor full(Shape shape, S v) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), v);
    return t;
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }

  S* data() { return data_.data(); }
  const S* data() const { return data_.data(); }
  std::vector<S>& values() { return data_; }
  const std::vector<S>& values() const { return data_; }

  S& operator[](std::size_t i) { return data_[i]; }
  S operator[](std::size_t i) const { return data_[i]; }

  S& operator()(std::size_t i, std::size_t j) {
    return data_[i * shape_[1] + j];
  }
  S operator()(std::size_t i, std::size_t j) const {
    return data_[i * shape_[1] + j];
  }
  S& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  S operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  bool all_finite() const {
    for (S v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  void check_extents() const {
    for (std::size_t e : shape_)
      if (e == 0) throw dim_error("tensor: zero extent in " + shape_str(shape_));
  }

  Shape shape_;
  std::vector<S> data_;
};

namespace detail {

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw dim_error(msg);
}

}  // namespace detail

template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
  detail::require(a.rank() == 2 && b.rank() == 2,
                  "matmul: expects rank-2 operands, got " +
                      shape_str(a.shape()) + " and " + shape_str(b.shape()));
  detail::require(a.extent(1) == b.extent(0),
                  "matmul: inner dimensions disagree: " + shape_str(a.shape()) +
                      " vs " + shape_str(b.shape()));
  const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
  Tensor<S> out({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t l = 0; l < k; ++l) {
      const S av = a(i, l);
      for (std::size_t j = 0; j < n; ++j) out(i, j) += av * b(l, j);
    }
  return out;
}

template <typename S>
Tensor<S> transpose(const Tensor<S>& a) {
  detail::require(a.rank() == 2,
                  "transpose: expects rank-2, got " + shape_str(a.shape()));
  Tensor<S> out({a.extent(1), a.extent(0)});
  for (std::size_t i = 0; i < a.extent(0); ++i)
    for (std::size_t j = 0; j < a.extent(1); ++j) out(j, i) = a(i, j);
  return out;
}

/// Swap the first two axes of a rank-3 tensor: (a,b,c) -> (b,a,c).
template <typename S>
Tensor<S> transpose01(const Tensor<S>& t) {
  detail::require(t.rank() == 3,
                  "transpose01: expects rank-3, got " + shape_str(t.shape()));
  const std::size_t a = t.extent(0), b = t.extent(1), c = t.extent(2);
  Tensor<S> out({b, a, c});
  for (std::size_t i = 0; i < a; ++i)
    for (std::size_t j = 0; j < b; ++j)
      for (std::size_t l = 0; l < c; ++l) out(j, i, l) = t(i, j, l);
  return out;
}

template <typename S>
Tensor<S> reshape(const Tensor<S>& a, Shape shape) {
  detail::require(shape_numel(shape) == a.size(),
                  "reshape: cannot view " + shape_str(a.shape()) + " as " +
                      shape_str(shape));
  return Tensor<S>(std::move(shape), a.values());
}

template <typename S>
Tensor<S> slice(const Tensor<S>& a, std::size_t axis, std::size_t start,
                std::size_t len) {
  detail::require(axis < a.rank(), "slice: axis " + std::to_string(axis) +
                                       " out of range for " +
                                       shape_str(a.shape()));
  detail::require(len >= 1 && start + len <= a.extent(axis),
                  "slice: range [" + std::to_string(start) + ", " +
                      std::to_string(start + len) + ") exceeds axis " +
                      std::to_string(axis) + " of " + shape_str(a.shape()));
  Shape out_shape = a.shape();
  out_shape[axis] = len;
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= a.extent(i);
  for (std::size_t i = axis + 1; i < a.rank(); ++i) inner *= a.extent(i);
  Tensor<S> out(out_shape);
  const std::size_t src_stride = a.extent(axis) * inner;
  const std::size_t dst_stride = len * inner;
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(a.data() + o * src_stride + start * inner, dst_stride,
                out.data() + o * dst_stride);
  return out;
}

template <typename S>
Tensor<S> concat(const std::vector<Tensor<S>>& parts, std::size_t axis) {
  detail::require(!parts.empty(), "concat: no operands");
  const Shape& ref = parts.front().shape();
  detail::require(axis < ref.size(), "concat: axis " + std::to_string(axis) +
                                         " out of range for " +
                                         shape_str(ref));
  std::size_t total = 0;
  for (const Tensor<S>& p : parts) {
    detail::require(p.rank() == ref.size(),
                    "concat: rank mismatch: " + shape_str(ref) + " vs " +
                        shape_str(p.shape()));
    for (std::size_t i = 0; i < ref.size(); ++i)
      detail::require(i == axis || p.extent(i) == ref[i],
                      "concat: incompatible shapes " + shape_str(ref) +
                          " and " + shape_str(p.shape()) + " on axis " +
                          std::to_string(axis));
    total += p.extent(axis);
  }
  Shape out_shape = ref;
  out_shape[axis] = total;
  Tensor<S> out(out_shape);
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= ref[i];
  for (std::size_t i = axis + 1; i < ref.size(); ++i) inner *= ref[i];
  const std::size_t dst_stride = total * inner;
  std::size_t offset = 0;
  for (const Tensor<S>& p : parts) {
    const std::size_t src_stride = p.extent(axis) * inner;
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(p.data() + o * src_stride, src_stride,
                  out.data() + o * dst_stride + offset);
    offset += src_stride;
  }
  return out;
}

template <typename S>
std::vector<Tensor<S>> split(const Tensor<S>& a, std::size_t axis,
                             const std::vector<std::size_t>& sizes) {
  std::size_t total = std::accumulate(sizes.begin(), sizes.end(),
                                      std::size_t{0});
  detail::require(axis < a.rank() && total == a.extent(axis),
                  "split: sizes do not cover axis " + std::to_string(axis) +
                      " of " + shape_str(a.shape()));
  std::vector<Tensor<S>> out;
  out.reserve(sizes.size());
  std::size_t start = 0;
  for (std::size_t len : sizes) {
    out.push_back(slice(a, axis, start, len));
    start += len;
  }
  return out;
}

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  detail::require(a.same_shape(b), "add: shape mismatch " +
                                       shape_str(a.shape()) + " vs " +
                                       shape_str(b.shape()));
  Tensor<S> out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

template <typename S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
  detail::require(a.same_shape(b), "sub: shape mismatch " +
                                       shape_str(a.shape()) + " vs " +
                                       shape_str(b.shape()));
  Tensor<S> out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
  detail::require(a.same_shape(b), "mul: shape mismatch " +
                                       shape_str(a.shape()) + " vs " +
                                       shape_str(b.shape()));
  Tensor<S> out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  return out;
}

template <typename S>
Tensor<S> scale(const Tensor<S>& a, S c) {
  Tensor<S> out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
  return out;
}

/// (m x n) + (n): add a bias row to every row.
template <typename S>
Tensor<S> add_rows(const Tensor<S>& m, const Tensor<S>& bias) {
  detail::require(m.rank() == 2 && bias.rank() == 1 &&
                      bias.extent(0) == m.extent(1),
                  "add_rows: cannot broadcast " + shape_str(bias.shape()) +
                      " over rows of " + shape_str(m.shape()));
  Tensor<S> out = m;
  for (std::size_t i = 0; i < m.extent(0); ++i)
    for (std::size_t j = 0; j < m.extent(1); ++j) out(i, j) += bias[j];
  return out;
}

template <typename S>
Tensor<S> tanh_elem(const Tensor<S>& a) {
  Tensor<S> out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
  return out;
}

template <typename S>
S sum(const Tensor<S>& a) {
  S acc = S(0);
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i];
  return acc;
}

/// Column means of an (m x n) matrix, returned as (1 x n). Each column's
/// addends are accumulated in ascending value order, so the result depends
/// only on the multiset of rows -- permuting rows leaves it bit-identical.
template <typename S>
Tensor<S> mean_rows(const Tensor<S>& a) {
  detail::require(a.rank() == 2,
                  "mean_rows: expects rank-2, got " + shape_str(a.shape()));
  const std::size_t m = a.extent(0), n = a.extent(1);
  Tensor<S> out({1, n});
  std::vector<S> column(m);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < m; ++i) column[i] = a(i, j);
    std::sort(column.begin(), column.end());
    S acc = S(0);
    for (S v : column) acc += v;
    out(0, j) = acc / static_cast<S>(m);
  }
  return out;
}

/// log softmax over all elements (shape preserved).
template <typename S>
Tensor<S> log_softmax(const Tensor<S>& a) {
  detail::require(a.size() >= 1, "log_softmax: empty input");
  S mx = a[0];
  for (std::size_t i = 1; i < a.size(); ++i) mx = std::max(mx, a[i]);
  S lse = S(0);
  for (std::size_t i = 0; i < a.size(); ++i) lse += std::exp(a[i] - mx);
  lse = std::log(lse) + mx;
  Tensor<S> out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= lse;
  return out;
}

template <typename S>
double max_abs_diff(const Tensor<S>& a, const Tensor<S>& b) {
  detail::require(a.same_shape(b), "max_abs_diff: shape mismatch " +
                                       shape_str(a.shape()) + " vs " +
                                       shape_str(b.shape()));
  double mx = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    mx = std::max(mx, std::abs(double(a[i]) - double(b[i])));
  return mx;
}

template <typename S>
double norm2(const Tensor<S>& a) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += double(a[i]) * double(a[i]);
  return std::sqrt(acc);
}

}  // namespace stekit
