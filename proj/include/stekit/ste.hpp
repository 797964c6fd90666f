#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "stekit/autodiff.hpp"
#include "stekit/rng.hpp"
#include "stekit/tensor.hpp"

namespace stekit {

enum class Activation { none, tanh };
enum class Insertion { before_projector, after_projector, both };

/// One temporal-convolution layer. A video is cut into units of t_u frames;
/// each unit is encoded into t_o abstract frames by sliding a window of t_w
/// frames with stride t_s, wrapping circularly inside the unit.
struct LayerSpec {
  int t_u = 2;  // frames per convolutional unit
  int t_o = 2;  // abstract frames emitted per unit
  int t_w = 2;  // window size in frames
  int t_s = 1;  // stride in frames

  /// Slides per unit (the N in the channel-count formula).
  int slides() const { return t_u / t_s; }

  /// Output channels per slide for embedding width d: c = t_o * d / N.
  int channels(int d) const { return t_o * d / slides(); }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Constraint check for one layer at embedding width d. Returns one message
/// per violated constraint; empty means valid.
inline std::vector<std::string> validate(const LayerSpec& s, int d) {
  std::vector<std::string> errs;
  if (s.t_u < 1 || s.t_o < 1 || s.t_w < 1 || s.t_s < 1)
    errs.push_back("all of t_u=" + std::to_string(s.t_u) +
                   ", t_o=" + std::to_string(s.t_o) + ", t_w=" +
                   std::to_string(s.t_w) + ", t_s=" + std::to_string(s.t_s) +
                   " must be positive");
  if (s.t_w > s.t_u)
    errs.push_back("t_w > t_u (" + std::to_string(s.t_w) + " > " +
                   std::to_string(s.t_u) + ")");
  if (s.t_s >= 1 && s.t_u % s.t_s != 0)
    errs.push_back("t_u not divisible by t_s (" + std::to_string(s.t_u) +
                   " % " + std::to_string(s.t_s) + " != 0)");
  if (s.t_s >= 1 && s.t_u % s.t_s == 0) {
    const int n = s.slides();
    if ((s.t_o * d) % n != 0)
      errs.push_back("t_o*d not divisible by slide count (" +
                     std::to_string(s.t_o) + "*" + std::to_string(d) + " % " +
                     std::to_string(n) + " != 0)");
  }
  return errs;
}

inline void require_valid(const LayerSpec& s, int d) {
  const std::vector<std::string> errs = validate(s, d);
  if (!errs.empty()) {
    std::string msg = "invalid layer spec:";
    for (const std::string& e : errs) msg += " " + e + ";";
    throw contract_error(msg);
  }
}

/// Ordered layers plus where the stack sits relative to the projector.
/// `both` instantiates the same layer structure on each side, with
/// independently sized weights per side.
struct StackSpec {
  std::vector<LayerSpec> layers;
  Insertion insertion = Insertion::before_projector;
  Activation activation = Activation::none;

  std::size_t depth() const { return layers.size(); }

  friend bool operator==(const StackSpec&, const StackSpec&) = default;
};

template <typename S>
struct LayerWeights {
  Tensor<S> kernel;  // (c x t_w*d), one kernel shared by all patches
  Tensor<S> bias;    // (c)
};

/// (t frames x p patches x d dims) embeddings, temporal axis outermost.
template <typename S>
struct FrameEmbeddings {
  Tensor<S> data;

  FrameEmbeddings() = default;
  explicit FrameEmbeddings(Tensor<S> t) : data(std::move(t)) {
    if (data.rank() != 3)
      throw dim_error("frame embeddings must be rank-3 (t x p x d), got " +
                      shape_str(data.shape()));
  }

  std::size_t frames() const { return data.extent(0); }
  std::size_t patches() const { return data.extent(1); }
  std::size_t width() const { return data.extent(2); }
};

/// Frames appended so t + k divides into whole units. The wrap keeps k = 0
/// when t is already divisible.
inline std::size_t pad_amount(std::size_t t, int t_u) {
  const std::size_t u = std::size_t(t_u);
  return (u - t % u) % u;
}

template <typename S>
std::pair<FrameEmbeddings<S>, std::size_t> pad_replicate(
    const FrameEmbeddings<S>& z, int t_u) {
  if (t_u < 1) throw contract_error("pad_replicate: t_u must be positive");
  const std::size_t k = pad_amount(z.frames(), t_u);
  if (k == 0) return {z, 0};
  std::vector<Tensor<S>> parts{z.data};
  const Tensor<S> last = slice(z.data, 0, z.frames() - 1, 1);
  for (std::size_t i = 0; i < k; ++i) parts.push_back(last);
  return {FrameEmbeddings<S>(concat(parts, 0)), k};
}

inline std::size_t layer_output_frames(std::size_t t, const LayerSpec& s) {
  return (t + pad_amount(t, s.t_u)) / std::size_t(s.t_u) * std::size_t(s.t_o);
}

inline std::size_t stack_output_frames(std::size_t t,
                                       const std::vector<LayerSpec>& layers) {
  for (const LayerSpec& s : layers) t = layer_output_frames(t, s);
  return t;
}

namespace detail {

/// Slide outputs are laid out slide-major along the feature axis (slide 0's c
/// channels, then slide 1's, ...). Changing to channel-major interleaving
/// would be a local edit here.
template <typename S>
typename Tape<S>::NodeId arrange_slides(
    Tape<S>& tape, const std::vector<typename Tape<S>::NodeId>& slide_outputs) {
  return tape.concat(slide_outputs, 1);
}

}  // namespace detail

/// Recorded forward pass of one layer. `z` is a (t x p x d) node; `kernel`
/// and `bias` are weight nodes. Returns a ((t+k)/t_u*t_o x p x d) node.
template <typename S>
typename Tape<S>::NodeId layer_forward_node(Tape<S>& tape,
                                            typename Tape<S>::NodeId z,
                                            const LayerSpec& spec,
                                            typename Tape<S>::NodeId kernel,
                                            typename Tape<S>::NodeId bias) {
  using NodeId = typename Tape<S>::NodeId;
  const Shape& in_shape = tape.value(z).shape();
  if (in_shape.size() != 3)
    throw dim_error("layer_forward: input must be rank-3 (t x p x d), got " +
                    shape_str(in_shape));
  const std::size_t t = in_shape[0], p = in_shape[1], d = in_shape[2];
  require_valid(spec, int(d));
  const std::size_t t_u = spec.t_u, t_o = spec.t_o, t_w = spec.t_w,
                    t_s = spec.t_s;
  const std::size_t n = std::size_t(spec.slides());
  const std::size_t c = std::size_t(spec.channels(int(d)));
  if (tape.value(kernel).shape() != Shape{c, t_w * d})
    throw dim_error("layer_forward: kernel shape " +
                    shape_str(tape.value(kernel).shape()) + " does not match " +
                    shape_str({c, t_w * d}) + " required at width " +
                    std::to_string(d));
  if (tape.value(bias).shape() != Shape{c})
    throw dim_error("layer_forward: bias shape " +
                    shape_str(tape.value(bias).shape()) + " does not match " +
                    shape_str({c}));

  const std::size_t k = pad_amount(t, spec.t_u);
  NodeId padded = z;
  if (k > 0) {
    std::vector<NodeId> parts{z};
    const NodeId last = tape.slice(z, 0, t - 1, 1);
    for (std::size_t i = 0; i < k; ++i) parts.push_back(last);
    padded = tape.concat(parts, 0);
  }
  const std::size_t units = (t + k) / t_u;
  const NodeId kernel_t = tape.transpose(kernel);  // (t_w*d x c)

  std::vector<NodeId> unit_outputs;
  unit_outputs.reserve(units);
  for (std::size_t u = 0; u < units; ++u) {
    const NodeId unit = tape.slice(padded, 0, u * t_u, t_u);
    std::vector<NodeId> slide_outputs;
    slide_outputs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t start = i * t_s;
      NodeId window;
      if (start + t_w <= t_u) {
        window = tape.slice(unit, 0, start, t_w);
      } else {
        // circular wrap inside the unit so every slide sees t_w frames
        window = tape.concat({tape.slice(unit, 0, start, t_u - start),
                              tape.slice(unit, 0, 0, start + t_w - t_u)},
                             0);
      }
      // (t_w x p x d) -> (p x t_w*d): per patch, window frames side by side
      const NodeId rows =
          tape.reshape(tape.transpose01(window), {p, t_w * d});
      slide_outputs.push_back(
          tape.add_rows(tape.matmul(rows, kernel_t), bias));  // (p x c)
    }
    const NodeId features = detail::arrange_slides(tape, slide_outputs);
    // (p x t_o*d) -> t_o abstract frames of width d
    unit_outputs.push_back(
        tape.transpose01(tape.reshape(features, {p, t_o, d})));
  }
  return units == 1 ? unit_outputs[0] : tape.concat(unit_outputs, 0);
}

template <typename S>
struct StackNodes {
  std::vector<std::pair<typename Tape<S>::NodeId, typename Tape<S>::NodeId>>
      weights;  // (kernel, bias) per layer
};

template <typename S>
StackNodes<S> register_stack_weights(Tape<S>& tape,
                                     const std::vector<LayerWeights<S>>& ws) {
  StackNodes<S> nodes;
  nodes.weights.reserve(ws.size());
  for (const LayerWeights<S>& w : ws)
    nodes.weights.emplace_back(tape.leaf(w.kernel), tape.leaf(w.bias));
  return nodes;
}

/// Composition of the stack's layers, innermost first, with the optional
/// activation between consecutive layers.
template <typename S>
typename Tape<S>::NodeId stack_forward_node(Tape<S>& tape,
                                            typename Tape<S>::NodeId z,
                                            const StackSpec& stack,
                                            const StackNodes<S>& nodes) {
  if (stack.layers.empty())
    throw contract_error("stack_forward: stack must have at least one layer");
  if (nodes.weights.size() != stack.layers.size())
    throw contract_error("stack_forward: " +
                         std::to_string(stack.layers.size()) + " layers but " +
                         std::to_string(nodes.weights.size()) +
                         " weight sets");
  typename Tape<S>::NodeId cur = z;
  for (std::size_t l = 0; l < stack.layers.size(); ++l) {
    if (l > 0 && stack.activation == Activation::tanh) cur = tape.tanh(cur);
    cur = layer_forward_node(tape, cur, stack.layers[l], nodes.weights[l].first,
                             nodes.weights[l].second);
  }
  return cur;
}

// ---- immediate wrappers -----------------------------------------------------

template <typename S>
FrameEmbeddings<S> layer_forward(const FrameEmbeddings<S>& z,
                                 const LayerSpec& spec,
                                 const LayerWeights<S>& w) {
  Tape<S> tape;
  const auto out = layer_forward_node(tape, tape.leaf(z.data), spec,
                                      tape.leaf(w.kernel), tape.leaf(w.bias));
  return FrameEmbeddings<S>(tape.value(out));
}

template <typename S>
FrameEmbeddings<S> stack_forward(const FrameEmbeddings<S>& z,
                                 const StackSpec& stack,
                                 const std::vector<LayerWeights<S>>& ws) {
  Tape<S> tape;
  const auto nodes = register_stack_weights(tape, ws);
  const auto out = stack_forward_node(tape, tape.leaf(z.data), stack, nodes);
  return FrameEmbeddings<S>(tape.value(out));
}

// ---- parameter accounting ---------------------------------------------------

inline long long layer_param_count(const LayerSpec& s, int d) {
  require_valid(s, d);
  const long long c = s.channels(d);
  return c * (long long)(s.t_w) * d + c;
}

struct ParamBreakdown {
  std::vector<long long> per_layer;
  long long total = 0;
};

inline ParamBreakdown param_count(const StackSpec& stack, int d) {
  ParamBreakdown out;
  for (const LayerSpec& s : stack.layers) {
    out.per_layer.push_back(layer_param_count(s, d));
    out.total += out.per_layer.back();
  }
  return out;
}

// ---- initialization ----------------------------------------------------------

enum class InitMode { identity_preserving, scaled_uniform };

/// identity_preserving emits the frame-selector kernel (zero bias) so the
/// layer reproduces its input; legal only for t_o == t_u and t_w >= t_s.
/// scaled_uniform draws kernel and bias from U(-s, s), s = sqrt(1/(t_w*d)).
template <typename S>
LayerWeights<S> init_weights(const LayerSpec& spec, int d, InitMode mode,
                             Rng& rng) {
  require_valid(spec, d);
  const std::size_t c = std::size_t(spec.channels(d));
  const std::size_t cols = std::size_t(spec.t_w) * std::size_t(d);
  LayerWeights<S> w{Tensor<S>({c, cols}), Tensor<S>({c})};
  if (mode == InitMode::identity_preserving) {
    if (spec.t_o != spec.t_u)
      throw contract_error(
          "init_weights: identity_preserving requires t_o == t_u, got (" +
          std::to_string(spec.t_u) + ":" + std::to_string(spec.t_o) + ")");
    if (spec.t_w < spec.t_s)
      throw contract_error(
          "init_weights: identity_preserving requires t_w >= t_s");
    // c == t_s*d here; row j*d+a copies window frame j, dim a
    for (std::size_t r = 0; r < c; ++r) w.kernel(r, r) = S(1);
  } else {
    const double s = std::sqrt(1.0 / double(cols));
    rng.fill_uniform(w.kernel, -s, s);
    rng.fill_uniform(w.bias, -s, s);
  }
  return w;
}

template <typename S>
std::vector<LayerWeights<S>> init_stack_weights(const StackSpec& stack, int d,
                                                InitMode mode, Rng& rng) {
  std::vector<LayerWeights<S>> ws;
  ws.reserve(stack.layers.size());
  for (std::size_t l = 0; l < stack.layers.size(); ++l) {
    Rng layer_rng = rng.fork(l);
    ws.push_back(init_weights<S>(stack.layers[l], d, mode, layer_rng));
  }
  return ws;
}

}  // namespace stekit
