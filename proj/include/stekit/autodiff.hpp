#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "stekit/tensor.hpp"

namespace stekit {

/// Reverse-mode record of a forward computation. Every operation appends a
/// node holding its value, its parents, a forward closure (used to replay the
/// recorded computation) and a backward closure (used by the reverse sweep).
/// Construction is single-writer; backward() is single-threaded per tape.
template <typename S>
class Tape {
 public:
  using NodeId = std::size_t;

  NodeId leaf(Tensor<S> v) {
    nodes_.push_back(Node{std::move(v), {}, nullptr, nullptr});
    leaves_.push_back(nodes_.size() - 1);
    return nodes_.size() - 1;
  }

  std::size_t node_count() const { return nodes_.size(); }
  const std::vector<NodeId>& leaves() const { return leaves_; }
  bool is_leaf(NodeId id) const { return nodes_.at(id).forward == nullptr; }

  const Tensor<S>& value(NodeId id) const { return nodes_.at(id).value; }

  // ---- recorded operations -------------------------------------------------

  NodeId matmul(NodeId a, NodeId b) {
    return record(
        {a, b},
        [](const std::vector<const Tensor<S>*>& in) {
          return stekit::matmul(*in[0], *in[1]);
        },
        [](Tape& t, const BackCtx& c) {
          t.accumulate(c.parents[0],
                       stekit::matmul(*c.out_grad,
                                      stekit::transpose(t.value(c.parents[1]))));
          t.accumulate(c.parents[1],
                       stekit::matmul(stekit::transpose(t.value(c.parents[0])),
                                      *c.out_grad));
        });
  }

  NodeId transpose(NodeId a) {
    return record(
        {a},
        [](const std::vector<const Tensor<S>*>& in) {
          return stekit::transpose(*in[0]);
        },
        [](Tape& t, const BackCtx& c) {
          t.accumulate(c.parents[0], stekit::transpose(*c.out_grad));
        });
  }

  NodeId transpose01(NodeId a) {
    return record(
        {a},
        [](const std::vector<const Tensor<S>*>& in) {
          return stekit::transpose01(*in[0]);
        },
        [](Tape& t, const BackCtx& c) {
          t.accumulate(c.parents[0], stekit::transpose01(*c.out_grad));
        });
  }

  NodeId reshape(NodeId a, Shape shape) {
    return record(
        {a},
        [shape](const std::vector<const Tensor<S>*>& in) {
          return stekit::reshape(*in[0], shape);
        },
        [](Tape& t, const BackCtx& c) {
          t.accumulate(c.parents[0],
                       stekit::reshape(*c.out_grad,
                                       t.value(c.parents[0]).shape()));
        });
  }

  NodeId slice(NodeId a, std::size_t axis, std::size_t start, std::size_t len) {
    return record(
        {a},
        [axis, start, len](const std::vector<const Tensor<S>*>& in) {
          return stekit::slice(*in[0], axis, start, len);
        },
        [axis, start](Tape& t, const BackCtx& c) {
          Tensor<S> g(t.value(c.parents[0]).shape());
          scatter_add(g, *c.out_grad, axis, start);
          t.accumulate(c.parents[0], g);
        });
  }

  NodeId concat(const std::vector<NodeId>& parts, std::size_t axis) {
    return record(
        parts,
        [axis](const std::vector<const Tensor<S>*>& in) {
          std::vector<Tensor<S>> vs;
          vs.reserve(in.size());
          for (const Tensor<S>* p : in) vs.push_back(*p);
          return stekit::concat(vs, axis);
        },
        [axis](Tape& t, const BackCtx& c) {
          std::size_t start = 0;
          for (NodeId p : c.parents) {
            const std::size_t len = t.value(p).extent(axis);
            t.accumulate(p, stekit::slice(*c.out_grad, axis, start, len));
            start += len;
          }
        });
  }

  NodeId add(NodeId a, NodeId b) {
    return record(
        {a, b},
        [](const std::vector<const Tensor<S>*>& in) {
          return stekit::add(*in[0], *in[1]);
        },
        [](Tape& t, const BackCtx& c) {
          t.accumulate(c.parents[0], *c.out_grad);
          t.accumulate(c.parents[1], *c.out_grad);
        });
  }

  NodeId sub(NodeId a, NodeId b) {
    return record(
        {a, b},
        [](const std::vector<const Tensor<S>*>& in) {
          return stekit::sub(*in[0], *in[1]);
        },
        [](Tape& t, const BackCtx& c) {
          t.accumulate(c.parents[0], *c.out_grad);
          t.accumulate(c.parents[1], stekit::scale(*c.out_grad, S(-1)));
        });
  }

  NodeId mul(NodeId a, NodeId b) {
    return record(
        {a, b},
        [](const std::vector<const Tensor<S>*>& in) {
          return stekit::mul(*in[0], *in[1]);
        },
        [](Tape& t, const BackCtx& c) {
          t.accumulate(c.parents[0],
                       stekit::mul(*c.out_grad, t.value(c.parents[1])));
          t.accumulate(c.parents[1],
                       stekit::mul(*c.out_grad, t.value(c.parents[0])));
        });
  }

  NodeId scale(NodeId a, S factor) {
    return record(
        {a},
        [factor](const std::vector<const Tensor<S>*>& in) {
          return stekit::scale(*in[0], factor);
        },
        [factor](Tape& t, const BackCtx& c) {
          t.accumulate(c.parents[0], stekit::scale(*c.out_grad, factor));
        });
  }

  NodeId add_rows(NodeId m, NodeId bias) {
    return record(
        {m, bias},
        [](const std::vector<const Tensor<S>*>& in) {
          return stekit::add_rows(*in[0], *in[1]);
        },
        [](Tape& t, const BackCtx& c) {
          t.accumulate(c.parents[0], *c.out_grad);
          const Tensor<S>& g = *c.out_grad;
          Tensor<S> gb({g.extent(1)});
          for (std::size_t i = 0; i < g.extent(0); ++i)
            for (std::size_t j = 0; j < g.extent(1); ++j) gb[j] += g(i, j);
          t.accumulate(c.parents[1], gb);
        });
  }

  NodeId tanh(NodeId a) {
    return record(
        {a},
        [](const std::vector<const Tensor<S>*>& in) {
          return stekit::tanh_elem(*in[0]);
        },
        [](Tape& t, const BackCtx& c) {
          const Tensor<S>& y = *c.out_value;
          Tensor<S> g = *c.out_grad;
          for (std::size_t i = 0; i < g.size(); ++i)
            g[i] *= S(1) - y[i] * y[i];
          t.accumulate(c.parents[0], g);
        });
  }

  NodeId sum(NodeId a) {
    return record(
        {a},
        [](const std::vector<const Tensor<S>*>& in) {
          return Tensor<S>::scalar(stekit::sum(*in[0]));
        },
        [](Tape& t, const BackCtx& c) {
          t.accumulate(c.parents[0],
                       Tensor<S>::full(t.value(c.parents[0]).shape(),
                                       (*c.out_grad)[0]));
        });
  }

  NodeId mean_rows(NodeId a) {
    return record(
        {a},
        [](const std::vector<const Tensor<S>*>& in) {
          return stekit::mean_rows(*in[0]);
        },
        [](Tape& t, const BackCtx& c) {
          const Tensor<S>& x = t.value(c.parents[0]);
          const std::size_t m = x.extent(0), n = x.extent(1);
          Tensor<S> g({m, n});
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
              g(i, j) = (*c.out_grad)(0, j) / static_cast<S>(m);
          t.accumulate(c.parents[0], g);
        });
  }

  NodeId log_softmax(NodeId a) {
    return record(
        {a},
        [](const std::vector<const Tensor<S>*>& in) {
          return stekit::log_softmax(*in[0]);
        },
        [](Tape& t, const BackCtx& c) {
          const Tensor<S>& y = *c.out_value;
          const Tensor<S>& go = *c.out_grad;
          S gsum = S(0);
          for (std::size_t i = 0; i < go.size(); ++i) gsum += go[i];
          Tensor<S> g = go;
          for (std::size_t i = 0; i < g.size(); ++i)
            g[i] -= std::exp(y[i]) * gsum;
          t.accumulate(c.parents[0], g);
        });
  }

  /// Select one element (by flat index) as a scalar node.
  NodeId pick(NodeId a, std::size_t index) {
    if (index >= value(a).size())
      throw contract_error("pick: index " + std::to_string(index) +
                           " out of range for " +
                           shape_str(value(a).shape()));
    return record(
        {a},
        [index](const std::vector<const Tensor<S>*>& in) {
          return Tensor<S>::scalar((*in[0])[index]);
        },
        [index](Tape& t, const BackCtx& c) {
          Tensor<S> g(t.value(c.parents[0]).shape());
          g[index] = (*c.out_grad)[0];
          t.accumulate(c.parents[0], g);
        });
  }

  // ---- reverse sweep -------------------------------------------------------

  /// Populate gradients of every node reachable from `output`, which must be
  /// scalar-valued. Nodes are visited in reverse creation order, which is a
  /// valid reverse topological order because parents precede children.
  void backward(NodeId output) {
    if (value(output).size() != 1)
      throw contract_error("grad: output must be scalar, got shape " +
                           shape_str(value(output).shape()));
    grads_.assign(nodes_.size(), Tensor<S>());
    grads_[output] = Tensor<S>::scalar(S(1));
    for (std::size_t i = output + 1; i-- > 0;) {
      const Node& node = nodes_[i];
      if (grads_[i].size() == 0 || !node.backward) continue;
      BackCtx ctx{node.parents, &node.value, &grads_[i]};
      node.backward(*this, ctx);
    }
  }

  /// Gradient of the last backward() output w.r.t. node `id`. Zero-filled if
  /// the node does not influence the output.
  Tensor<S> grad(NodeId id) const {
    if (grads_.empty())
      throw contract_error("grad: backward() has not been run");
    if (grads_.at(id).size() == 0) return Tensor<S>(value(id).shape());
    return grads_[id];
  }

  /// Recompute every non-leaf node from its parents' recorded values and
  /// report the largest deviation from the recorded output (0 == exact replay).
  double replay_deviation() const {
    double worst = 0.0;
    for (const Node& node : nodes_) {
      if (!node.forward) continue;
      std::vector<const Tensor<S>*> in;
      in.reserve(node.parents.size());
      for (NodeId p : node.parents) in.push_back(&nodes_[p].value);
      Tensor<S> redo = node.forward(in);
      worst = std::max(worst, max_abs_diff(redo, node.value));
    }
    return worst;
  }

 private:
  struct BackCtx {
    const std::vector<NodeId>& parents;
    const Tensor<S>* out_value;
    const Tensor<S>* out_grad;
  };

  using ForwardFn =
      std::function<Tensor<S>(const std::vector<const Tensor<S>*>&)>;
  using BackwardFn = std::function<void(Tape&, const BackCtx&)>;

  struct Node {
    Tensor<S> value;
    std::vector<NodeId> parents;
    ForwardFn forward;
    BackwardFn backward;
  };

  NodeId record(std::vector<NodeId> parents, ForwardFn fwd, BackwardFn bwd) {
    std::vector<const Tensor<S>*> in;
    in.reserve(parents.size());
    for (NodeId p : parents) in.push_back(&nodes_.at(p).value);
    Tensor<S> out = fwd(in);
    nodes_.push_back(
        Node{std::move(out), std::move(parents), std::move(fwd), std::move(bwd)});
    return nodes_.size() - 1;
  }

  void accumulate(NodeId id, const Tensor<S>& g) {
    if (grads_[id].size() == 0)
      grads_[id] = g;
    else
      grads_[id] = stekit::add(grads_[id], g);
  }

  static void scatter_add(Tensor<S>& dst, const Tensor<S>& src,
                          std::size_t axis, std::size_t start) {
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= dst.extent(i);
    for (std::size_t i = axis + 1; i < dst.rank(); ++i) inner *= dst.extent(i);
    const std::size_t len = src.extent(axis);
    const std::size_t dst_stride = dst.extent(axis) * inner;
    const std::size_t src_stride = len * inner;
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t i = 0; i < src_stride; ++i)
        dst.data()[o * dst_stride + start * inner + i] +=
            src.data()[o * src_stride + i];
  }

  std::vector<Node> nodes_;
  std::vector<NodeId> leaves_;
  std::vector<Tensor<S>> grads_;
};

/// Central finite-difference estimate of d f / d x, element by element:
/// (f(x + h e_i) - f(x - h e_i)) / 2h.
template <typename S, typename F>
Tensor<S> finite_diff(F&& f, const Tensor<S>& x, S step) {
  if (!(step > S(0))) throw contract_error("finite_diff: step must be > 0");
  Tensor<S> g(x.shape());
  Tensor<S> probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const S orig = probe[i];
    probe[i] = orig + step;
    const S fp = f(probe);
    probe[i] = orig - step;
    const S fm = f(probe);
    probe[i] = orig;
    g[i] = (fp - fm) / (S(2) * step);
  }
  return g;
}

/// Largest elementwise relative error between an analytic gradient and a
/// numeric one; denominators are floored so near-zero entries are compared
/// absolutely at the floor's scale.
template <typename S>
double max_rel_err(const Tensor<S>& analytic, const Tensor<S>& numeric,
                   double floor = 1e-4) {
  detail::require(analytic.same_shape(numeric),
                  "max_rel_err: shape mismatch " +
                      shape_str(analytic.shape()) + " vs " +
                      shape_str(numeric.shape()));
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double a = double(analytic[i]);
    const double n = double(numeric[i]);
    const double denom = std::max({std::abs(a), std::abs(n), floor});
    worst = std::max(worst, std::abs(a - n) / denom);
  }
  return worst;
}

}  // namespace stekit
