#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "stekit/autodiff.hpp"
#include "stekit/rng.hpp"
#include "stekit/ste.hpp"

namespace stekit {

/// One question/answer sample over synthetic raw frames (t x p x d_raw).
template <typename S>
struct ToyBatch {
  Tensor<S> frames;
  int question = 0;
  std::vector<int> answer;  // token ids; length >= 1
};

/// Desk-scale pipeline: stub encoder -> (stack?) -> two-layer projector ->
/// (stack?) -> causal answer scorer over a toy vocabulary. A missing stack is
/// the implicit-temporal baseline (the scorer's mean pooling is the only
/// cross-frame interaction).
struct PipelineConfig {
  int d_raw = 8;
  int d_vis = 16;
  int d_sem = 16;
  int p = 4;
  int vocab = 8;
  std::optional<StackSpec> stack;
  Activation projector_activation = Activation::tanh;
  std::uint64_t seed = 0;

  bool stack_before() const {
    return stack && (stack->insertion == Insertion::before_projector ||
                     stack->insertion == Insertion::both);
  }
  bool stack_after() const {
    return stack && (stack->insertion == Insertion::after_projector ||
                     stack->insertion == Insertion::both);
  }
};

inline void validate_config(const PipelineConfig& cfg) {
  if (cfg.d_raw < 1 || cfg.d_vis < 1 || cfg.d_sem < 1 || cfg.p < 1 ||
      cfg.vocab < 1)
    throw contract_error("pipeline config: all dimensions must be positive");
  if (cfg.stack) {
    if (cfg.stack->layers.empty())
      throw contract_error("pipeline config: stack must have layers");
    if (cfg.stack_before())
      for (const LayerSpec& l : cfg.stack->layers) require_valid(l, cfg.d_vis);
    if (cfg.stack_after())
      for (const LayerSpec& l : cfg.stack->layers) require_valid(l, cfg.d_sem);
  }
}

enum class ParamGroup { encoder, ste, projector, scorer };

inline const char* group_name(ParamGroup g) {
  switch (g) {
    case ParamGroup::encoder: return "encoder";
    case ParamGroup::ste: return "ste";
    case ParamGroup::projector: return "projector";
    case ParamGroup::scorer: return "scorer";
  }
  return "?";
}

template <typename S>
struct PipelineWeights {
  Tensor<S> enc_w, enc_b;                    // d_raw x d_vis, d_vis
  std::vector<LayerWeights<S>> ste_before;   // at width d_vis
  Tensor<S> proj_w1, proj_b1;                // d_vis x d_sem, d_sem
  Tensor<S> proj_w2, proj_b2;                // d_sem x d_sem, d_sem
  std::vector<LayerWeights<S>> ste_after;    // at width d_sem
  Tensor<S> embed;                           // vocab x d_sem
  Tensor<S> ctx_w;                           // d_sem x d_sem
  Tensor<S> out_w;                           // d_sem x vocab
  Tensor<S> out_b;                           // vocab
};

template <typename S>
using ParamRef = std::tuple<ParamGroup, std::string, Tensor<S>*>;

/// All trainable tensors in a stable order (also the checkpoint entry order).
template <typename S>
std::vector<ParamRef<S>> param_refs(PipelineWeights<S>& w) {
  std::vector<ParamRef<S>> out;
  out.emplace_back(ParamGroup::encoder, "encoder.w", &w.enc_w);
  out.emplace_back(ParamGroup::encoder, "encoder.b", &w.enc_b);
  for (std::size_t l = 0; l < w.ste_before.size(); ++l) {
    out.emplace_back(ParamGroup::ste, "ste_before." + std::to_string(l) +
                                          ".kernel",
                     &w.ste_before[l].kernel);
    out.emplace_back(ParamGroup::ste,
                     "ste_before." + std::to_string(l) + ".bias",
                     &w.ste_before[l].bias);
  }
  out.emplace_back(ParamGroup::projector, "projector.w1", &w.proj_w1);
  out.emplace_back(ParamGroup::projector, "projector.b1", &w.proj_b1);
  out.emplace_back(ParamGroup::projector, "projector.w2", &w.proj_w2);
  out.emplace_back(ParamGroup::projector, "projector.b2", &w.proj_b2);
  for (std::size_t l = 0; l < w.ste_after.size(); ++l) {
    out.emplace_back(ParamGroup::ste,
                     "ste_after." + std::to_string(l) + ".kernel",
                     &w.ste_after[l].kernel);
    out.emplace_back(ParamGroup::ste,
                     "ste_after." + std::to_string(l) + ".bias",
                     &w.ste_after[l].bias);
  }
  out.emplace_back(ParamGroup::scorer, "scorer.embed", &w.embed);
  out.emplace_back(ParamGroup::scorer, "scorer.ctx_w", &w.ctx_w);
  out.emplace_back(ParamGroup::scorer, "scorer.out_w", &w.out_w);
  out.emplace_back(ParamGroup::scorer, "scorer.out_b", &w.out_b);
  return out;
}

namespace detail {

// fixed substreams per component, so adding or removing the stack never
// shifts any other component's draws
inline constexpr std::uint64_t kEncoderStream = 0x11;
inline constexpr std::uint64_t kSteBeforeStream = 0x22;
inline constexpr std::uint64_t kProjectorStream = 0x33;
inline constexpr std::uint64_t kSteAfterStream = 0x44;
inline constexpr std::uint64_t kScorerStream = 0x55;

template <typename S>
Tensor<S> uniform_fan_in(Rng& rng, std::size_t rows, std::size_t cols) {
  const double s = std::sqrt(1.0 / double(rows));
  return rng.uniform_tensor<S>({rows, cols}, -s, s);
}

}  // namespace detail

template <typename S>
PipelineWeights<S> init_pipeline_weights(
    const PipelineConfig& cfg, InitMode ste_init = InitMode::scaled_uniform) {
  validate_config(cfg);
  const Rng root(cfg.seed);
  PipelineWeights<S> w;

  Rng enc = root.fork(detail::kEncoderStream);
  w.enc_w = detail::uniform_fan_in<S>(enc, cfg.d_raw, cfg.d_vis);
  w.enc_b = Tensor<S>({std::size_t(cfg.d_vis)});

  if (cfg.stack_before()) {
    Rng r = root.fork(detail::kSteBeforeStream);
    w.ste_before = init_stack_weights<S>(*cfg.stack, cfg.d_vis, ste_init, r);
  }

  Rng proj = root.fork(detail::kProjectorStream);
  w.proj_w1 = detail::uniform_fan_in<S>(proj, cfg.d_vis, cfg.d_sem);
  w.proj_b1 = Tensor<S>({std::size_t(cfg.d_sem)});
  w.proj_w2 = detail::uniform_fan_in<S>(proj, cfg.d_sem, cfg.d_sem);
  w.proj_b2 = Tensor<S>({std::size_t(cfg.d_sem)});

  if (cfg.stack_after()) {
    Rng r = root.fork(detail::kSteAfterStream);
    w.ste_after = init_stack_weights<S>(*cfg.stack, cfg.d_sem, ste_init, r);
  }

  Rng sc = root.fork(detail::kScorerStream);
  w.embed = sc.uniform_tensor<S>(
      {std::size_t(cfg.vocab), std::size_t(cfg.d_sem)}, -0.5, 0.5);
  w.ctx_w = detail::uniform_fan_in<S>(sc, cfg.d_sem, cfg.d_sem);
  w.out_w = detail::uniform_fan_in<S>(sc, cfg.d_sem, cfg.vocab);
  w.out_b = Tensor<S>({std::size_t(cfg.vocab)});
  return w;
}

/// Force both projector layers to the identity; requires d_vis == d_sem.
/// Combine with projector_activation = none for an end-to-end pass-through.
template <typename S>
void set_identity_projector(const PipelineConfig& cfg, PipelineWeights<S>& w) {
  if (cfg.d_vis != cfg.d_sem)
    throw contract_error("identity projector requires d_vis == d_sem");
  w.proj_w1 = Tensor<S>({std::size_t(cfg.d_vis), std::size_t(cfg.d_sem)});
  w.proj_w2 = Tensor<S>({std::size_t(cfg.d_sem), std::size_t(cfg.d_sem)});
  for (int i = 0; i < cfg.d_sem; ++i) {
    w.proj_w1(i, i) = S(1);
    w.proj_w2(i, i) = S(1);
  }
  w.proj_b1 = Tensor<S>({std::size_t(cfg.d_sem)});
  w.proj_b2 = Tensor<S>({std::size_t(cfg.d_sem)});
}

// ---- recorded forward --------------------------------------------------------

template <typename S>
struct PipelineNodes {
  typename Tape<S>::NodeId enc_w, enc_b;
  StackNodes<S> ste_before, ste_after;
  typename Tape<S>::NodeId proj_w1, proj_b1, proj_w2, proj_b2;
  typename Tape<S>::NodeId embed, ctx_w, out_w, out_b;
};

template <typename S>
PipelineNodes<S> register_pipeline(Tape<S>& tape, const PipelineWeights<S>& w) {
  PipelineNodes<S> n;
  n.enc_w = tape.leaf(w.enc_w);
  n.enc_b = tape.leaf(w.enc_b);
  n.ste_before = register_stack_weights(tape, w.ste_before);
  n.proj_w1 = tape.leaf(w.proj_w1);
  n.proj_b1 = tape.leaf(w.proj_b1);
  n.proj_w2 = tape.leaf(w.proj_w2);
  n.proj_b2 = tape.leaf(w.proj_b2);
  n.ste_after = register_stack_weights(tape, w.ste_after);
  n.embed = tape.leaf(w.embed);
  n.ctx_w = tape.leaf(w.ctx_w);
  n.out_w = tape.leaf(w.out_w);
  n.out_b = tape.leaf(w.out_b);
  return n;
}

/// Leaf node ids in the same order as param_refs().
template <typename S>
std::vector<typename Tape<S>::NodeId> pipeline_leaf_ids(
    const PipelineNodes<S>& n) {
  std::vector<typename Tape<S>::NodeId> ids{n.enc_w, n.enc_b};
  for (const auto& [k, b] : n.ste_before.weights) {
    ids.push_back(k);
    ids.push_back(b);
  }
  ids.insert(ids.end(), {n.proj_w1, n.proj_b1, n.proj_w2, n.proj_b2});
  for (const auto& [k, b] : n.ste_after.weights) {
    ids.push_back(k);
    ids.push_back(b);
  }
  ids.insert(ids.end(), {n.embed, n.ctx_w, n.out_w, n.out_b});
  return ids;
}

namespace detail {

/// Per-frame-per-patch affine map along the last axis: (t,p,a) -> (t,p,b).
template <typename S>
typename Tape<S>::NodeId rowwise_affine(Tape<S>& tape,
                                        typename Tape<S>::NodeId z,
                                        typename Tape<S>::NodeId w,
                                        typename Tape<S>::NodeId b) {
  const Shape& sh = tape.value(z).shape();
  const std::size_t t = sh[0], p = sh[1];
  const std::size_t cols = tape.value(w).extent(1);
  const auto flat = tape.reshape(z, {t * p, sh[2]});
  const auto out = tape.add_rows(tape.matmul(flat, w), b);
  return tape.reshape(out, {t, p, cols});
}

}  // namespace detail

template <typename S>
typename Tape<S>::NodeId encode_frames_node(Tape<S>& tape,
                                            typename Tape<S>::NodeId raw,
                                            const PipelineNodes<S>& n) {
  return detail::rowwise_affine(tape, raw, n.enc_w, n.enc_b);
}

template <typename S>
typename Tape<S>::NodeId project_node(Tape<S>& tape,
                                      typename Tape<S>::NodeId z,
                                      const PipelineNodes<S>& n,
                                      Activation act) {
  auto hidden = detail::rowwise_affine(tape, z, n.proj_w1, n.proj_b1);
  if (act == Activation::tanh) hidden = tape.tanh(hidden);
  return detail::rowwise_affine(tape, hidden, n.proj_w2, n.proj_b2);
}

/// Causal log-probability of the answer tokens: the visual context is the
/// (order-invariant) mean over frames and patches, each position conditions
/// on the question embedding and the mean of the answer prefix embeddings.
template <typename S>
typename Tape<S>::NodeId score_answer_node(Tape<S>& tape,
                                           typename Tape<S>::NodeId h,
                                           int question,
                                           const std::vector<int>& answer,
                                           const PipelineNodes<S>& n) {
  using NodeId = typename Tape<S>::NodeId;
  const int vocab = int(tape.value(n.embed).extent(0));
  const auto check_token = [vocab](int tok, const char* what) {
    if (tok < 0 || tok >= vocab)
      throw contract_error(std::string("score_answer: ") + what + " " +
                           std::to_string(tok) +
                           " outside vocabulary of size " +
                           std::to_string(vocab));
  };
  check_token(question, "question id");
  if (answer.empty())
    throw contract_error("score_answer: answer must have at least one token");
  for (int tok : answer) check_token(tok, "token");

  const Shape& sh = tape.value(h).shape();
  const NodeId ctx =
      tape.mean_rows(tape.reshape(h, {sh[0] * sh[1], sh[2]}));
  const NodeId vis = tape.matmul(ctx, n.ctx_w);            // (1 x d_sem)
  const NodeId q_emb = tape.slice(n.embed, 0, std::size_t(question), 1);
  const NodeId base = tape.add(vis, q_emb);

  NodeId total{};
  bool first = true;
  for (std::size_t i = 0; i < answer.size(); ++i) {
    NodeId state = base;
    if (i > 0) {
      std::vector<NodeId> prefix_rows;
      prefix_rows.reserve(i);
      for (std::size_t j = 0; j < i; ++j)
        prefix_rows.push_back(
            tape.slice(n.embed, 0, std::size_t(answer[j]), 1));
      state = tape.add(state, tape.mean_rows(tape.concat(prefix_rows, 0)));
    }
    state = tape.tanh(state);
    const NodeId logits = tape.add_rows(tape.matmul(state, n.out_w), n.out_b);
    const NodeId term =
        tape.pick(tape.log_softmax(logits), std::size_t(answer[i]));
    total = first ? term : tape.add(total, term);
    first = false;
  }
  return total;
}

struct ForwardStats {
  std::size_t frames_into_projector = 0;
  std::size_t frames_into_scorer = 0;
};

/// Negative log-likelihood of one sample, recorded end to end.
template <typename S>
typename Tape<S>::NodeId pipeline_loss_node(Tape<S>& tape,
                                            const PipelineNodes<S>& n,
                                            const PipelineConfig& cfg,
                                            const ToyBatch<S>& batch,
                                            ForwardStats* stats = nullptr) {
  validate_config(cfg);
  if (batch.frames.rank() != 3 ||
      batch.frames.extent(1) != std::size_t(cfg.p) ||
      batch.frames.extent(2) != std::size_t(cfg.d_raw))
    throw dim_error("pipeline: raw frames " + shape_str(batch.frames.shape()) +
                    " do not match config (p=" + std::to_string(cfg.p) +
                    ", d_raw=" + std::to_string(cfg.d_raw) + ")");

  auto z = encode_frames_node(tape, tape.leaf(batch.frames), n);
  if (cfg.stack_before())
    z = stack_forward_node(tape, z, *cfg.stack, n.ste_before);
  if (stats) stats->frames_into_projector = tape.value(z).extent(0);

  auto h = project_node(tape, z, n, cfg.projector_activation);
  if (cfg.stack_after()) {
    StackSpec after = *cfg.stack;  // same structure, semantic-space weights
    h = stack_forward_node(tape, h, after, n.ste_after);
  }
  if (stats) stats->frames_into_scorer = tape.value(h).extent(0);

  const auto logp = score_answer_node(tape, h, batch.question, batch.answer, n);
  return tape.scale(logp, S(-1));
}

// ---- immediate wrappers --------------------------------------------------------

/// Stub vision encoder as a standalone map: a seeded random linear layer with
/// zero bias, identical to what init_pipeline_weights(seed) gives the
/// pipeline's encoder component.
template <typename S>
FrameEmbeddings<S> encode_frames(const Tensor<S>& raw, int d_vis,
                                 std::uint64_t seed) {
  if (raw.rank() != 3)
    throw dim_error("encode_frames: raw frames must be rank-3 (t x p x d_raw)");
  Rng enc = Rng(seed).fork(detail::kEncoderStream);
  const Tensor<S> w =
      detail::uniform_fan_in<S>(enc, raw.extent(2), std::size_t(d_vis));
  const Tensor<S> b({std::size_t(d_vis)});
  const std::size_t t = raw.extent(0), p = raw.extent(1);
  const auto flat = reshape(raw, {t * p, raw.extent(2)});
  return FrameEmbeddings<S>(
      reshape(add_rows(matmul(flat, w), b), {t, p, std::size_t(d_vis)}));
}

template <typename S>
FrameEmbeddings<S> project(const FrameEmbeddings<S>& z,
                           const PipelineWeights<S>& w, Activation act) {
  if (z.width() != w.proj_w1.extent(0))
    throw dim_error("project: width " + std::to_string(z.width()) +
                    " does not match projector input " +
                    std::to_string(w.proj_w1.extent(0)));
  Tape<S> tape;
  PipelineNodes<S> n{};
  n.proj_w1 = tape.leaf(w.proj_w1);
  n.proj_b1 = tape.leaf(w.proj_b1);
  n.proj_w2 = tape.leaf(w.proj_w2);
  n.proj_b2 = tape.leaf(w.proj_b2);
  const auto out = project_node(tape, tape.leaf(z.data), n, act);
  return FrameEmbeddings<S>(tape.value(out));
}

template <typename S>
double score_answer(const FrameEmbeddings<S>& h, int question,
                    const std::vector<int>& answer,
                    const PipelineWeights<S>& w) {
  Tape<S> tape;
  PipelineNodes<S> n{};
  n.embed = tape.leaf(w.embed);
  n.ctx_w = tape.leaf(w.ctx_w);
  n.out_w = tape.leaf(w.out_w);
  n.out_b = tape.leaf(w.out_b);
  return double(
      tape.value(score_answer_node(tape, tape.leaf(h.data), question, answer, n))
          [0]);
}

/// log p(next | prefix): one causal step, computed directly (not by
/// differencing score_answer calls) so factorization checks are meaningful.
template <typename S>
double score_step(const FrameEmbeddings<S>& h, int question,
                  const std::vector<int>& prefix, int next,
                  const PipelineWeights<S>& w) {
  const int vocab = int(w.embed.extent(0));
  if (next < 0 || next >= vocab)
    throw contract_error("score_step: token " + std::to_string(next) +
                         " outside vocabulary of size " +
                         std::to_string(vocab));
  const std::size_t rows = h.frames() * h.patches();
  const Tensor<S> ctx = mean_rows(reshape(h.data, {rows, h.width()}));
  Tensor<S> state =
      add(matmul(ctx, w.ctx_w), slice(w.embed, 0, std::size_t(question), 1));
  if (!prefix.empty()) {
    std::vector<Tensor<S>> rows_e;
    for (int tok : prefix)
      rows_e.push_back(slice(w.embed, 0, std::size_t(tok), 1));
    state = add(state, mean_rows(concat(rows_e, 0)));
  }
  state = tanh_elem(state);
  const Tensor<S> logits = add_rows(matmul(state, w.out_w), w.out_b);
  return double(log_softmax(logits)[std::size_t(next)]);
}

template <typename S>
double pipeline_forward(const ToyBatch<S>& batch, const PipelineConfig& cfg,
                        const PipelineWeights<S>& w,
                        ForwardStats* stats = nullptr) {
  Tape<S> tape;
  const auto nodes = register_pipeline(tape, w);
  const auto loss = pipeline_loss_node(tape, nodes, cfg, batch, stats);
  return double(tape.value(loss)[0]);
}

}  // namespace stekit
