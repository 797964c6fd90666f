#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "stekit/pipeline.hpp"
#include "stekit/rng.hpp"

namespace stekit {

enum class TaskKind { order_discrimination, motion_direction };

inline const char* task_name(TaskKind k) {
  return k == TaskKind::order_discrimination ? "order" : "motion";
}

/// Two-class temporal tasks built so the classes differ only in frame order:
/// class 1 samples are class 0 samples reversed, which pins the per-frame
/// statistics (and for `order`, the frame multiset) to be identical across
/// classes.
struct SyntheticTask {
  TaskKind kind = TaskKind::order_discrimination;
  int t = 8;
  int p = 4;
  int d_raw = 8;
  int classes = 2;
  std::uint64_t seed = 0;
};

namespace detail {

template <typename S>
Tensor<S> reverse_frames_tensor(const Tensor<S>& z) {
  std::vector<Tensor<S>> rows;
  rows.reserve(z.extent(0));
  for (std::size_t f = z.extent(0); f-- > 0;)
    rows.push_back(slice(z, 0, f, 1));
  return concat(rows, 0);
}

template <typename S>
Tensor<S> order_sample(const SyntheticTask& task, Rng& rng) {
  const std::size_t t = task.t, p = task.p, d = task.d_raw;
  Tensor<S> frames = rng.uniform_tensor<S>({t, p, d}, -0.25, 0.25);
  for (std::size_t f = 0; f < t; ++f) {
    // intensity rises with time; reversal flips it, per-frame stats don't move
    const double ramp =
        t > 1 ? 3.0 * (double(f) / double(t - 1) - 0.5) : 0.0;
    for (std::size_t q = 0; q < p; ++q)
      for (std::size_t j = 0; j < d; ++j) frames(f, q, j) += S(ramp);
  }
  return frames;
}

template <typename S>
Tensor<S> motion_sample(const SyntheticTask& task, Rng& rng) {
  const std::size_t t = task.t, p = task.p, d = task.d_raw;
  const std::size_t start = rng.uniform_index(p);
  std::vector<S> dim_scale(d);
  for (std::size_t j = 0; j < d; ++j) dim_scale[j] = S(rng.uniform(0.5, 1.5));
  Tensor<S> frames = rng.uniform_tensor<S>({t, p, d}, -0.05, 0.05);
  for (std::size_t f = 0; f < t; ++f) {
    const std::size_t center = (start + f) % p;  // pattern drifts rightward
    for (std::size_t q = 0; q < p; ++q) {
      const std::size_t raw = q > center ? q - center : center - q;
      const std::size_t dist = std::min(raw, p - raw);
      const double bump = std::max(0.0, 1.0 - double(dist) / 2.0);
      for (std::size_t j = 0; j < d; ++j)
        frames(f, q, j) += S(bump) * dim_scale[j];
    }
  }
  return frames;
}

}  // namespace detail

/// Balanced, deterministic samples. Emitted in (forward, reversed) pairs so a
/// reversal-invariant model scores exactly 50% on an even count. The question
/// id names the task; the answer token is the class.
template <typename S>
std::vector<ToyBatch<S>> generate(const SyntheticTask& task,
                                  std::size_t count) {
  if (count < 1) throw contract_error("generate: count must be >= 1");
  const int question = task.kind == TaskKind::order_discrimination ? 0 : 1;
  const Rng root(task.seed);
  std::vector<ToyBatch<S>> out;
  out.reserve(count);
  for (std::size_t pair = 0; out.size() < count; ++pair) {
    Rng rng = root.fork(pair);
    Tensor<S> fwd = task.kind == TaskKind::order_discrimination
                        ? detail::order_sample<S>(task, rng)
                        : detail::motion_sample<S>(task, rng);
    out.push_back(ToyBatch<S>{fwd, question, {0}});
    if (out.size() < count)
      out.push_back(ToyBatch<S>{detail::reverse_frames_tensor(fwd), question,
                                {1}});
  }
  return out;
}

// ---- two-stage schedule --------------------------------------------------------

enum class Stage { pretrain, sft };

inline const char* stage_name(Stage s) {
  return s == Stage::pretrain ? "pretrain" : "sft";
}

/// Per-group learning rates for one stage. In pretrain only the temporal
/// encoder receives updates; every other group's gradients are discarded.
struct StageConfig {
  Stage stage = Stage::pretrain;
  double lr_ste = 1e-3;
  double lr_encoder = 0.0;
  double lr_projector = 0.0;
  double lr_scorer = 0.0;
  std::size_t steps = 0;  // 0 -> one epoch over the data
  std::size_t batch_size = 2;
  std::uint64_t seed = 0;

  static StageConfig pretrain_defaults() {
    StageConfig c;
    c.stage = Stage::pretrain;
    c.lr_ste = 1e-3;
    return c;
  }

  static StageConfig sft_defaults() {
    StageConfig c;
    c.stage = Stage::sft;
    c.lr_ste = 1e-5;
    c.lr_encoder = 2e-6;
    c.lr_projector = 1e-5;
    c.lr_scorer = 1e-5;
    return c;
  }
};

inline void validate_stage(const StageConfig& c) {
  if (c.lr_ste < 0 || c.lr_encoder < 0 || c.lr_projector < 0 ||
      c.lr_scorer < 0)
    throw contract_error("stage config: learning rates must be >= 0");
  if (c.batch_size < 1)
    throw contract_error("stage config: batch size must be >= 1");
  if (c.stage == Stage::sft) {
    const double others =
        std::min({c.lr_ste, c.lr_projector, c.lr_scorer});
    if (c.lr_encoder > others)
      throw contract_error(
          "stage config: sft requires the encoder rate to not exceed the "
          "other component rates");
  }
}

inline bool group_updated(const StageConfig& c, ParamGroup g) {
  if (c.stage == Stage::pretrain) return g == ParamGroup::ste;
  return true;
}

inline double group_rate(const StageConfig& c, ParamGroup g) {
  switch (g) {
    case ParamGroup::encoder: return c.lr_encoder;
    case ParamGroup::ste: return c.lr_ste;
    case ParamGroup::projector: return c.lr_projector;
    case ParamGroup::scorer: return c.lr_scorer;
  }
  return 0.0;
}

struct LossPoint {
  std::size_t step = 0;  // 1-based within the stage
  double loss = 0.0;
  Stage stage = Stage::pretrain;
};

struct TrainResult {
  std::vector<LossPoint> trace;
  double final_loss = 0.0;
};

namespace detail {

template <typename S>
struct AdamSlot {
  Tensor<S> m, v;
};

}  // namespace detail

/// Adaptive-moment steps over shuffled epochs of `data`. Frozen groups are
/// untouched down to the bit; a non-finite loss or parameter aborts with the
/// step index and tensor name.
template <typename S>
TrainResult train_stage(const StageConfig& cfg, const PipelineConfig& pcfg,
                        PipelineWeights<S>& weights,
                        const std::vector<ToyBatch<S>>& data) {
  validate_stage(cfg);
  validate_config(pcfg);
  if (data.empty()) throw contract_error("train_stage: no training data");

  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  std::map<std::string, detail::AdamSlot<S>> slots;

  const std::size_t epoch_steps =
      (data.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = cfg.steps ? cfg.steps : epoch_steps;

  const Rng shuffle_root(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::size_t pos = order.size();  // forces a shuffle before the first step
  std::size_t epoch = 0;

  TrainResult result;
  result.trace.reserve(total_steps);

  for (std::size_t step = 1; step <= total_steps; ++step) {
    Tape<S> tape;
    const PipelineNodes<S> nodes = register_pipeline(tape, weights);

    typename Tape<S>::NodeId total{};
    std::size_t in_batch = 0;
    for (; in_batch < cfg.batch_size; ++in_batch) {
      if (pos == order.size()) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng r = shuffle_root.fork(epoch++);
        for (std::size_t i = order.size(); i-- > 1;)
          std::swap(order[i], order[r.uniform_index(i + 1)]);
        pos = 0;
      }
      const auto loss =
          pipeline_loss_node(tape, nodes, pcfg, data[order[pos++]]);
      total = in_batch == 0 ? loss : tape.add(total, loss);
    }
    const auto mean_loss = tape.scale(total, S(1) / S(in_batch));
    const double loss_value = double(tape.value(mean_loss)[0]);
    if (!std::isfinite(loss_value))
      throw numeric_error("train_stage: non-finite loss at step " +
                          std::to_string(step) + " (stage " +
                          stage_name(cfg.stage) + ")");
    result.trace.push_back({step, loss_value, cfg.stage});

    tape.backward(mean_loss);

    auto refs = param_refs(weights);
    const auto leaf_ids = pipeline_leaf_ids(nodes);
    const double t = double(step);
    for (std::size_t i = 0; i < refs.size(); ++i) {
      const auto& [group, name, tensor] = refs[i];
      if (!group_updated(cfg, group)) continue;
      const double lr = group_rate(cfg, group);
      if (lr == 0.0) continue;
      const Tensor<S> g = tape.grad(leaf_ids[i]);
      detail::AdamSlot<S>& slot = slots[name];
      if (slot.m.size() == 0) {
        slot.m = Tensor<S>(tensor->shape());
        slot.v = Tensor<S>(tensor->shape());
      }
      const S c1 = S(1.0 - std::pow(kBeta1, t));
      const S c2 = S(1.0 - std::pow(kBeta2, t));
      for (std::size_t e = 0; e < g.size(); ++e) {
        slot.m[e] = S(kBeta1) * slot.m[e] + S(1 - kBeta1) * g[e];
        slot.v[e] = S(kBeta2) * slot.v[e] + S(1 - kBeta2) * g[e] * g[e];
        const S mhat = slot.m[e] / c1;
        const S vhat = slot.v[e] / c2;
        (*tensor)[e] -= S(lr) * mhat / (std::sqrt(vhat) + S(kEps));
      }
      if (!tensor->all_finite())
        throw numeric_error("train_stage: non-finite values in " + name +
                            " after step " + std::to_string(step));
    }
  }
  result.final_loss = result.trace.empty() ? 0.0 : result.trace.back().loss;
  return result;
}

// ---- evaluation ------------------------------------------------------------------

struct EvalResult {
  double accuracy = 0.0;
  double mean_loglik = 0.0;
};

/// Argmax over class-token answers, ties to the lowest token. mean_loglik is
/// the mean log-probability of the true answers.
template <typename S>
EvalResult evaluate(const PipelineConfig& cfg, const PipelineWeights<S>& w,
                    const std::vector<ToyBatch<S>>& data, int classes = 2) {
  if (data.empty()) throw contract_error("evaluate: no data");
  std::size_t correct = 0;
  double loglik = 0.0;
  for (const ToyBatch<S>& sample : data) {
    int best = 0;
    double best_score = 0.0;
    for (int c = 0; c < classes; ++c) {
      ToyBatch<S> candidate{sample.frames, sample.question, {c}};
      const double score = -pipeline_forward(candidate, cfg, w);
      if (c == 0 || score > best_score) {
        best = c;
        best_score = score;
      }
    }
    if (best == sample.answer.front()) ++correct;
    loglik -= pipeline_forward(sample, cfg, w);
  }
  return {double(correct) / double(data.size()),
          loglik / double(data.size())};
}

/// CSV with one row per optimizer step across the given stages.
inline std::string trace_csv(const std::vector<TrainResult>& stages) {
  std::string out = "step,loss,stage\n";
  char buf[64];
  for (const TrainResult& r : stages)
    for (const LossPoint& p : r.trace) {
      std::snprintf(buf, sizeof buf, "%zu,%.17g,%s\n", p.step, p.loss,
                    stage_name(p.stage));
      out += buf;
    }
  return out;
}

}  // namespace stekit
