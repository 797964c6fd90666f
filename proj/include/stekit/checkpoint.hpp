#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "stekit/pipeline.hpp"
#include "stekit/serialize.hpp"
#include "stekit/spec_string.hpp"

namespace stekit {

/// Encoder-only checkpoint: one (kernel, bias) entry pair per layer, headed
/// by the stack notation.
template <typename S>
Checkpoint stack_to_checkpoint(const StackSpec& stack,
                               const std::vector<LayerWeights<S>>& ws) {
  Checkpoint ckpt;
  ckpt.spec = format_stack(stack);
  for (std::size_t l = 0; l < ws.size(); ++l) {
    ckpt.entries.emplace_back("ste." + std::to_string(l) + ".kernel",
                              ws[l].kernel);
    ckpt.entries.emplace_back("ste." + std::to_string(l) + ".bias",
                              ws[l].bias);
  }
  return ckpt;
}

template <typename S>
std::vector<LayerWeights<S>> stack_from_checkpoint(const Checkpoint& ckpt,
                                                   const StackSpec& stack,
                                                   int d) {
  std::vector<LayerWeights<S>> ws;
  for (std::size_t l = 0; l < stack.layers.size(); ++l) {
    LayerWeights<S> w{
        checkpoint_tensor<S>(ckpt, "ste." + std::to_string(l) + ".kernel"),
        checkpoint_tensor<S>(ckpt, "ste." + std::to_string(l) + ".bias")};
    const LayerSpec& spec = stack.layers[l];
    require_valid(spec, d);
    const Shape want{std::size_t(spec.channels(d)),
                     std::size_t(spec.t_w) * std::size_t(d)};
    if (w.kernel.shape() != want)
      throw io_error("checkpoint layer " + std::to_string(l) + " kernel " +
                     shape_str(w.kernel.shape()) + " does not match " +
                     shape_str(want) + " required by " +
                     format_stack(StackSpec{{spec}}) + " at width " +
                     std::to_string(d));
    ws.push_back(std::move(w));
  }
  return ws;
}

template <typename S>
Checkpoint pipeline_to_checkpoint(const PipelineConfig& cfg,
                                  PipelineWeights<S>& w) {
  Checkpoint ckpt;
  ckpt.spec = cfg.stack ? format_stack(*cfg.stack) : "-";
  ckpt.meta = {
      {"d_raw", std::to_string(cfg.d_raw)},
      {"d_vis", std::to_string(cfg.d_vis)},
      {"d_sem", std::to_string(cfg.d_sem)},
      {"p", std::to_string(cfg.p)},
      {"vocab", std::to_string(cfg.vocab)},
      {"activation",
       cfg.projector_activation == Activation::tanh ? "tanh" : "none"},
      {"seed", std::to_string(cfg.seed)},
  };
  for (const auto& [group, name, tensor] : param_refs(w))
    ckpt.entries.emplace_back(name, *tensor);
  return ckpt;
}

/// Rebuild config and weights from a pipeline checkpoint's meta and entries.
template <typename S>
PipelineWeights<S> pipeline_from_checkpoint(const Checkpoint& ckpt,
                                            PipelineConfig& cfg_out) {
  cfg_out.d_raw = std::stoi(ckpt.meta_value("d_raw", "8"));
  cfg_out.d_vis = std::stoi(ckpt.meta_value("d_vis", "16"));
  cfg_out.d_sem = std::stoi(ckpt.meta_value("d_sem", "16"));
  cfg_out.p = std::stoi(ckpt.meta_value("p", "4"));
  cfg_out.vocab = std::stoi(ckpt.meta_value("vocab", "8"));
  cfg_out.projector_activation =
      ckpt.meta_value("activation", "tanh") == "none" ? Activation::none
                                                      : Activation::tanh;
  cfg_out.seed = std::stoull(ckpt.meta_value("seed", "0"));
  cfg_out.stack = ckpt.spec == "-"
                      ? std::optional<StackSpec>{}
                      : std::optional<StackSpec>{parse_stack(ckpt.spec)};

  PipelineWeights<S> w = init_pipeline_weights<S>(cfg_out);
  for (const auto& [group, name, tensor] : param_refs(w))
    *tensor = checkpoint_tensor<S>(ckpt, name);
  return w;
}

inline std::string checkpoint_bytes(const Checkpoint& ckpt) {
  std::ostringstream os(std::ios::binary);
  write_checkpoint(os, ckpt);
  return os.str();
}

/// Serialized bytes of one parameter group; hashed to record freeze integrity.
template <typename S>
std::string group_bytes(PipelineWeights<S>& w, ParamGroup group) {
  std::ostringstream os(std::ios::binary);
  for (const auto& [g, name, tensor] : param_refs(w))
    if (g == group) {
      os << name << "\n";
      write_tensor(os, *tensor);
    }
  return os.str();
}

template <typename S>
std::uint64_t non_ste_hash(PipelineWeights<S>& w) {
  return fnv1a64(group_bytes(w, ParamGroup::encoder) +
                 group_bytes(w, ParamGroup::projector) +
                 group_bytes(w, ParamGroup::scorer));
}

}  // namespace stekit
