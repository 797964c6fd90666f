#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "stekit/checkpoint.hpp"
#include "stekit/pipeline.hpp"
#include "stekit/planner.hpp"
#include "stekit/reference.hpp"
#include "stekit/rng.hpp"
#include "stekit/spec_string.hpp"
#include "stekit/training.hpp"

namespace stekit {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct SuiteResult {
  std::string suite;
  std::vector<CheckResult> checks;

  bool pass() const {
    for (const CheckResult& c : checks)
      if (!c.pass) return false;
    return true;
  }
  std::size_t passed() const {
    std::size_t n = 0;
    for (const CheckResult& c : checks) n += c.pass;
    return n;
  }
};

namespace verify_detail {

inline std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// ---- params: published trainable-parameter column ---------------------------

inline SuiteResult params_suite() {
  SuiteResult out{"params", {}};
  struct Row {
    const char* spec;
    int d;
    double published_millions;
  };
  // five ladder rows at the visual width, plus the semantic-space figure
  const Row rows[] = {
      {"(2:2)", 1152, 2.65},
      {"(2:1)", 1152, 1.33},
      {"(2:1)-(2:1)", 1152, 2.65},
      {"(2:1)-(2:1)-(2:1)", 1152, 3.98},
      {"(2:1)-(2:1)-(2:1)-(2:1)", 1152, 5.31},
      {"(2:2)", 3584, 25.69},
  };
  for (const Row& row : rows) {
    const long long exact = param_count(parse_stack(row.spec), row.d).total;
    const double rel =
        std::abs(row.published_millions * 1e6 - double(exact)) / double(exact);
    out.checks.push_back(
        {std::string("params.") + row.spec + "@d=" + std::to_string(row.d),
         rel <= 0.005,
         "published " + fmt(row.published_millions) + "M vs exact " +
             std::to_string(exact) + " (rel " + fmt(rel) + ")"});
  }
  const double ratio =
      double(param_count(parse_stack("(2:2)"), 3584).total) /
      double(param_count(parse_stack("(2:2)"), 1152).total);
  out.checks.push_back({"params.placement_ratio",
                        ratio >= 9.6 && ratio <= 9.8,
                        "semantic/visual = " + fmt(ratio) +
                            ", expected within [9.6, 9.8]"});
  return out;
}

// ---- ladder: reduction percentages and padding ------------------------------

inline SuiteResult ladder_suite() {
  SuiteResult out{"ladder", {}};
  const struct {
    const char* spec;
    double fraction;
  } rows[] = {
      {"(4:3)", 0.25},          {"(4:3)-(4:3)", 0.4375},
      {"(2:1)", 0.50},          {"(2:1)-(2:1)", 0.75},
      {"(2:1)-(2:1)-(2:1)", 0.875},
      {"(2:1)-(2:1)-(2:1)-(2:1)", 0.9375},
  };
  for (const auto& row : rows) {
    const auto p = plan(kReferenceFrames, 1, 1152, parse_stack(row.spec));
    out.checks.push_back(
        {std::string("ladder.") + row.spec,
         p.compression_fraction == row.fraction,
         "reduction " + fmt(100 * p.compression_fraction) + "% vs " +
             fmt(100 * row.fraction) + "%, " +
             std::to_string(p.final_frames) + " frames"});
  }
  const std::size_t k31 = pad_amount(31, 2);
  out.checks.push_back({"ladder.pad_31_frames", k31 == 1,
                        "k = " + std::to_string(k31) + ", expected 1"});
  const std::size_t k32 = pad_amount(32, 2);
  out.checks.push_back({"ladder.pad_32_frames", k32 == 0,
                        "k = " + std::to_string(k32) + ", expected 0"});
  bool all_parse = true;
  for (const char* s :
       {"(2:2)", "(2:2)-(2:2)", "(2:2)-(2:2)-(2:2)", "(4:3)", "(4:3)-(4:3)",
        "(2:1)", "(2:1)-(2:1)", "(2:1)-(2:1)-(2:1)", "(2:1)-(2:1)-(2:1)-(2:1)"})
    try {
      if (format_stack(parse_stack(s)) != s) all_parse = false;
    } catch (const parse_error&) {
      all_parse = false;
    }
  out.checks.push_back({"ladder.notation_total", all_parse,
                        "all published stack strings parse and round-trip"});
  return out;
}

// ---- oracle: taped forward vs the naive reference ----------------------------

inline SuiteResult oracle_suite() {
  SuiteResult out{"oracle", {}};
  Rng rng(0xACE5);
  const LayerSpec specs[] = {{2, 2, 2, 1}, {2, 1, 2, 1}, {4, 3, 2, 1}};
  double worst = 0.0;
  int failures = 0;
  for (int inst = 0; inst < 50; ++inst) {
    const LayerSpec spec = specs[rng.uniform_index(3)];
    const std::size_t t = 1 + rng.uniform_index(64);
    const std::size_t p = 1 + rng.uniform_index(8);
    // keep c integral: even widths cover (2:1); (4:3) needs multiples of 4
    std::size_t d = spec.t_u == 4 ? 4 * (1 + rng.uniform_index(4))
                                  : 2 * (1 + rng.uniform_index(8));
    Rng wrng(inst);
    const auto w =
        init_weights<double>(spec, int(d), InitMode::scaled_uniform, wrng);
    const FrameEmbeddings<double> z(
        rng.uniform_tensor<double>({t, p, d}, -1, 1));
    const auto fast = layer_forward(z, spec, w);
    const auto naive =
        reference::layer_forward_naive(z.data, spec, w.kernel, w.bias);
    const double err = max_abs_diff(fast.data, naive);
    worst = std::max(worst, err);
    if (err > 1e-12) ++failures;
  }
  out.checks.push_back({"oracle.layer_forward_50_instances", failures == 0,
                        "max abs err " + fmt(worst) + " over 50 instances, "
                        "tolerance 1e-12"});
  return out;
}

// ---- identity: exact pass-through and unit locality ---------------------------

inline SuiteResult identity_suite() {
  SuiteResult out{"identity", {}};
  Rng rng(0x1DE0);
  double worst = 0.0;
  for (int depth = 1; depth <= 3; ++depth) {
    StackSpec stack;
    for (int i = 0; i < depth; ++i) stack.layers.push_back({2, 2, 2, 1});
    Rng wrng(depth);
    const auto ws = init_stack_weights<double>(
        stack, 6, InitMode::identity_preserving, wrng);
    const FrameEmbeddings<double> z(
        rng.uniform_tensor<double>({8, 3, 6}, -1, 1));
    worst = std::max(worst,
                     max_abs_diff(stack_forward(z, stack, ws).data, z.data));
  }
  out.checks.push_back({"identity.stacks_1_to_3", worst == 0.0,
                        "max abs deviation " + fmt(worst)});

  const LayerSpec spec{4, 3, 2, 1};
  bool local = true;
  for (int inst = 0; inst < 20; ++inst) {
    const std::size_t units = 2 + rng.uniform_index(4);
    Rng wrng(inst);
    const auto w = init_weights<double>(spec, 4, InitMode::scaled_uniform,
                                        wrng);
    const FrameEmbeddings<double> z(
        rng.uniform_tensor<double>({units * 4, 2, 4}, -1, 1));
    FrameEmbeddings<double> bumped = z;
    const std::size_t j = rng.uniform_index(units);
    bumped.data(j * 4 + rng.uniform_index(4), rng.uniform_index(2),
                rng.uniform_index(4)) += 1.0;
    const auto a = layer_forward(z, spec, w);
    const auto b = layer_forward(bumped, spec, w);
    for (std::size_t u = 0; u < units; ++u) {
      const double diff = max_abs_diff(slice(a.data, 0, u * 3, 3),
                                       slice(b.data, 0, u * 3, 3));
      if (u == j ? diff == 0.0 : diff != 0.0) local = false;
    }
  }
  out.checks.push_back({"identity.unit_locality_20_instances", local,
                        local ? "perturbations stay inside their unit"
                              : "a perturbation leaked across units"});
  return out;
}

// ---- grad: finite differences over every insertion configuration --------------

inline SuiteResult grad_suite() {
  SuiteResult out{"grad", {}};
  double worst = 0.0;

  // temporal-encoder stack in isolation
  {
    StackSpec stack;
    stack.layers = {{2, 1, 2, 1}, {2, 1, 2, 1}};
    Rng wrng(1);
    auto ws =
        init_stack_weights<double>(stack, 4, InitMode::scaled_uniform, wrng);
    Rng rng(2);
    const FrameEmbeddings<double> z(
        rng.uniform_tensor<double>({6, 2, 4}, -1, 1));

    Tape<double> tape;
    const auto nodes = register_stack_weights(tape, ws);
    const auto zn = tape.leaf(z.data);
    tape.backward(tape.sum(tape.tanh(
        stack_forward_node(tape, zn, stack, nodes))));

    const auto loss_of = [&](const std::vector<LayerWeights<double>>& probe,
                             const Tensor<double>& zt) {
      return sum(tanh_elem(
          stack_forward(FrameEmbeddings<double>(zt), stack, probe).data));
    };
    for (std::size_t l = 0; l < ws.size(); ++l) {
      const auto nk = finite_diff(
          [&](const Tensor<double>& probe) {
            auto tmp = ws;
            tmp[l].kernel = probe;
            return loss_of(tmp, z.data);
          },
          ws[l].kernel, 1e-5);
      worst = std::max(worst, max_rel_err(tape.grad(nodes.weights[l].first),
                                          nk));
      const auto nb = finite_diff(
          [&](const Tensor<double>& probe) {
            auto tmp = ws;
            tmp[l].bias = probe;
            return loss_of(tmp, z.data);
          },
          ws[l].bias, 1e-5);
      worst = std::max(worst, max_rel_err(tape.grad(nodes.weights[l].second),
                                          nb));
    }
    const auto nz = finite_diff(
        [&](const Tensor<double>& probe) { return loss_of(ws, probe); },
        z.data, 1e-5);
    worst = std::max(worst, max_rel_err(tape.grad(zn), nz));
  }

  // full pipeline, every placement
  for (const char* spec : {"(2:1)", "(2:1)@after", "(2:1)@both"}) {
    PipelineConfig cfg;
    cfg.d_raw = 3;
    cfg.d_vis = 6;
    cfg.d_sem = 8;
    cfg.p = 2;
    cfg.vocab = 5;
    cfg.seed = 31;
    cfg.stack = parse_stack(spec);
    auto w = init_pipeline_weights<double>(cfg);
    Rng rng(32);
    const ToyBatch<double> batch{
        rng.uniform_tensor<double>({4, 2, 3}, -1, 1), 1, {0, 2}};

    Tape<double> tape;
    const auto nodes = register_pipeline(tape, w);
    tape.backward(pipeline_loss_node(tape, nodes, cfg, batch));
    const auto refs = param_refs(w);
    const auto ids = pipeline_leaf_ids(nodes);
    for (std::size_t i = 0; i < refs.size(); ++i) {
      Tensor<double>* tensor = std::get<2>(refs[i]);
      const Tensor<double> original = *tensor;
      const auto numeric = finite_diff(
          [&](const Tensor<double>& probe) {
            *tensor = probe;
            return pipeline_forward(batch, cfg, w);
          },
          original, 1e-5);
      *tensor = original;
      worst = std::max(worst, max_rel_err(tape.grad(ids[i]), numeric));
    }
  }

  out.checks.push_back({"grad.all_insertions_all_tensors", worst <= 1e-6,
                        "max rel err " + fmt(worst) + ", tolerance 1e-6"});
  return out;
}

// ---- determinism ------------------------------------------------------------

inline SuiteResult determinism_suite() {
  SuiteResult out{"determinism", {}};
  {
    Rng a(424242), b(424242);
    const auto ta = a.uniform_tensor<double>({64}, -1, 1);
    const auto tb = b.uniform_tensor<double>({64}, -1, 1);
    out.checks.push_back({"determinism.rng_bitwise", ta == tb,
                          "same seed reproduces the draw sequence"});
  }
  {
    Rng a(7), b(7);
    const LayerSpec spec{2, 1, 2, 1};
    const auto wa = init_weights<double>(spec, 8, InitMode::scaled_uniform, a);
    const auto wb = init_weights<double>(spec, 8, InitMode::scaled_uniform, b);
    out.checks.push_back({"determinism.init_bitwise",
                          wa.kernel == wb.kernel && wa.bias == wb.bias,
                          "same seed reproduces initial weights"});
  }
  {
    SyntheticTask task;
    task.seed = 5;
    const auto a = generate<double>(task, 8);
    const auto b = generate<double>(task, 8);
    bool same = true;
    for (std::size_t i = 0; i < a.size(); ++i)
      same = same && a[i].frames == b[i].frames;
    out.checks.push_back({"determinism.generator_bitwise", same,
                          "same seed reproduces the synthetic set"});
  }
  {
    const auto run = [] {
      PipelineConfig cfg;
      cfg.seed = 3;
      cfg.stack = parse_stack("(2:1)");
      auto w = init_pipeline_weights<float>(cfg);
      SyntheticTask task;
      task.seed = 4;
      const auto data = generate<float>(task, 32);
      auto pre = StageConfig::pretrain_defaults();
      pre.steps = 20;
      auto sft = StageConfig::sft_defaults();
      sft.steps = 20;
      const auto r1 = train_stage(pre, cfg, w, data);
      const auto r2 = train_stage(sft, cfg, w, data);
      return std::pair{trace_csv({r1, r2}),
                       checkpoint_bytes(pipeline_to_checkpoint(cfg, w))};
    };
    const auto a = run();
    const auto b = run();
    out.checks.push_back({"determinism.short_train_bitwise",
                          a.first == b.first && a.second == b.second,
                          "trace csv and checkpoint bytes repeat across runs"});
  }
  return out;
}

}  // namespace verify_detail

inline std::vector<std::string> verify_suite_names() {
  return {"params", "ladder", "oracle", "identity", "grad", "determinism"};
}

/// Verification always runs at 64-bit: the gradient and oracle tolerances are
/// not meaningful at single precision.
inline SuiteResult run_verify_suite(const std::string& name) {
  if (name == "params") return verify_detail::params_suite();
  if (name == "ladder") return verify_detail::ladder_suite();
  if (name == "oracle") return verify_detail::oracle_suite();
  if (name == "identity") return verify_detail::identity_suite();
  if (name == "grad") return verify_detail::grad_suite();
  if (name == "determinism") return verify_detail::determinism_suite();
  throw contract_error("unknown verify suite \"" + name +
                       "\"; expected one of params, ladder, oracle, identity, "
                       "grad, determinism");
}

}  // namespace stekit
