// stekit: batch tools for temporal frame compression over token embeddings --
// planning, verification, encoding, and the two-stage training demo.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "stekit/checkpoint.hpp"
#include "stekit/pipeline.hpp"
#include "stekit/planner.hpp"
#include "stekit/serialize.hpp"
#include "stekit/spec_string.hpp"
#include "stekit/ste.hpp"
#include "stekit/training.hpp"
#include "stekit/verify.hpp"

namespace {

using namespace stekit;

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

enum class Precision { f32, f64 };

Precision env_precision(Precision fallback) {
  const char* v = std::getenv("STEKIT_PRECISION");
  if (!v) return fallback;
  const std::string s = v;
  if (s == "f32") return Precision::f32;
  if (s == "f64") return Precision::f64;
  throw contract_error("STEKIT_PRECISION must be f32 or f64, got \"" + s +
                       "\"");
}

// ---- plan / ladder / param-count ---------------------------------------------

struct PlanOpts {
  std::string spec;
  std::size_t frames = kReferenceFrames;
  std::size_t patches = 1;
  int dim = 1152;
  bool layers = false;
};

int cmd_plan(const PlanOpts& o) {
  const StackSpec stack = parse_stack(o.spec);
  const CompressionPlan p = plan(o.frames, o.patches, o.dim, stack);
  std::cout << kPlanCsvHeader << "\n" << plan_csv_row(stack, p) << "\n";
  if (o.layers) {
    std::cout << "\nlayer,t_in,k,units,t_out\n";
    for (std::size_t l = 0; l < p.layers.size(); ++l)
      std::cout << l << "," << p.layers[l].t_in << "," << p.layers[l].k << ","
                << p.layers[l].units << "," << p.layers[l].t_out << "\n";
  }
  return kExitOk;
}

struct LadderOpts {
  std::vector<std::string> specs;
  std::size_t frames = kReferenceFrames;
  std::size_t patches = 1;
  int dim = 1152;
};

int cmd_ladder(const LadderOpts& o) {
  std::vector<StackSpec> stacks;
  if (o.specs.empty()) {
    stacks = paper_ladder();
  } else {
    for (const std::string& s : o.specs) stacks.push_back(parse_stack(s));
  }
  std::cout << ladder_table(stacks, o.dim, o.frames, o.patches);
  return kExitOk;
}

int cmd_param_count(const std::string& spec, int dim) {
  const StackSpec stack = parse_stack(spec);
  const ParamBreakdown counts = param_count(stack, dim);
  std::cout << "layer,params\n";
  for (std::size_t l = 0; l < counts.per_layer.size(); ++l)
    std::cout << l << "," << counts.per_layer[l] << "\n";
  std::cout << "total," << counts.total << "\n";
  return kExitOk;
}

// ---- verify --------------------------------------------------------------------

int cmd_verify(const std::string& suite) {
  std::vector<std::string> names =
      suite == "all" ? verify_suite_names() : std::vector<std::string>{suite};
  bool all_pass = true;
  for (const std::string& name : names) {
    const SuiteResult result = run_verify_suite(name);
    for (const CheckResult& c : result.checks)
      std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail
                << "\n";
    std::cout << "suite " << result.suite << ": " << result.passed() << "/"
              << result.checks.size() << " checks passed\n";
    all_pass = all_pass && result.pass();
  }
  return all_pass ? kExitOk : kExitVerifyFailure;
}

// ---- forward -------------------------------------------------------------------

struct ForwardOpts {
  std::string input, weights, out, spec;
};

template <typename S>
void run_forward(const Tensor<S>& input, const ForwardOpts& o) {
  if (input.rank() != 3)
    throw dim_error(o.input + ": embeddings must be rank-3 (t x p x d), got " +
                    shape_str(input.shape()));
  const Checkpoint ckpt = load_checkpoint(o.weights);
  StackSpec stack;
  if (!o.spec.empty()) {
    stack = parse_stack(o.spec);
    if (ckpt.spec != "-" &&
        format_stack(parse_stack(ckpt.spec)) != format_stack(stack))
      throw contract_error("--spec " + format_stack(stack) +
                           " disagrees with checkpoint spec " + ckpt.spec);
  } else if (ckpt.spec != "-") {
    stack = parse_stack(ckpt.spec);
  } else {
    throw contract_error(
        "no stack spec: pass --spec or use a checkpoint that records one");
  }
  const int d = int(input.extent(2));
  const auto ws = stack_from_checkpoint<S>(ckpt, stack, d);
  const auto out =
      stack_forward(FrameEmbeddings<S>(input), stack, ws);
  save_tensor(o.out, out.data);
  std::cout << "wrote " << o.out << " with " << out.frames() << " frames ("
            << shape_str(out.data.shape()) << ")\n";
}

int cmd_forward(const ForwardOpts& o) {
  const AnyTensor input = load_tensor_any(o.input);
  std::visit([&](const auto& t) { run_forward(t, o); }, input);
  return kExitOk;
}

// ---- config files ----------------------------------------------------------------

PipelineConfig parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw io_error(path + ": cannot open");
  PipelineConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  std::string insertion_override;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key, value;
    ls >> key;
    std::getline(ls, value);
    if (!value.empty() && value.front() == ' ') value.erase(0, 1);
    const auto where = path + ":" + std::to_string(lineno);
    try {
      if (key == "d_raw") cfg.d_raw = std::stoi(value);
      else if (key == "d_vis") cfg.d_vis = std::stoi(value);
      else if (key == "d_sem") cfg.d_sem = std::stoi(value);
      else if (key == "p") cfg.p = std::stoi(value);
      else if (key == "vocab") cfg.vocab = std::stoi(value);
      else if (key == "seed") cfg.seed = std::stoull(value);
      else if (key == "stack") cfg.stack = parse_stack(value);
      else if (key == "insertion") insertion_override = value;
      else if (key == "activation")
        cfg.projector_activation =
            value == "none" ? Activation::none : Activation::tanh;
      else
        throw parse_error(where + ": unknown config key \"" + key + "\"");
    } catch (const std::invalid_argument&) {
      throw parse_error(where + ": bad value \"" + value + "\" for " + key);
    }
  }
  if (!insertion_override.empty()) {
    if (!cfg.stack)
      throw parse_error(path + ": insertion given without a stack");
    if (insertion_override == "before")
      cfg.stack->insertion = Insertion::before_projector;
    else if (insertion_override == "after")
      cfg.stack->insertion = Insertion::after_projector;
    else if (insertion_override == "both")
      cfg.stack->insertion = Insertion::both;
    else
      throw parse_error(path + ": insertion must be before, after or both");
  }
  return cfg;
}

// ---- train / eval ----------------------------------------------------------------

struct TrainOpts {
  std::string task = "order";
  std::string config;
  std::string out_dir;
  std::uint64_t seed = 7;
  std::size_t train_count = 512;
  std::size_t eval_count = 200;
  std::size_t steps = 0;  // 0 -> one epoch per stage
  std::size_t batch = 2;
};

SyntheticTask task_for(const std::string& name, const PipelineConfig& cfg,
                       std::uint64_t seed) {
  SyntheticTask task;
  if (name == "order") task.kind = TaskKind::order_discrimination;
  else if (name == "motion") task.kind = TaskKind::motion_direction;
  else throw contract_error("unknown task \"" + name +
                            "\"; expected order or motion");
  task.p = cfg.p;
  task.d_raw = cfg.d_raw;
  task.seed = seed;
  return task;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw io_error(path + ": cannot open for writing");
  os << text;
  if (!os) throw io_error(path + ": write failed");
}

template <typename S>
int run_train(const TrainOpts& o) {
  PipelineConfig cfg;
  if (!o.config.empty()) {
    cfg = parse_config_file(o.config);
  } else {
    cfg.stack = parse_stack("(2:1)");
    cfg.seed = o.seed;
  }
  validate_config(cfg);

  const SyntheticTask task = task_for(o.task, cfg, o.seed);
  SyntheticTask held = task;
  held.seed = task.seed + 0x9E37;
  const auto train_data = generate<S>(task, o.train_count);
  const auto eval_data = generate<S>(held, o.eval_count);

  auto weights = init_pipeline_weights<S>(cfg);

  auto stage1 = StageConfig::pretrain_defaults();
  auto stage2 = StageConfig::sft_defaults();
  stage1.steps = stage2.steps = o.steps;
  stage1.batch_size = stage2.batch_size = o.batch;
  stage1.seed = o.seed;
  stage2.seed = o.seed + 1;

  std::filesystem::create_directories(o.out_dir);
  const auto path = [&](const char* name) {
    return (std::filesystem::path(o.out_dir) / name).string();
  };

  const std::uint64_t frozen_before = non_ste_hash(weights);
  const TrainResult r1 = train_stage(stage1, cfg, weights, train_data);
  const std::uint64_t frozen_after = non_ste_hash(weights);
  save_checkpoint(path("stage1.ckpt"), pipeline_to_checkpoint(cfg, weights));

  const TrainResult r2 = train_stage(stage2, cfg, weights, train_data);
  save_checkpoint(path("stage2.ckpt"), pipeline_to_checkpoint(cfg, weights));

  write_text_file(path("losses.csv"), trace_csv({r1, r2}));

  const EvalResult on_train = evaluate(cfg, weights, train_data);
  const EvalResult on_held = evaluate(cfg, weights, eval_data);

  char buf[64];
  std::string metrics;
  const auto put = [&](const std::string& k, const std::string& v) {
    metrics += k + " " + v + "\n";
  };
  const auto putf = [&](const std::string& k, double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    put(k, buf);
  };
  put("task", o.task);
  put("stack", cfg.stack ? format_stack(*cfg.stack) : "-");
  put("train_count", std::to_string(train_data.size()));
  put("eval_count", std::to_string(eval_data.size()));
  put("stage1_steps", std::to_string(r1.trace.size()));
  put("stage2_steps", std::to_string(r2.trace.size()));
  putf("stage1_final_loss", r1.final_loss);
  putf("stage2_final_loss", r2.final_loss);
  putf("train_accuracy", on_train.accuracy);
  putf("train_mean_loglik", on_train.mean_loglik);
  putf("eval_accuracy", on_held.accuracy);
  putf("eval_mean_loglik", on_held.mean_loglik);
  std::snprintf(buf, sizeof buf, "0x%016llx",
                (unsigned long long)frozen_before);
  put("frozen_hash_before_stage1", buf);
  std::snprintf(buf, sizeof buf, "0x%016llx",
                (unsigned long long)frozen_after);
  put("frozen_hash_after_stage1", buf);
  put("frozen_unchanged", frozen_before == frozen_after ? "true" : "false");
  write_text_file(path("metrics.txt"), metrics);
  std::cout << metrics;
  return kExitOk;
}

int cmd_train(const TrainOpts& o) {
  return env_precision(Precision::f32) == Precision::f32 ? run_train<float>(o)
                                                         : run_train<double>(o);
}

struct EvalOpts {
  std::string weights;
  std::string task = "order";
  std::uint64_t seed = 1007;
  std::size_t count = 200;
};

template <typename S>
int run_eval(const EvalOpts& o, const Checkpoint& ckpt) {
  PipelineConfig cfg;
  const auto weights = pipeline_from_checkpoint<S>(ckpt, cfg);
  validate_config(cfg);
  const SyntheticTask task = task_for(o.task, cfg, o.seed);
  const auto data = generate<S>(task, o.count);
  const EvalResult r = evaluate(cfg, weights, data);
  std::printf("task %s\ncount %zu\naccuracy %.17g\nmean_loglik %.17g\n",
              o.task.c_str(), data.size(), r.accuracy, r.mean_loglik);
  return kExitOk;
}

int cmd_eval(const EvalOpts& o) {
  const Checkpoint ckpt = load_checkpoint(o.weights);
  const bool f32 =
      !ckpt.entries.empty() &&
      std::holds_alternative<Tensor<float>>(ckpt.entries.front().second);
  return f32 ? run_eval<float>(o, ckpt) : run_eval<double>(o, ckpt);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"temporal frame compression toolkit"};
  app.require_subcommand(1);

  PlanOpts plan_opts;
  auto* plan_cmd =
      app.add_subcommand("plan", "frame/token/parameter plan for one stack");
  plan_cmd->add_option("spec", plan_opts.spec, "stack notation, e.g. (2:1)-(2:1)")
      ->required();
  plan_cmd->add_option("--frames", plan_opts.frames, "input frame count");
  plan_cmd->add_option("--patches", plan_opts.patches, "patches per frame");
  plan_cmd->add_option("--dim", plan_opts.dim, "embedding width");
  plan_cmd->add_flag("--layers", plan_opts.layers, "also print per-layer rows");

  LadderOpts ladder_opts;
  auto* ladder_cmd =
      app.add_subcommand("ladder", "one CSV row per stack (default: the "
                                   "published compression ladder)");
  ladder_cmd->add_option("specs", ladder_opts.specs, "stack notations");
  ladder_cmd->add_option("--frames", ladder_opts.frames, "input frame count");
  ladder_cmd->add_option("--patches", ladder_opts.patches, "patches per frame");
  ladder_cmd->add_option("--dim", ladder_opts.dim, "embedding width");

  std::string pc_spec;
  int pc_dim = 1152;
  auto* pc_cmd =
      app.add_subcommand("param-count", "per-layer trainable parameter counts");
  pc_cmd->add_option("spec", pc_spec, "stack notation")->required();
  pc_cmd->add_option("--dim", pc_dim, "embedding width");

  std::string verify_suite = "all";
  auto* verify_cmd =
      app.add_subcommand("verify", "run invariant suites (always 64-bit)");
  verify_cmd->add_option("--suite", verify_suite,
                         "params|ladder|oracle|identity|grad|determinism|all");

  ForwardOpts fwd_opts;
  auto* fwd_cmd = app.add_subcommand(
      "forward", "encode an embeddings file through a weighted stack");
  fwd_cmd->add_option("--input", fwd_opts.input, "input tensor file (t x p x d)")
      ->required();
  fwd_cmd->add_option("--weights", fwd_opts.weights, "stack checkpoint")
      ->required();
  fwd_cmd->add_option("--out", fwd_opts.out, "output tensor file")->required();
  fwd_cmd->add_option("--spec", fwd_opts.spec,
                      "stack notation (defaults to the checkpoint's)");

  TrainOpts train_opts;
  auto* train_cmd = app.add_subcommand(
      "train", "two-stage schedule on a synthetic temporal task");
  train_cmd->add_option("--task", train_opts.task, "order|motion");
  train_cmd->add_option("--config", train_opts.config,
                        "pipeline config file (key value lines)");
  train_cmd->add_option("--seed", train_opts.seed, "run seed");
  train_cmd->add_option("--out-dir", train_opts.out_dir,
                        "directory for checkpoints, losses, metrics")
      ->required();
  train_cmd->add_option("--train-count", train_opts.train_count,
                        "training samples");
  train_cmd->add_option("--eval-count", train_opts.eval_count,
                        "held-out samples");
  train_cmd->add_option("--steps", train_opts.steps,
                        "steps per stage (0 = one epoch)");
  train_cmd->add_option("--batch", train_opts.batch, "batch size");

  EvalOpts eval_opts;
  auto* eval_cmd =
      app.add_subcommand("eval", "accuracy of a trained pipeline checkpoint");
  eval_cmd->add_option("--weights", eval_opts.weights, "pipeline checkpoint")
      ->required();
  eval_cmd->add_option("--task", eval_opts.task, "order|motion");
  eval_cmd->add_option("--seed", eval_opts.seed, "generator seed");
  eval_cmd->add_option("--count", eval_opts.count, "sample count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (plan_cmd->parsed()) return cmd_plan(plan_opts);
    if (ladder_cmd->parsed()) return cmd_ladder(ladder_opts);
    if (pc_cmd->parsed()) return cmd_param_count(pc_spec, pc_dim);
    if (verify_cmd->parsed()) return cmd_verify(verify_suite);
    if (fwd_cmd->parsed()) return cmd_forward(fwd_opts);
    if (train_cmd->parsed()) return cmd_train(train_opts);
    if (eval_cmd->parsed()) return cmd_eval(eval_opts);
  } catch (const numeric_error& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const parse_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
