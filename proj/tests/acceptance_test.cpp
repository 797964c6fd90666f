// Acceptance suite: one test per release criterion, each printing a
// [CRITERION n] PASS/FAIL line. Tolerances are pinned here and in verify.hpp;
// everything runs single-threaded at the stated precision.

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <string>

#include "stekit/checkpoint.hpp"
#include "stekit/planner.hpp"
#include "stekit/training.hpp"
#include "stekit/verify.hpp"

namespace stekit {
namespace {

class Criterion {
 public:
  Criterion(int id, const char* title) : id_(id), title_(title) {}
  ~Criterion() {
    std::printf("[CRITERION %d] %s: %s\n", id_, title_,
                ::testing::Test::HasFailure() ? "FAIL" : "PASS");
    std::fflush(stdout);
  }

 private:
  int id_;
  const char* title_;
};

void expect_suite(const SuiteResult& result) {
  for (const CheckResult& c : result.checks)
    EXPECT_TRUE(c.pass) << result.suite << ": " << c.name << ": " << c.detail;
}

TEST(Acceptance, C1_ParameterReproduction) {
  Criterion c(1, "parameter reproduction (trainable-parameter column)");
  const struct {
    const char* spec;
    double published_millions;
  } rows[] = {
      {"(2:1)", 1.33},
      {"(2:1)-(2:1)", 2.65},
      {"(2:1)-(2:1)-(2:1)", 3.98},
      {"(2:1)-(2:1)-(2:1)-(2:1)", 5.31},
      {"(2:2)", 2.65},
  };
  for (const auto& row : rows) {
    const long long exact = param_count(parse_stack(row.spec), 1152).total;
    const double rel =
        std::abs(row.published_millions * 1e6 - double(exact)) / double(exact);
    EXPECT_LE(rel, 0.005) << row.spec << " exact=" << exact;
  }
}

TEST(Acceptance, C2_PlacementCostReproduction) {
  Criterion c(2, "semantic-vs-visual placement cost ratio in [9.6, 9.8]");
  const double ratio =
      double(param_count(parse_stack("(2:2)"), 3584).total) /
      double(param_count(parse_stack("(2:2)"), 1152).total);
  EXPECT_GE(ratio, 9.6);
  EXPECT_LE(ratio, 9.8);
}

TEST(Acceptance, C3_CompressionLadder) {
  Criterion c(3, "compression ladder percentages exact at t=32");
  const struct {
    const char* spec;
    double fraction;
  } rows[] = {
      {"(4:3)", 0.25},          {"(4:3)-(4:3)", 0.4375},
      {"(2:1)", 0.50},          {"(2:1)-(2:1)", 0.75},
      {"(2:1)-(2:1)-(2:1)", 0.875},
      {"(2:1)-(2:1)-(2:1)-(2:1)", 0.9375},
  };
  for (const auto& row : rows)
    EXPECT_EQ(plan(32, 1, 1152, parse_stack(row.spec)).compression_fraction,
              row.fraction)
        << row.spec;
}

TEST(Acceptance, C4_PaddingEdgeCase) {
  Criterion c(4, "31 frames with unit size 2 pad exactly one frame");
  EXPECT_EQ(pad_amount(31, 2), 1u);
}

TEST(Acceptance, C5_OracleEquivalence) {
  Criterion c(5, "taped forward equals the naive reference (50 instances)");
  expect_suite(run_verify_suite("oracle"));
}

TEST(Acceptance, C6_GradientSuite) {
  Criterion c(6, "finite differences confirm every gradient (<= 1e-6)");
  expect_suite(run_verify_suite("grad"));
}

TEST(Acceptance, C7_IdentityAndLocality) {
  Criterion c(7, "identity stacks exact; unit locality holds");
  expect_suite(run_verify_suite("identity"));
}

TEST(Acceptance, C8_TemporalSeparation) {
  Criterion c(8, "temporal separation at desk scale");

  // (a) the implicit (mean-pool) baseline's loss is exactly reversal-invariant
  PipelineConfig base;
  base.seed = 7;
  {
    const auto weights = init_pipeline_weights<double>(base);
    SyntheticTask task;
    task.seed = 81;
    const auto data = generate<double>(task, 20);
    for (std::size_t i = 0; i + 1 < data.size(); i += 2) {
      const ToyBatch<double> fwd = data[i];
      const ToyBatch<double> rev{data[i + 1].frames, fwd.question, fwd.answer};
      EXPECT_EQ(pipeline_forward(fwd, base, weights),
                pipeline_forward(rev, base, weights));
    }
  }

  // (b) the temporal encoder's loss differs under reversal on >= 9/10 draws
  {
    PipelineConfig cfg = base;
    cfg.stack = parse_stack("(2:1)");
    SyntheticTask task;
    task.seed = 82;
    const auto data = generate<double>(task, 20);
    int differing = 0;
    for (std::size_t i = 0; i + 1 < data.size(); i += 2) {
      cfg.seed = 900 + i;
      const auto weights = init_pipeline_weights<double>(cfg);
      const ToyBatch<double> fwd = data[i];
      const ToyBatch<double> rev{data[i + 1].frames, fwd.question, fwd.answer};
      if (pipeline_forward(fwd, cfg, weights) !=
          pipeline_forward(rev, cfg, weights))
        ++differing;
    }
    EXPECT_GE(differing, 9);
  }

  // (c) the two-stage schedule learns the order task; the baseline stays at
  // chance (50% +- 5%) on 200 held-out samples
  {
    SyntheticTask task;
    task.seed = 9;
    const auto train_data = generate<float>(task, 512);
    SyntheticTask held = task;
    held.seed = 1009;
    const auto eval_data = generate<float>(held, 200);

    auto pre = StageConfig::pretrain_defaults();  // one epoch each stage
    auto sft = StageConfig::sft_defaults();

    PipelineConfig cfg = base;
    cfg.stack = parse_stack("(2:1)");
    auto weights = init_pipeline_weights<float>(cfg);
    train_stage(pre, cfg, weights, train_data);
    train_stage(sft, cfg, weights, train_data);
    const double train_acc = evaluate(cfg, weights, train_data).accuracy;
    EXPECT_GT(train_acc, 0.90) << "temporal arm train accuracy";

    auto base_weights = init_pipeline_weights<float>(base);
    train_stage(pre, base, base_weights, train_data);
    train_stage(sft, base, base_weights, train_data);
    const double base_acc = evaluate(base, base_weights, eval_data).accuracy;
    EXPECT_GE(base_acc, 0.45);
    EXPECT_LE(base_acc, 0.55);
  }
}

TEST(Acceptance, C9_Determinism) {
  Criterion c(9, "identical seeds give bitwise-identical runs");
  const auto full_run = [] {
    PipelineConfig cfg;
    cfg.seed = 7;
    cfg.stack = parse_stack("(2:1)");
    auto weights = init_pipeline_weights<float>(cfg);
    SyntheticTask task;
    task.seed = 9;
    const auto data = generate<float>(task, 512);
    auto pre = StageConfig::pretrain_defaults();
    auto sft = StageConfig::sft_defaults();
    const auto r1 = train_stage(pre, cfg, weights, data);
    const auto r2 = train_stage(sft, cfg, weights, data);
    return std::pair{trace_csv({r1, r2}),
                     checkpoint_bytes(pipeline_to_checkpoint(cfg, weights))};
  };
  const auto a = full_run();
  const auto b = full_run();
  EXPECT_EQ(a.first, b.first) << "loss traces differ across runs";
  EXPECT_TRUE(a.second == b.second) << "checkpoint bytes differ across runs";
}

}  // namespace
}  // namespace stekit
