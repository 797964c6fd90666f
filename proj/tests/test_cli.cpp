#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "stekit/checkpoint.hpp"
#include "stekit/rng.hpp"

namespace stekit {
namespace {

namespace fs = std::filesystem;

struct CommandResult {
  int exit_code;
  std::string out;
};

std::string read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

CommandResult run_cli(const std::string& args) {
  static int counter = 0;
  const fs::path out =
      fs::temp_directory_path() / ("stekit_cli_" + std::to_string(counter++));
  const std::string cmd =
      std::string(STEKIT_CLI_PATH) + " " + args + " > " + out.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  CommandResult r{WIFEXITED(status) ? WEXITSTATUS(status) : -1,
                  read_file(out)};
  fs::remove(out);
  return r;
}

fs::path temp_dir() {
  const fs::path dir = fs::temp_directory_path() / "stekit_cli_work";
  fs::create_directories(dir);
  return dir;
}

TEST(Cli, PlanPrintsTheLadderRow) {
  const auto r = run_cli("plan \"(2:1)-(2:1)\" --frames 32");
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_EQ(r.out,
            "spec,reduction_pct,final_frames,tokens_out,params\n"
            "(2:1)-(2:1),75.00,8,8,2655360\n");
}

TEST(Cli, PlanReportsParamsAtFullWidth) {
  const auto r = run_cli("plan \"(2:2)\" --dim 1152");
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_NE(r.out.find(",2655360\n"), std::string::npos);
}

TEST(Cli, PlanParseFailureExitsTwoWithPosition) {
  const auto r = run_cli("plan \"(2:1\"");
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.out.find("position 4"), std::string::npos);
}

TEST(Cli, ParamCountBreaksDownPerLayer) {
  const auto r = run_cli("param-count \"(2:1)-(2:1)\" --dim 1152");
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_EQ(r.out,
            "layer,params\n0,1327680\n1,1327680\ntotal,2655360\n");
}

TEST(Cli, LadderDefaultsToThePublishedStacks) {
  const auto r = run_cli("ladder --dim 1152");
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_NE(r.out.find("(2:2),0.00,32,32,2655360"), std::string::npos);
  EXPECT_NE(r.out.find("(4:3),25.00,24,24,1991520"), std::string::npos);
  EXPECT_NE(r.out.find("(2:1)-(2:1)-(2:1)-(2:1),93.75,2,2,5310720"),
            std::string::npos);
}

TEST(Cli, VerifySuiteSelectionAndUnknownName) {
  EXPECT_EQ(run_cli("verify --suite params").exit_code, 0);
  const auto r = run_cli("verify --suite nonsense");
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.out.find("unknown verify suite"), std::string::npos);
}

// Writes in.stek (32x2x8 f64) and id.ckpt (identity (2:2) stack) into dir.
void write_forward_fixture(const fs::path& dir) {
  Rng rng(3);
  const auto z = rng.uniform_tensor<double>({32, 2, 8}, -1, 1);
  save_tensor((dir / "in.stek").string(), z);
  const StackSpec keep = parse_stack("(2:2)");
  Rng wrng(0);
  save_checkpoint(
      (dir / "id.ckpt").string(),
      stack_to_checkpoint(keep, init_stack_weights<double>(
                                    keep, 8, InitMode::identity_preserving,
                                    wrng)));
}

TEST(Cli, ForwardCompressesAndPreservesIdentityPayload) {
  const fs::path dir = temp_dir();
  write_forward_fixture(dir);
  const auto r = run_cli("forward --input " + (dir / "in.stek").string() +
                         " --weights " + (dir / "id.ckpt").string() +
                         " --out " + (dir / "out.stek").string());
  EXPECT_EQ(r.exit_code, 0);
  const std::string in_bytes = read_file(dir / "in.stek");
  const std::string out_bytes = read_file(dir / "out.stek");
  ASSERT_EQ(in_bytes.size(), out_bytes.size());
  // identical payload behind identical headers
  EXPECT_EQ(in_bytes, out_bytes);
}

TEST(Cli, ForwardRejectsSpecCheckpointDisagreement) {
  const fs::path dir = temp_dir();
  write_forward_fixture(dir);
  const auto r = run_cli("forward --input " + (dir / "in.stek").string() +
                         " --weights " + (dir / "id.ckpt").string() +
                         " --out " + (dir / "x.stek").string() +
                         " --spec \"(2:1)\"");
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.out.find("disagrees"), std::string::npos);
}

TEST(Cli, ForwardNamesTruncationByteCounts) {
  const fs::path dir = temp_dir();
  write_forward_fixture(dir);
  const std::string full = read_file(dir / "in.stek");
  std::ofstream os(dir / "clipped.stek", std::ios::binary);
  os << full.substr(0, full.size() - 8);
  os.close();
  const auto r = run_cli("forward --input " + (dir / "clipped.stek").string() +
                         " --weights " + (dir / "id.ckpt").string() +
                         " --out " + (dir / "y.stek").string());
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.out.find("expected 4096 bytes"), std::string::npos);
  EXPECT_NE(r.out.find("got 4088"), std::string::npos);
}

TEST(Cli, TrainWritesArtifactsAndFreezeEvidence) {
  const fs::path dir = temp_dir() / "train_smoke";
  const auto r = run_cli("train --task order --out-dir " + dir.string() +
                         " --seed 3 --train-count 16 --eval-count 8 "
                         "--steps 6");
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_TRUE(fs::exists(dir / "stage1.ckpt"));
  EXPECT_TRUE(fs::exists(dir / "stage2.ckpt"));
  EXPECT_TRUE(fs::exists(dir / "losses.csv"));
  const std::string metrics = read_file(dir / "metrics.txt");
  EXPECT_NE(metrics.find("frozen_unchanged true"), std::string::npos);
  const std::string losses = read_file(dir / "losses.csv");
  EXPECT_EQ(losses.rfind("step,loss,stage\n", 0), 0u);
  EXPECT_NE(losses.find(",pretrain\n"), std::string::npos);
  EXPECT_NE(losses.find(",sft\n"), std::string::npos);

  const auto e = run_cli("eval --weights " + (dir / "stage2.ckpt").string() +
                         " --task order --seed 99 --count 10");
  EXPECT_EQ(e.exit_code, 0);
  EXPECT_NE(e.out.find("accuracy "), std::string::npos);
}

TEST(Cli, TrainIsDeterministicPerSeed) {
  const fs::path a = temp_dir() / "det_a";
  const fs::path b = temp_dir() / "det_b";
  const std::string flags =
      " --seed 11 --train-count 16 --eval-count 8 --steps 8";
  ASSERT_EQ(run_cli("train --task order --out-dir " + a.string() + flags)
                .exit_code,
            0);
  ASSERT_EQ(run_cli("train --task order --out-dir " + b.string() + flags)
                .exit_code,
            0);
  EXPECT_EQ(read_file(a / "losses.csv"), read_file(b / "losses.csv"));
  EXPECT_EQ(read_file(a / "stage2.ckpt"), read_file(b / "stage2.ckpt"));
}

TEST(Cli, TrainDefaultsReachHighTrainAccuracy) {
  const fs::path dir = temp_dir() / "train_full";
  const auto r =
      run_cli("train --task order --out-dir " + dir.string() + " --seed 7");
  ASSERT_EQ(r.exit_code, 0);
  const std::string metrics = read_file(dir / "metrics.txt");
  const auto pos = metrics.find("train_accuracy ");
  ASSERT_NE(pos, std::string::npos);
  const double acc = std::stod(metrics.substr(pos + 15));
  EXPECT_GT(acc, 0.90);
}

TEST(Cli, PrecisionEnvVarSelectsCheckpointDtype) {
  const fs::path dir = temp_dir() / "train_f64";
  const auto r = run_cli("train --task order --out-dir " + dir.string() +
                         " --seed 3 --train-count 8 --steps 2");
  ASSERT_EQ(r.exit_code, 0);
  const Checkpoint f32 = load_checkpoint((dir / "stage2.ckpt").string());
  EXPECT_TRUE(
      std::holds_alternative<Tensor<float>>(f32.entries.front().second));

  const int status = std::system(
      (std::string("STEKIT_PRECISION=f64 ") + STEKIT_CLI_PATH +
       " train --task order --out-dir " + dir.string() +
       " --seed 3 --train-count 8 --steps 2 > /dev/null 2>&1")
          .c_str());
  ASSERT_EQ(WEXITSTATUS(status), 0);
  const Checkpoint f64 = load_checkpoint((dir / "stage2.ckpt").string());
  EXPECT_TRUE(
      std::holds_alternative<Tensor<double>>(f64.entries.front().second));
}

TEST(Cli, ConfigFileDrivesThePipeline) {
  const fs::path dir = temp_dir();
  {
    std::ofstream os(dir / "pipe.cfg");
    os << "d_vis 16\nd_sem 16\np 4\nvocab 8\nstack (2:1)-(2:1)\n"
          "insertion after\nseed 5\n";
  }
  const fs::path out = dir / "cfg_run";
  const auto r = run_cli("train --task order --config " +
                         (dir / "pipe.cfg").string() + " --out-dir " +
                         out.string() + " --train-count 8 --steps 2");
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_NE(read_file(out / "metrics.txt").find("stack (2:1)-(2:1)@after"),
            std::string::npos);
}

}  // namespace
}  // namespace stekit
