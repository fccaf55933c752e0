#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sys/wait.h>
#include <sstream>

#include "snn/cli/commands.hpp"
#include "snn/container.hpp"
#include "snn/error.hpp"
#include "snn/sweep.hpp"
#include "support/temp_dir.hpp"

namespace snn::cli {
namespace {

using snn::testing::read_file;
using snn::testing::TempDir;

RunConfig small_config(const std::filesystem::path& out) {
  RunConfig c;
  c.out = out;
  c.jobs = 1;
  c.dataset.name = "synthetic";
  c.dataset.synthetic_classes = 3;
  c.dataset.synthetic_train_per_class = 16;
  c.dataset.synthetic_test_per_class = 8;
  c.dataset.synthetic_geometry = {1, 8, 8};
  c.arch.mlp_hidden = {16, 8};
  c.t_steps = 6;
  c.train.max_epochs = 3;
  c.train.batch_size = 8;
  c.train.lr = 5e-3;
  c.sweep.tau = {1.5, 3.0};
  c.sweep.v_th = {0.5, 50.0};
  c.perturb.samples = 6;
  return c;
}

int run(const std::function<void()>& f) {
  std::ostringstream err;
  return run_command(f, err);
}

TEST(RunConfig, JsonRoundTrip) {
  RunConfig c = small_config("runs/x");
  c.lif.surrogate = Surrogate::sigmoid;
  c.lif.alpha = 3.5;
  c.train.loss = LossKind::cross_entropy_rate;
  c.arch.arch = Arch::cnnsnn;
  const RunConfig back = parse_run_config(dump_run_config(c));
  EXPECT_EQ(dump_run_config(back), dump_run_config(c));
  EXPECT_EQ(back.lif, c.lif);
  EXPECT_EQ(back.arch.arch, Arch::cnnsnn);
}

TEST(RunConfig, PartialJsonKeepsDefaults) {
  const RunConfig c = parse_run_config(R"({"neuron": {"surrogate": "sigmoid"}, "seed": 9})");
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.lif.surrogate, Surrogate::sigmoid);
  EXPECT_EQ(c.lif.alpha, 4.0);
  EXPECT_EQ(c.t_steps, 10u);
}

TEST(RunConfig, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(parse_run_config(R"({"sed": 1})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"train": {"lr": "fast"}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"network": {"arch": "rnn"}})"), ConfigError);
  EXPECT_THROW(parse_run_config("{"), ConfigError);
  RunConfig c;
  c.dataset.name = "imagenet";
  EXPECT_THROW(c.validate(), ConfigError);
  c = RunConfig{};
  c.lif.tau = 0.5;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Train, WritesCheckpointAndHistory) {
  TempDir dir;
  RunConfig c = small_config(dir / "run");
  std::ostringstream log;
  ASSERT_EQ(run([&] { cmd_train(c, log); }), exit_ok);
  EXPECT_TRUE(std::filesystem::exists(dir / "run" / "checkpoint"));
  EXPECT_EQ(read_file(dir / "run" / "history.csv").rfind("epoch,train_loss,val_loss,val_acc\n", 0), 0u);
  EXPECT_NE(log.str().find("test_accuracy"), std::string::npos);
  EXPECT_EQ(parse_run_config(read_file(dir / "run" / "config.json")).t_steps, 6u);
}

TEST(Train, RerunGivesIdenticalCheckpoint) {
  TempDir dir;
  std::ostringstream log;
  ASSERT_EQ(run([&] { cmd_train(small_config(dir / "a"), log); }), exit_ok);
  ASSERT_EQ(run([&] { cmd_train(small_config(dir / "b"), log); }), exit_ok);
  EXPECT_EQ(read_file(dir / "a" / "checkpoint"), read_file(dir / "b" / "checkpoint"));
}

TEST(Train, BadDatasetPathIsUserError) {
  TempDir dir;
  RunConfig c = small_config(dir / "run");
  c.dataset.name = "mnist";
  c.dataset.path = dir / "missing";
  std::ostringstream log;
  EXPECT_EQ(run([&] { cmd_train(c, log); }), exit_usage);
}

TEST(Sweep, OutputsAndSilentRow) {
  TempDir dir;
  RunConfig c = small_config(dir / "s");
  std::ostringstream log;
  ASSERT_EQ(run([&] { cmd_sweep(c, log); }), exit_ok);
  std::istringstream csv(read_file(dir / "s" / "sweep.csv"));
  const SweepGrid g = read_sweep_csv(csv);
  ASSERT_EQ(g.completed_count(), 4u);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(g.cells[g.index(i, 1)]->total_spikes, 0u);
  EXPECT_TRUE(std::filesystem::exists(dir / "s" / "accuracy.svg"));
  EXPECT_TRUE(std::filesystem::exists(dir / "s" / "spikes.svg"));
  EXPECT_NE(log.str().find("operational"), std::string::npos);
  EXPECT_NE(log.str().find("best-accuracy"), std::string::npos);
}

TEST(Sweep, SingleCellGridHasOneRow) {
  TempDir dir;
  RunConfig c = small_config(dir / "s");
  c.sweep.tau = {2.0};
  c.sweep.v_th = {1.0};
  std::ostringstream log;
  ASSERT_EQ(run([&] { cmd_sweep(c, log); }), exit_ok);
  const std::string csv = read_file(dir / "s" / "sweep.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
}

TEST(Sweep, ResumedRunMatchesFreshRun) {
  TempDir dir;
  RunConfig c = small_config(dir / "fresh");
  std::ostringstream log;
  ASSERT_EQ(run([&] { cmd_sweep(c, log); }), exit_ok);

  RunConfig r = small_config(dir / "resumed");
  ASSERT_EQ(run([&] { cmd_sweep(r, log); }), exit_ok);
  // Drop half the cached cells and the outputs, then resume.
  std::filesystem::remove(dir / "resumed" / "cells" / "cell_0_1.txt");
  std::filesystem::remove(dir / "resumed" / "cells" / "cell_1_0.txt");
  std::filesystem::remove(dir / "resumed" / "sweep.csv");
  ASSERT_EQ(run([&] { cmd_sweep(r, log); }), exit_ok);
  EXPECT_EQ(read_file(dir / "fresh" / "sweep.csv"), read_file(dir / "resumed" / "sweep.csv"));
}

TEST(Sweep, RefusesDirectoryFromDifferentConfig) {
  TempDir dir;
  RunConfig c = small_config(dir / "s");
  c.sweep.tau = {2.0};
  c.sweep.v_th = {1.0};
  std::ostringstream log;
  ASSERT_EQ(run([&] { cmd_sweep(c, log); }), exit_ok);
  c.train.lr = 1e-2;
  EXPECT_EQ(run([&] { cmd_sweep(c, log); }), exit_usage);
  c.train.lr = 5e-3;
  c.jobs = 2;
  EXPECT_EQ(run([&] { cmd_sweep(c, log); }), exit_ok);
}

TEST(Report, ReproducesSweepSvgsByteForByte) {
  TempDir dir;
  RunConfig c = small_config(dir / "s");
  std::ostringstream log;
  ASSERT_EQ(run([&] { cmd_sweep(c, log); }), exit_ok);
  const std::string acc = read_file(dir / "s" / "accuracy.svg");
  const std::string spk = read_file(dir / "s" / "spikes.svg");
  const std::string summary = read_file(dir / "s" / "sweep_summary.txt");
  std::filesystem::remove(dir / "s" / "accuracy.svg");
  std::filesystem::remove(dir / "s" / "spikes.svg");
  ASSERT_EQ(run([&] { cmd_report(dir / "s", log); }), exit_ok);
  EXPECT_EQ(read_file(dir / "s" / "accuracy.svg"), acc);
  EXPECT_EQ(read_file(dir / "s" / "spikes.svg"), spk);
  EXPECT_EQ(read_file(dir / "s" / "sweep_summary.txt"), summary);
}

TEST(Report, EmptyDirectoryIsUserError) {
  TempDir dir;
  std::ostringstream log;
  EXPECT_EQ(run([&] { cmd_report(dir.path(), log); }), exit_usage);
  EXPECT_EQ(run([&] { cmd_report(dir / "nope", log); }), exit_usage);
}

TEST(Report, PartialSweepReportsCompletedCells) {
  TempDir dir;
  std::filesystem::create_directories(dir / "p");
  {
    std::ofstream out(dir / "p" / "sweep.csv");
    out << "tau,v_th,test_accuracy,total_spikes,efficiency,status\n"
           "1.5,0.5,0.8,1000,1,ok\n"
           "3,1,0.6,10,5.5,ok\n";
  }
  std::ostringstream log;
  ASSERT_EQ(run([&] { cmd_report(dir / "p", log); }), exit_ok);
  const std::string svg = read_file(dir / "p" / "accuracy.svg");
  EXPECT_NE(svg.find("#bbbbbb"), std::string::npos);
  EXPECT_NE(log.str().find("2 of 4 cells completed"), std::string::npos);
}

class Perturb : public ::testing::Test {
 protected:
  TempDir dir;
  RunConfig cfg = small_config(dir / "run");
  void SetUp() override {
    cfg.train.max_epochs = 10;
    std::ostringstream log;
    ASSERT_EQ(run([&] { cmd_train(cfg, log); }), exit_ok);
  }
};

TEST_F(Perturb, WritesStatsMatricesAndHeatmaps) {
  std::ostringstream log;
  ASSERT_EQ(run([&] { cmd_perturb(cfg, log); }), exit_ok) << log.str();
  const auto run_dir = dir / "run";
  const std::string stats = read_file(run_dir / "stats.csv");
  EXPECT_EQ(stats.rfind("layer,condition,neurons,samples,kurtosis,skewness,p99,count_above,mean,", 0), 0u);
  EXPECT_NE(stats.find("layer1,corrupt"), std::string::npos);
  const Tensor m = load_tensor(run_dir / "corr" / "layer1_clean.bin");
  EXPECT_EQ(m.shape(), (Shape{8, 8}));
  EXPECT_TRUE(std::filesystem::exists(run_dir / "corr_layer1_cor.svg"));
  EXPECT_EQ(read_file(run_dir / "failures.csv").rfind("frames_corrupted,samples\n1,", 0), 0u);

  const std::string first = stats;
  ASSERT_EQ(run([&] { cmd_perturb(cfg, log); }), exit_ok);
  EXPECT_EQ(read_file(run_dir / "stats.csv"), first);
}

TEST_F(Perturb, SingleSample) {
  cfg.perturb.samples = 1;
  for (std::uint64_t seed = 1; seed < 20; ++seed) {
    cfg.seed = seed;  // campaign stream only; the checkpoint stays the same
    cfg.perturb.checkpoint = dir / "run" / "checkpoint";
    cfg.out = dir / ("one" + std::to_string(seed));
    std::ostringstream log;
    const int code = run([&] { cmd_perturb(cfg, log); });
    if (code == exit_ok) {
      EXPECT_TRUE(std::filesystem::exists(cfg.out / "stats.csv"));
      return;
    }
    EXPECT_EQ(code, exit_internal);  // the one sample was misclassified
  }
  FAIL() << "no seed picked a correctly classified sample";
}

TEST_F(Perturb, MissingCheckpointIsUserError) {
  cfg.perturb.checkpoint = dir / "nothing";
  std::ostringstream log;
  EXPECT_EQ(run([&] { cmd_perturb(cfg, log); }), exit_usage);
}

TEST_F(Perturb, ReportRegeneratesCorrelationHeatmaps) {
  std::ostringstream log;
  ASSERT_EQ(run([&] { cmd_perturb(cfg, log); }), exit_ok);
  const auto svg = dir / "run" / "corr_layer0_clean.svg";
  const std::string before = read_file(svg);
  std::filesystem::remove(svg);
  ASSERT_EQ(run([&] { cmd_report(dir / "run", log); }), exit_ok);
  EXPECT_EQ(read_file(svg), before);
}

// ---- the executable itself ---------------------------------------------

int snnctl(const std::string& args) {
  const std::string cmd = std::string(SNNCTL_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

TEST(Snnctl, ExitCodes) {
  TempDir dir;
  EXPECT_EQ(snnctl(""), 2);
  EXPECT_EQ(snnctl("bogus"), 2);
  EXPECT_EQ(snnctl("train --surrogate relu"), 2);
  EXPECT_EQ(snnctl("train --dataset mnist --data-path " + (dir / "none").string() + " --out " +
                   (dir / "r").string()),
            2);
  EXPECT_EQ(snnctl("report " + dir.path().string()), 2);
  EXPECT_EQ(snnctl("train --config " + (dir / "missing.json").string()), 2);
  EXPECT_EQ(snnctl("--help"), 0);
}

TEST(Snnctl, FlagsOverrideConfigFile) {
  TempDir dir;
  RunConfig c = small_config(dir / "from_file");
  c.lif.tau = 4.0;
  {
    std::ofstream out(dir / "c.json");
    out << dump_run_config(c);
  }
  ASSERT_EQ(snnctl("train --config " + (dir / "c.json").string() + " --out " + (dir / "flag").string() +
                   " --tau 1.5 --vth 0.8 --timesteps 4 --surrogate sigmoid --seed 3 --jobs 1"),
            0);
  const RunConfig used = load_run_config(dir / "flag" / "config.json");
  EXPECT_EQ(used.lif.tau, 1.5);
  EXPECT_EQ(used.lif.v_th, 0.8);
  EXPECT_EQ(used.t_steps, 4u);
  EXPECT_EQ(used.lif.surrogate, Surrogate::sigmoid);
  EXPECT_EQ(used.seed, 3u);
  EXPECT_EQ(used.train.max_epochs, 3u);  // from the file
}

}  // namespace
}  // namespace snn::cli
