#include <cstdlib>
#include <filesystem>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "ltof/io.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(LTOF_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("ltof_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    config_ = (dir_ / "run.toml").string();
    ltof::write_file_atomic(config_,
                            "[problem]\nid = \"toy2d\"\nsamples = 100\n[features]\nk = [1]\n"
                            "[model]\nhidden_width = 16\n[train]\nmax_epochs = 2\nbatch_size = 25\n"
                            "[experiment]\nseeds = 1\nout = \"" + (dir_ / "out").string() + "\"\n");
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path dir_;
  std::string config_;
};

}  // namespace

TEST_F(Cli, ConfigErrorsExitWithTwo) {
  EXPECT_EQ(run("gen --config " + (dir_ / "missing.toml").string()), 2);
  EXPECT_EQ(run("train --config " + config_ + " --method bogus"), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  ltof::write_file_atomic(config_, "[problem]\nunknown_key = 1\n");
  EXPECT_EQ(run("gen --config " + config_), 2);
}

TEST_F(Cli, Dc3OnPortfolioNeedsEqualityMode) {
  ltof::write_file_atomic(config_, "[problem]\nid = \"portfolio\"\n");
  EXPECT_EQ(run("train --config " + config_ + " --method dc3"), 2);
}

TEST_F(Cli, TrainWithoutDataIsAMissingPrerequisite) {
  EXPECT_EQ(run("train --config " + config_ + " --method pdl"), 4);
}

TEST_F(Cli, EvalWithoutCheckpointIsAnIoError) {
  EXPECT_EQ(run("gen --config " + config_), 0);
  EXPECT_EQ(run("eval --config " + config_ + " --method pdl"), 1);
}

TEST_F(Cli, GenTrainEvalReportSucceed) {
  EXPECT_EQ(run("gen --config " + config_), 0);
  const std::string first = ltof::read_file((dir_ / "out" / "data" / "dataset_k1.csv").string());
  EXPECT_EQ(run("gen --config " + config_), 0);
  EXPECT_EQ(ltof::read_file((dir_ / "out" / "data" / "dataset_k1.csv").string()), first);
  EXPECT_EQ(run("train --config " + config_ + " --method pdl"), 0);
  EXPECT_EQ(run("eval --config " + config_ + " --method pdl"), 0);
  EXPECT_EQ(run("sweep --config " + config_ + " --method pdl"), 0);
  EXPECT_EQ(run("report --config " + config_), 0);
  EXPECT_TRUE(fs::exists(dir_ / "out" / "report.md"));
}

TEST_F(Cli, SeedEnvironmentAndFlagPrecedence) {
  EXPECT_EQ(run("gen --config " + config_), 0);
  EXPECT_EQ(run("train --config " + config_ + " --method pdl --seed 3"), 0);
  EXPECT_TRUE(fs::exists(dir_ / "out" / "cells" / "pdl_k1_s3" / "cell.json"));
  EXPECT_EQ(std::system(("LTOF_SEED=5 " + std::string(LTOF_CLI_PATH) + " train --config " + config_ +
                         " --method pdl >/dev/null 2>&1").c_str()), 0);
  EXPECT_TRUE(fs::exists(dir_ / "out" / "cells" / "pdl_k1_s5" / "cell.json"));
  EXPECT_EQ(std::system(("LTOF_SEED=abc " + std::string(LTOF_CLI_PATH) + " gen --config " + config_ +
                         " >/dev/null 2>&1").c_str()) >> 8, 2);
}
