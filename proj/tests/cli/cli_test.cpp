#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace {

namespace fs = std::filesystem;

const fs::path& root() {
  static const fs::path dir = fs::temp_directory_path() / "cep_cli_test";
  return dir;
}

int cepctl(const std::string& args) {
  const std::string cmd = std::string(CEPCTL_PATH) + " " + args + " > " + (root() / "last.log").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string dir(const std::string& name) { return (root() / name).string(); }

const std::string kModel = " --embedding-dim 4 --hidden-dim 16 --blocks 1 --epochs 1 --batch-size 256";

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::remove_all(root());
    fs::create_directories(root());
    ASSERT_EQ(cepctl("gen-data --profile skewed --seed 1 --out " + dir("data")), 0);
    ASSERT_EQ(cepctl("train --data " + dir("data") + " --seed 2 --out " + dir("model") + kModel), 0);
    ASSERT_EQ(cepctl("delete --data " + dir("data") + " --task A-1-1.0 --cond 'fact.price in 100 300' --seed 3 --out " +
                     dir("split")),
              0);
  }

  static std::string unlearn(const std::string& out, const std::string& extra) {
    return "unlearn --data " + dir("data") + " --split " + dir("split") + " --model " + dir("model") +
           "/model.ckpt --seed 4 --ns 5 --finetune-epochs 1 --out " + dir(out) + " " + extra;
  }
};

TEST_F(CliTest, StageOutputs) {
  EXPECT_TRUE(fs::exists(root() / "data" / "manifest.json"));
  EXPECT_TRUE(fs::exists(root() / "model" / "model.ckpt"));
  EXPECT_TRUE(fs::exists(root() / "model" / "manifest.json"));
  EXPECT_TRUE(fs::exists(root() / "split" / "task.json"));
}

TEST_F(CliTest, CepTimingRows) {
  ASSERT_EQ(cepctl(unlearn("cep", "--method cep --alpha 0.5")), 0);
  const auto timing = slurp(root() / "cep" / "timing.csv");
  EXPECT_NE(timing.find("\nprune_seconds,"), std::string::npos) << timing;
  EXPECT_NE(timing.find("\nfinetune_seconds,"), std::string::npos) << timing;
  EXPECT_TRUE(fs::exists(root() / "cep" / "model.ckpt"));
}

TEST_F(CliTest, TogglesOffMatchFinetune) {
  ASSERT_EQ(cepctl(unlearn("ft", "--method finetune")), 0);
  ASSERT_EQ(cepctl(unlearn("cep_off", "--method cep --no-domain-prune --no-sensitivity-prune")), 0);
  const auto a = slurp(root() / "ft" / "model.ckpt");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, slurp(root() / "cep_off" / "model.ckpt"));
}

TEST_F(CliTest, EvalWritesReports) {
  ASSERT_EQ(cepctl(unlearn("stale", "--method stale")), 0);
  ASSERT_EQ(cepctl("eval --data " + dir("data") + " --split " + dir("split") + " --model " + dir("stale") +
                   "/model.ckpt --method stale --queries 20 --samples 32 --seed 6 --out " + dir("eval")),
            0);
  const auto summary = slurp(root() / "eval" / "summary.csv");
  EXPECT_TRUE(summary.starts_with("set,included,model_zero,true_zero,p50,p75,p95,p99\n")) << summary;
  EXPECT_TRUE(fs::exists(root() / "eval" / "report.csv"));
  ASSERT_EQ(cepctl("report --runs " + dir("eval") + " --out " + dir("report")), 0);
  EXPECT_TRUE(fs::exists(root() / "report" / "table.md"));
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(cepctl("train --data " + dir("nowhere") + " --out " + dir("x") + kModel), 3);
  EXPECT_EQ(cepctl("delete --data " + dir("data") + " --task Q-1-1.0 --cond fact --out " + dir("x")), 2);
  EXPECT_EQ(cepctl("unlearn --data " + dir("data") + " --split " + dir("split") + " --method finetune --out " + dir("x")),
            3);
  EXPECT_EQ(cepctl("frobnicate"), 2);
  {
    std::ofstream bad(root() / "bad_workload.txt");
    bad << "scope=fact | fact.kind = \n";
  }
  EXPECT_EQ(cepctl("eval --data " + dir("data") + " --split " + dir("split") + " --model " + dir("model") +
                   "/model.ckpt --workload " + (root() / "bad_workload.txt").string() + " --out " + dir("x")),
            2);
  EXPECT_NE(slurp(root() / "last.log").find("line 1"), std::string::npos);
}

TEST_F(CliTest, RerunIsByteIdentical) {
  {
    std::ofstream m(root() / "manifest.json");
    m << R"({"seeds":{"data":1,"model":2,"delete":3,"unlearn":4,"workload":5,"eval":6},)"
      << R"("data":{"profile":"uniform"},)"
      << R"("model":{"embedding_dim":4,"hidden_dim":16,"residual_blocks":1,"epochs":1},)"
      << R"("task":{"name":"A-1-0.5","conditions":["fact.price in 100 300"]},)"
      << R"("cep":{"alpha":0.5,"ns":5,"finetune_epochs":1},"workload":{"queries":20},"eval":{"samples":32}})";
  }
  ASSERT_EQ(cepctl("run --manifest " + (root() / "manifest.json").string() + " --out " + dir("run1")), 0);
  ASSERT_EQ(cepctl("run --manifest " + (root() / "manifest.json").string() + " --out " + dir("run2")), 0);
  const auto a = slurp(root() / "run1" / "summary.csv");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, slurp(root() / "run2" / "summary.csv"));
}

}  // namespace
