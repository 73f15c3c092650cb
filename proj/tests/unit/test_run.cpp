#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "margint/run.hpp"

using namespace margint;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class RunTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("margint_run_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  RunOptions options(const fs::path& sub = "out") const {
    RunOptions o;
    o.output_dir = dir_ / sub;
    o.use_env = false;
    return o;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(RunTest, DryRunPrintsBandwidths) {
  RunOptions o = options();
  o.dry_run = true;
  std::ostringstream log;
  EXPECT_EQ(run({"study", "rate"}, o, log), kExitOk);
  EXPECT_NE(log.str().find("8192"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir_ / "out"));
}

TEST_F(RunTest, ConfigurationErrorsExitWithTwo) {
  std::ostringstream log;
  RunOptions o = options();
  o.config_file = dir_ / "missing.conf";
  EXPECT_EQ(run({"simulate"}, o, log), kExitConfig);
  o = options();
  o.overrides = {"kernel.order_kprime=4"};
  EXPECT_EQ(run({"simulate"}, o, log), kExitConfig);
  o.overrides = {"not-a-pair"};
  EXPECT_EQ(run({"simulate"}, o, log), kExitConfig);
  EXPECT_EQ(run({"study", "speed"}, options(), log), kExitConfig);
  EXPECT_EQ(run({"dance"}, options(), log), kExitConfig);
}

TEST_F(RunTest, SimulateThenEstimateFromFile) {
  std::ostringstream log;
  RunOptions o = options();
  o.horizon = 512;
  ASSERT_EQ(run({"simulate"}, o, log), kExitOk) << log.str();
  ASSERT_TRUE(fs::exists(dir_ / "out" / "path.csv"));
  ASSERT_TRUE(fs::exists(dir_ / "out" / "manifest-simulate.json"));
  const std::string csv = slurp(dir_ / "out" / "path.csv");
  EXPECT_EQ(csv.rfind("# config_hash=", 0), 0u);

  RunOptions e = options("est");
  e.path_file = dir_ / "out" / "path.csv";
  e.overrides = {"estimate.grid_points=5", "components.grid_points=9"};
  ASSERT_EQ(run({"components"}, e, log), kExitOk) << log.str();
  ASSERT_EQ(run({"estimate"}, e, log), kExitOk) << log.str();
  EXPECT_TRUE(fs::exists(dir_ / "est" / "components_1.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "est" / "components_2.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "est" / "estimate.csv"));
  const auto manifest = nlohmann::json::parse(slurp(dir_ / "est" / "manifest-components.json"));
  EXPECT_EQ(manifest["tool"], "margint");
  ASSERT_EQ(manifest["outputs"].size(), 2u);
  EXPECT_EQ(manifest["outputs"][0]["file"], "components_1.csv");
  EXPECT_EQ(manifest["outputs"][0]["fnv1a64"].get<std::string>().size(), 16u);
}

TEST_F(RunTest, BadPathFileExitsWithThree) {
  fs::create_directories(dir_);
  std::ofstream(dir_ / "broken.csv") << "t,x_1,x_2,y\n0,0.5\n";
  std::ostringstream log;
  RunOptions o = options();
  o.path_file = dir_ / "broken.csv";
  EXPECT_EQ(run({"components"}, o, log), kExitData);
  o.path_file = dir_ / "absent.csv";
  EXPECT_EQ(run({"estimate"}, o, log), kExitData);
}

TEST_F(RunTest, StudyRerunIsBitwiseIdentical) {
  const std::vector<std::string> small{"study.rate.T=512,1024,2048", "study.rate.replicas=4"};
  std::ostringstream log;
  RunOptions a = options("a");
  a.overrides = small;
  RunOptions b = options("b");
  b.overrides = small;
  b.overrides.push_back("workers=2");
  const int ca = run({"study", "rate"}, a, log);
  const int cb = run({"study", "rate"}, b, log);
  EXPECT_TRUE(ca == kExitOk || ca == kExitStudyFail) << log.str();
  EXPECT_EQ(ca, cb);
  for (const char* f : {"study_rate_replicas.csv", "study_rate_series.csv"})
    EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
  const auto ma = nlohmann::json::parse(slurp(dir_ / "a" / "manifest-study_rate.json"));
  const auto mb = nlohmann::json::parse(slurp(dir_ / "b" / "manifest-study_rate.json"));
  EXPECT_EQ(ma["results_hash"], mb["results_hash"]);
  EXPECT_EQ(ma["config_hash"], mb["config_hash"]);
}

TEST_F(RunTest, SelftestPasses) {
  std::ostringstream log;
  EXPECT_EQ(run({"selftest"}, options(), log), kExitOk) << log.str();
  const auto doc = nlohmann::json::parse(slurp(dir_ / "out" / "selftest.json"));
  EXPECT_TRUE(doc["passed"].get<bool>());
}
