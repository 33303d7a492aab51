#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <gtest/gtest.h>

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CUTSTOKES_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("cutstokes_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string tiny() const {
    return "--mesh-size 0.4 --dt 0.25 --final-time 0.5 --nu 1 -q --output " + dir_.string();
  }
  fs::path dir_;
};

}  // namespace

TEST_F(Cli, HelpExitsZero) { EXPECT_EQ(run_cli("--help"), 0); }

TEST_F(Cli, MissingSubcommandIsUsageError) { EXPECT_EQ(run_cli(""), 2); }

TEST_F(Cli, RunWritesOutputs) {
  ASSERT_EQ(run_cli("run " + tiny() + " --force"), 0);
  EXPECT_TRUE(fs::exists(dir_ / "config.ini"));
  EXPECT_TRUE(fs::exists(dir_ / "summary.csv"));
  const auto csv = slurp(dir_ / "errors.csv");
  EXPECT_EQ(csv.rfind("step,t,err_l2_u,err_h1_u,err_l2_p,dof_count\n", 0), 0u);
  EXPECT_NE(csv.find("\n1,"), std::string::npos);
  EXPECT_NE(csv.find("\n2,"), std::string::npos);
  EXPECT_NE(csv.find("\ntotal,"), std::string::npos);
}

TEST_F(Cli, WrittenConfigReproducesRun) {
  ASSERT_EQ(run_cli("run " + tiny() + " --force --reproducible true"), 0);
  const auto first = slurp(dir_ / "summary.csv");
  const fs::path again = dir_ / "again";
  ASSERT_EQ(run_cli("run -c " + (dir_ / "config.ini").string() + " -q --force --output " + again.string()), 0);
  EXPECT_EQ(slurp(again / "summary.csv"), first);
  EXPECT_EQ(slurp(again / "errors.csv"), slurp(dir_ / "errors.csv"));
}

TEST_F(Cli, DoesNotOverwriteWithoutForce) {
  ASSERT_EQ(run_cli("run " + tiny()), 0);
  ASSERT_EQ(run_cli("run " + tiny()), 0);
  int runs = 0;
  for (const auto& e : fs::directory_iterator(dir_)) runs += e.is_directory();
  EXPECT_EQ(runs, 2);
}

TEST_F(Cli, ConfigErrorsExitTwo) {
  EXPECT_EQ(run_cli("run " + tiny() + " --k 1"), 2);
  EXPECT_EQ(run_cli("run " + tiny() + " --set physics.viscosity=1"), 2);
  EXPECT_EQ(run_cli("run " + tiny() + " --set nonsense"), 2);
  EXPECT_EQ(run_cli("run -c " + (dir_ / "missing.ini").string()), 2);
  EXPECT_EQ(run_cli("study bogus"), 2);
}

TEST_F(Cli, SetOverridesConfigFile) {
  {
    std::ofstream ini(dir_ / "c.ini");
    ini << "[physics]\nnu = 0.5\n";
  }
  ASSERT_EQ(run_cli("run -c " + (dir_ / "c.ini").string() + " " + tiny() + " --force --set physics.nu=0.25"), 0);
  // dedicated --nu 1 from tiny() wins over both
  EXPECT_NE(slurp(dir_ / "config.ini").find("nu = 1\n"), std::string::npos);
}

TEST_F(Cli, StudyWritesCsv) {
  ASSERT_EQ(run_cli("study robustness --force -q --jobs 1 --robustness-h 0.4 --output " + dir_.string() +
                    " --set discretization.dt=0.5 --reproducible true"),
            0);
  const auto csv = slurp(dir_ / "robustness.csv");
  int lines = 0;
  for (char ch : csv) lines += ch == '\n';
  EXPECT_EQ(lines, 26);
}

TEST_F(Cli, VerifyPasses) { EXPECT_EQ(run_cli("verify -q"), 0); }
