#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "toda/config.hpp"

namespace fs = std::filesystem;
using namespace toda;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

class CliRun : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("toda_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) {
    std::ofstream(dir_ / name) << text;
    return dir_ / name;
  }

  int run(const std::string& args) {
    const std::string cmd = std::string(TODA_CLI_PATH) + " " + args + " > " + (dir_ / "stdout.txt").string() +
                            " 2> " + (dir_ / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  fs::path dir_;
};

ConfigError config_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e;
  }
  ADD_FAILURE() << "no error for " << text;
  return ConfigError("", "");
}

}  // namespace

TEST(Config, MinimalSolveGetsDefaults) {
  const RunConfig c = parse_config(R"({"command":"solve","r":2,"weight":{"kind":"differential","coeffs":[[1,0]]}})");
  EXPECT_EQ(c.command, Command::Solve);
  EXPECT_EQ(c.r, 2);
  EXPECT_EQ(c.n_r, 128u);
  EXPECT_EQ(c.n_theta, 64u);
  EXPECT_DOUBLE_EQ(c.radius, 0.8);
  EXPECT_EQ(c.boundary, "lm");
  EXPECT_EQ(c.solve.scheme, Scheme::Newton);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(make_weight(c).rank, 2);
}

TEST(Config, UnknownKeysNamed) {
  EXPECT_EQ(config_error(R"({"command":"solve","gamma":1})").path(), "gamma");
  EXPECT_EQ(config_error(R"({"command":"solve","solver":{"gamma":1}})").path(), "solver.gamma");
  EXPECT_EQ(config_error(R"({"command":"solve","weight":{"kind":"zero","coeffs":[]}})").path(), "weight.coeffs");
}

TEST(Config, TypeAndValueErrorsNamed) {
  EXPECT_EQ(config_error(R"({"command":"solve","solver":{"max_newton":"many"}})").path(), "solver.max_newton");
  EXPECT_EQ(config_error(R"({"command":"solve","thermo":{"betas":[1, 0]}})").path(), "thermo.betas[1]");
  EXPECT_EQ(config_error(R"({"command":"solve","r":3,"weight":{"kind":"zero","r":2}})").path(), "weight.r");
  EXPECT_EQ(config_error(R"({"command":"solve","weight":{"kind":"differential","coeffs":[[0,0]]}})").path(),
            "weight.coeffs");
  EXPECT_EQ(config_error(R"({"command":"solve","lattice":{"radius":1.0}})").path(), "lattice.radius");
  EXPECT_EQ(config_error(R"({"command":"fly"})").path(), "command");
  EXPECT_EQ(config_error(R"({"r":2})").path(), "command");
  EXPECT_EQ(config_error("{not json").path(), "");
}

TEST(Config, StageOffLatticeRejected) {
  // 100 * (1 - 1/3) is not an integer
  EXPECT_EQ(config_error(R"({"command":"exhaust","lattice":{"rings_per_unit":100}})").path(), "stages.last");
  EXPECT_NO_THROW(parse_config(R"({"command":"exhaust","lattice":{"rings_per_unit":60},"stages":{"last":6}})"));
  // the same lattice is fine for commands that do not nest stages
  EXPECT_NO_THROW(parse_config(R"({"command":"solve","lattice":{"rings_per_unit":100}})"));
}

TEST(Config, MollifierScheduleChecked) {
  EXPECT_EQ(config_error(R"({"command":"mollify","schedule":[0.1,0.2]})").path(), "schedule");
  EXPECT_EQ(config_error(R"({"command":"mollify","schedule":[0.2,0.1]})").path(), "schedule");  // 0.8 + 0.2
}

TEST(Config, EchoRoundTrips) {
  const RunConfig a = parse_config(
      R"({"command":"exhaust","r":3,"weight":{"kind":"atoms","atoms":[[0.9,0,1]],"smooth":[[1,0,0.5]]},
          "lattice":{"rings_per_unit":60},"stages":{"last":6},"solver":{"scheme":"monotone"},"seed":11})");
  const RunConfig b = parse_config(to_json(a).dump());
  EXPECT_EQ(to_json(a), to_json(b));
  EXPECT_EQ(b.lemmas.seed, 11u);
}

TEST_F(CliRun, VerifyExactSuitePasses) {
  EXPECT_EQ(run("verify --suite exact -o " + (dir_ / "out").string()), 0) << slurp(dir_ / "stderr.txt");
  const auto rep = nlohmann::json::parse(slurp(dir_ / "out" / "report.json"));
  EXPECT_TRUE(rep["passed"].get<bool>());
  EXPECT_EQ(rep["cases"].size(), 3u);
}

TEST_F(CliRun, LemmasPrintsJsonSummary) {
  ASSERT_EQ(run("lemmas --samples 100000 --seed 7 -o " + (dir_ / "out").string()), 0);
  const auto j = nlohmann::json::parse(slurp(dir_ / "stdout.txt"));
  EXPECT_EQ(j["seed"], 7);
  EXPECT_EQ(j["samples_per_rank"], 100000);
  EXPECT_TRUE(j["passed"].get<bool>());
  EXPECT_EQ(j["ranks"].size(), 5u);
}

TEST_F(CliRun, NonConvergentBudgetExitsOne) {
  const fs::path cfg = write("c.json", R"({"r":2,"lattice":{"n_r":24,"n_theta":16},"solver":{"max_newton":1}})");
  EXPECT_EQ(run("solve -c " + cfg.string() + " -o " + (dir_ / "out").string()), 1);
  const auto rep = nlohmann::json::parse(slurp(dir_ / "out" / "report.json"));
  EXPECT_EQ(rep["status"], "non-convergence");
  EXPECT_EQ(nlohmann::json::parse(slurp(dir_ / "out" / "error.json"))["exit_code"], 1);
}

TEST_F(CliRun, ConfigErrorsExitTwo) {
  const fs::path bad = write("bad.json", R"({"gamma":1})");
  EXPECT_EQ(run("solve -c " + bad.string() + " -o " + (dir_ / "out").string()), 2);
  EXPECT_NE(slurp(dir_ / "stderr.txt").find("gamma"), std::string::npos);
  const fs::path other = write("other.json", R"({"command":"exhaust"})");
  EXPECT_EQ(run("solve -c " + other.string()), 2);
  EXPECT_EQ(run("export -o " + (dir_ / "out").string()), 2);  // no state
  EXPECT_EQ(run("frobnicate"), 2);
}

TEST_F(CliRun, SolveWritesArtifactsDeterministically) {
  const fs::path cfg = write(
      "c.json", R"({"r":3,"weight":{"kind":"differential","coeffs":[[0.3,0],[1,0]]},"lattice":{"n_r":24,"n_theta":16},
                    "thermo":{"betas":[0.5,2]},"raster":{"enabled":true,"pixels":32}})");
  ASSERT_EQ(run("solve -c " + cfg.string() + " -o " + (dir_ / "a").string()), 0) << slurp(dir_ / "stderr.txt");
  ASSERT_EQ(run("solve -c " + cfg.string() + " -o " + (dir_ / "b").string()), 0);
  for (const char* f : {"report.json", "u_1.csv", "u_2.csv", "E.csv", "u_1.ppm", "vol_2_log.ppm", "S.ppm", "F.ppm",
                        "state/u_1.toda1", "state/manifest.json"})
    EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
  const auto manifest = nlohmann::json::parse(slurp(dir_ / "a" / "manifest.json"));
  EXPECT_EQ(manifest["config"]["r"], 3);
  EXPECT_EQ(manifest["config"]["solver"]["max_newton"], 50);  // default echoed
  EXPECT_EQ(slurp(dir_ / "a" / "u_1.ppm").substr(0, 9), "P6\n32 32\n");
  const auto rep = nlohmann::json::parse(slurp(dir_ / "a" / "report.json"));
  EXPECT_EQ(rep["analysis"]["thermo"].size(), 2u);

  ASSERT_EQ(run("export --state " + (dir_ / "a" / "state").string() + " -o " + (dir_ / "e").string()), 0);
  EXPECT_EQ(slurp(dir_ / "e" / "u_2.csv"), slurp(dir_ / "a" / "u_2.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "e" / "E_log.ppm"));
}

TEST_F(CliRun, ExhaustWritesStagesAndTable) {
  const fs::path cfg = write("c.json", R"({"r":2,"lattice":{"rings_per_unit":60,"n_theta":16},"stages":{"last":4}})");
  ASSERT_EQ(run("exhaust -c " + cfg.string() + " -o " + (dir_ / "out").string()), 0) << slurp(dir_ / "stderr.txt");
  for (int i = 2; i <= 4; ++i) EXPECT_TRUE(fs::exists(dir_ / "out" / ("stage_" + std::to_string(i)) / "manifest.json"));
  EXPECT_EQ(slurp(dir_ / "out" / "discrepancy.csv").substr(0, 27), "stage,radius,discrepancy\n2,");
  const auto rep = nlohmann::json::parse(slurp(dir_ / "out" / "report.json"));
  EXPECT_LT(rep["limit_density_error"].get<double>(), 5e-3);
}
