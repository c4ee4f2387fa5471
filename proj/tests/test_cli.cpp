#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "skewlab/cli.hpp"

using namespace skewlab;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "skewlab");
  std::ostringstream out, err;
  const int code = run_command(args, out, err);
  return {code, out.str(), err.str()};
}

std::string config_path(const char* name) {
  return std::string(SKEWLAB_SOURCE_DIR) + "/configs/" + name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    std::random_device rd;
    dir_ = fs::temp_directory_path() /
           ("skewlab_cli_" + std::to_string(rd()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& name, const std::string& text) {
    const auto p = dir_ / name;
    std::ofstream(p) << text;
    return p.string();
  }

  fs::path dir_;
};

const char* kSmallStudy = R"j({
  "coefficients": {
    "b_eps": {"expr": "(1/(2*eps))*indicator(-eps, eps, x)", "breakpoints": ["-eps", "eps"]}
  },
  "limit_f": {
    "left": {"value": "exp(1)*x", "d1": "exp(1)", "d2": "0"},
    "right": {"value": "exp(-1)*x", "d1": "exp(-1)", "d2": "0"}
  },
  "eps_ladder": [0.4, 0.2],
  "n_steps": 50,
  "n_paths": 300,
  "master_seed": 3,
  "multi_time": true
})j";

}  // namespace

TEST_F(CliTest, CheckTrivialPasses) {
  const auto r = run({"check", "--config", config_path("trivial_check.json"), "--out", dir_.string()});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  const auto doc = nlohmann::json::parse(slurp(dir_ / "condition_report.json"));
  for (const auto& row : doc["condition_aa"]) EXPECT_EQ(row["residual"].get<double>(), 0.0);
  EXPECT_TRUE(doc["verdict"]["pass"].get<bool>());
  EXPECT_TRUE(doc.contains("config_echo"));
}

// The aa) residual equals eps for x >= eps, so 0.02 misses the 1e-2 tolerance.
TEST_F(CliTest, CheckCanonicalReportsVerdict) {
  const auto r = run({"check", "--config", config_path("canonical_study.json"), "--out", dir_.string()});
  EXPECT_EQ(r.code, kExitVerdictFail) << r.err;
  const auto doc = nlohmann::json::parse(slurp(dir_ / "condition_report.json"));
  EXPECT_NEAR(doc["alpha"].get<double>(), std::tanh(1.0), 1e-15);
  EXPECT_TRUE(doc["verdict"]["condition_a"]["pass"].get<bool>());
  EXPECT_FALSE(doc["verdict"]["pass"].get<bool>());
}

TEST_F(CliTest, InvalidSkewIsAnError) {
  const auto cfg = write("bad.json", R"j({"coefficients": {}, "skew": {"beta": 1.5}, "eps_ladder": [0.1]})j");
  const auto r = run({"simulate", "--config", cfg, "--out", dir_.string()});
  EXPECT_EQ(r.code, kExitError);
  EXPECT_NE(r.err.find("|beta| < 1"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir_ / "ensemble.csv"));
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run({}).code, kExitError);
  EXPECT_EQ(run({"simulate"}).code, kExitError);
  EXPECT_EQ(run({"frobnicate"}).code, kExitError);
  EXPECT_EQ(run({"verify-lemma", "--config", config_path("skew_bm.json"), "--which", "2"}).code,
            kExitError);
  EXPECT_EQ(run({"check", "--config", (dir_ / "missing.json").string()}).code, kExitError);
  EXPECT_EQ(run({"--help"}).code, kExitOk);
}

TEST_F(CliTest, SimulateIsDeterministic) {
  const auto cfg = write("c.json", R"j({"coefficients": {}, "skew": {"beta": 0.3},
    "eps_ladder": [0.1], "n_steps": 20, "n_paths": 4, "master_seed": 9})j");
  const auto a = dir_ / "a", b = dir_ / "b", c = dir_ / "c";
  ASSERT_EQ(run({"simulate", "--config", cfg, "--out", a.string()}).code, kExitOk);
  ASSERT_EQ(run({"simulate", "--config", cfg, "--out", b.string()}).code, kExitOk);
  ASSERT_EQ(run({"simulate", "--config", cfg, "--out", c.string(), "--seed", "10"}).code, kExitOk);
  const auto text = slurp(a / "ensemble.csv");
  EXPECT_EQ(text, slurp(b / "ensemble.csv"));
  EXPECT_NE(text, slurp(c / "ensemble.csv"));
  EXPECT_EQ(text.substr(0, text.find('\n')), "t,path_0,path_1,path_2,path_3");
  std::size_t rows = 0;
  for (char ch : text) rows += ch == '\n';
  EXPECT_EQ(rows, 22u);
}

TEST_F(CliTest, EpsRunHonoursStepRule) {
  const auto cfg = write("c.json", R"j({"coefficients": {}, "eps_ladder": [0.1],
    "n_steps": 10, "n_paths": 2})j");
  ASSERT_EQ(run({"local-time", "--config", cfg, "--out", dir_.string(), "--eps", "0.1"}).code, kExitOk);
  std::size_t rows = 0;
  for (char ch : slurp(dir_ / "local_time.csv")) rows += ch == '\n';
  EXPECT_EQ(rows, 1002u);
}

TEST_F(CliTest, VerifyLemmaIdentityMap) {
  const auto cfg = write("c.json", R"j({"coefficients": {}, "eps_ladder": [0.1],
    "n_steps": 200, "n_paths": 50})j");
  const auto r = run({"verify-lemma", "--config", cfg, "--which", "1", "--out", dir_.string()});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  const auto doc = nlohmann::json::parse(slurp(dir_ / "lemma1_report.json"));
  EXPECT_EQ(doc["mean_residual"].get<double>(), 0.0);
}

TEST_F(CliTest, StudyReproducesFromEcho) {
  const auto cfg = write("c.json", kSmallStudy);
  const auto a = dir_ / "a", b = dir_ / "b";
  const auto r = run({"study", "--config", cfg, "--out", a.string(), "--seed", "11"});
  ASSERT_NE(r.code, kExitError) << r.err;
  const auto report = nlohmann::json::parse(slurp(a / "study_report.json"));
  EXPECT_EQ(report["config_echo"]["master_seed"].get<std::uint64_t>(), 11u);
  const auto echoed = write("echo.json", report["config_echo"].dump(2));
  EXPECT_EQ(run({"study", "--config", echoed, "--out", b.string()}).code, r.code);
  for (const char* f : {"condition_report.json", "study_report.json"})
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
}
