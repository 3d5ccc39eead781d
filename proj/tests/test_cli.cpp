#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "iay/cli.hpp"

using namespace iay;
namespace fs = std::filesystem;

namespace {

const std::string kData = IAY_DATA_DIR;

fs::path fresh(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("iay_test_cli_" + name);
  fs::remove_all(p);
  return p;
}

int run(std::vector<std::string> args, std::string* out_text = nullptr) {
  args.insert(args.begin(), "iay_cli");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int rc = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str() + err.str();
  return rc;
}

std::string slurp(const fs::path& p) { return read_text(p.string()); }

}  // namespace

TEST(Cli, ValidatePassAndOrderFailure) {
  const fs::path d = fresh("validate");
  EXPECT_EQ(run({"validate", kData + "/imrv.json", "--out-dir", d.string()}), 0);
  EXPECT_TRUE(fs::exists(d / "validate.json"));
  const fs::path bad = d / "bad.json";
  write_text(bad.string(), R"([{"atoms": [[-2, 0.5], [2, 0.5]]}, {"atoms": [[-1, 0.5], [1, 0.5]]}])");
  EXPECT_EQ(run({"validate", bad.string(), "--out-dir", d.string()}), 2);
}

TEST(Cli, InputErrorsExitOne) {
  const fs::path d = fresh("input");
  std::string text;
  EXPECT_EQ(run({"boundaries", (d / "missing.json").string(), "--out-dir", d.string()}, &text), 1);
  EXPECT_NE(text.find("cannot open"), std::string::npos);
  EXPECT_EQ(run({"boundaries", "--no-such-flag"}), 1);
  EXPECT_EQ(run({"simulate", kData + "/pair.json", "--out-dir", d.string()}), 1);
  EXPECT_EQ(run({}), 1);
}

TEST(Cli, BoundariesCsv) {
  const fs::path d = fresh("boundaries");
  EXPECT_EQ(run({"boundaries", kData + "/imrv.json", "--out", "b.csv", "--out-dir", d.string()}), 0);
  const std::string csv = slurp(d / "b.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "y,xi_1,xi_2,xi_3,K_1,K_2,K_3,j_3");
  EXPECT_TRUE(fs::exists(d / "boundaries.json"));
}

TEST(Cli, SimulateIsDeterministicAcrossThreads) {
  const fs::path a = fresh("sim_a"), b = fresh("sim_b");
  setenv("IAY_THREADS", "1", 1);
  EXPECT_EQ(run({"simulate", kData + "/imrv.json", "--seed", "3", "--paths", "3000", "--out-dir",
                 a.string()}),
            0);
  setenv("IAY_THREADS", "4", 1);
  EXPECT_EQ(run({"simulate", kData + "/imrv.json", "--seed", "3", "--paths", "3000", "--out-dir",
                 b.string()}),
            0);
  unsetenv("IAY_THREADS");
  EXPECT_EQ(slurp(a / "mc.bin"), slurp(b / "mc.bin"));
  EXPECT_EQ(slurp(a / "simulate.json"), slurp(b / "simulate.json"));
  EXPECT_EQ(fs::file_size(a / "mc.bin"), 3000u * 6u * 8u);
  EXPECT_TRUE(fs::exists(a / "mc.bin.json"));
}

TEST(Cli, OracleAndVerify) {
  const fs::path d = fresh("verify");
  EXPECT_EQ(run({"oracle", kData + "/counterexample.json", "--out-dir", d.string()}), 0);
  EXPECT_TRUE(fs::exists(d / "oracle_laws.csv"));
  EXPECT_EQ(run({"verify", kData + "/imrv.json", "--out-dir", d.string()}), 0);
  const json v = json::parse(slurp(d / "verify.json"));
  EXPECT_TRUE(v["pass"].get<bool>());
  EXPECT_EQ(run({"verify", kData + "/counterexample.json", "--out-dir", d.string()}), 2);
}

TEST(Cli, PriceWithConfigAndOverride) {
  const fs::path d = fresh("price");
  const fs::path cfg = d / "cfg.json";
  write_text(cfg.string(), json({{"command", "price"},
                                 {"measures", kData + "/pair.json"},
                                 {"out_dir", d.string()},
                                 {"grid_step", 0.5},
                                 {"payoff_points", 2001}})
                               .dump());
  EXPECT_EQ(run({"--config", cfg.string()}), 0);
  const json coarse = json::parse(slurp(d / "price.json"));
  EXPECT_EQ(run({"--config", cfg.string(), "--payoff-points", "20001"}), 0);
  const json fine = json::parse(slurp(d / "price.json"));
  EXPECT_EQ(fine["payoff_points"], 20001);
  EXPECT_NEAR(fine["lookback_bound"].get<double>(), std::log(2.0), 1e-8);
  EXPECT_EQ(coarse["payoff_points"], 2001);
  EXPECT_TRUE(fine["audit"]["superhedge"]["pass"].get<bool>());
  const std::string csv = slurp(d / "price.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "y,barrier_bound");
  // grid_step 0.5 from the config: 0, 0.5, 1, 1.5 plus the barycentre 1.
  EXPECT_LT(std::count(csv.begin(), csv.end(), '\n'), 8);
}

TEST(Cli, CounterexampleExitsTwo) {
  const fs::path d = fresh("counter");
  std::string text;
  EXPECT_EQ(run({"counterexample", "--out-dir", d.string()}, &text), 2);
  EXPECT_NE(text.find("FAILS (expected)"), std::string::npos);
  EXPECT_TRUE(fs::exists(d / "counterexample.json"));
}

TEST(Cli, CorrectN3) {
  const fs::path d = fresh("n3");
  EXPECT_EQ(run({"correct-n3", kData + "/counterexample.json", "--out-dir", d.string()}), 0);
  const std::string csv = slurp(d / "corrected_n3.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "y,xi3_tilde,K3_tilde");
  const json j = json::parse(slurp(d / "corrected_n3.json"));
  EXPECT_EQ(j["windows"].size(), 1u);
  EXPECT_EQ(run({"correct-n3", kData + "/imrv.json", "--out-dir", d.string()}), 0);
  EXPECT_EQ(run({"correct-n3", kData + "/pair.json", "--out-dir", d.string()}), 1);
}
