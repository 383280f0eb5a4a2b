// Runs the risbr executable and checks exit codes, outputs and determinism.
#include <gtest/gtest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "risbr_cli_test";

int run(const std::string& args, std::string* out = nullptr) {
  fs::create_directories(kWork);
  const fs::path log = kWork / "stdout.txt";
  const std::string cmd = std::string(RISBR_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  if (out) {
    std::ifstream in(log);
    std::ostringstream ss;
    ss << in.rdbuf();
    *out = ss.str();
  }
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path write_config(const std::string& name, const std::string& text) {
  fs::create_directories(kWork);
  const fs::path p = kWork / name;
  std::ofstream(p) << text;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// a fast configuration for the experiment commands
const char* kQuick = R"({"system": {"M": 16}, "experiment": {"trials": 2, "eta_grid": [0.3, 0.7]}})";

}  // namespace

TEST(Cli, SolveDefaultsPrintsSurvivability) {
  std::string out;
  ASSERT_EQ(run("solve --seed 1", &out), 0) << out;
  const auto pos = out.find("psi");
  ASSERT_NE(pos, std::string::npos);
  const double psi = std::stod(out.substr(pos + 3));
  EXPECT_GE(psi, 0.0);
  EXPECT_LE(psi, 1.0);
}

TEST(Cli, SolveWritesDumpAndManifest) {
  const fs::path dir = kWork / "solve";
  fs::remove_all(dir);
  ASSERT_EQ(run("solve --seed 2 --no-ris --out " + dir.string()), 0);
  const auto dump = nlohmann::json::parse(slurp(dir / "solve.json"));
  EXPECT_EQ(dump.at("phase").size(), 0u);
  EXPECT_TRUE(fs::exists(dir / "solve.manifest.json"));
}

TEST(Cli, MalformedJsonReportsLocation) {
  const auto cfg = write_config("bad.json", "{\n  \"system\": {\"N\": 4\n  \"M\": 2}\n}");
  std::string out;
  EXPECT_EQ(run("solve --config " + cfg.string(), &out), 2);
  EXPECT_NE(out.find("line 3, column"), std::string::npos) << out;
}

TEST(Cli, ConfigErrorsExitTwo) {
  EXPECT_EQ(run("validate --config " + write_config("s0.json", R"({"system": {"sigma2": 0}})").string()), 2);
  EXPECT_EQ(run("validate --config " + write_config("a12.json", R"({"traffic": {"alpha": 1.2}})").string()), 2);
  EXPECT_EQ(run("solve --config " + write_config("unk.json", R"({"sytem": {}})").string()), 2);
  EXPECT_EQ(run("solve --config " + (kWork / "missing.json").string()), 2);
  EXPECT_EQ(run("solve --format xml"), 2);
  EXPECT_EQ(run("solve --strategy random"), 2);
  EXPECT_EQ(run(""), 2);
}

TEST(Cli, ValidateDefaultsAllPass) {
  std::string out;
  EXPECT_EQ(run("validate", &out), 0) << out;
  for (const char* name : {"surrogate tightness", "surrogate gradients", "cascade identity", "tiny-instance oracle"})
    EXPECT_NE(out.find(std::string("PASS ") + name), std::string::npos) << out;
}

TEST(Cli, SweepTrafficRowContractAndDeterminism) {
  const auto cfg = write_config("quick.json", kQuick);
  const fs::path a = kWork / "sweep_a", b = kWork / "sweep_b";
  fs::remove_all(a);
  fs::remove_all(b);
  ASSERT_EQ(run("sweep-traffic --config " + cfg.string() + " --out " + a.string()), 0);
  ASSERT_EQ(run("sweep-traffic --config " + cfg.string() + " --out " + b.string()), 0);
  const std::string csv = slurp(a / "traffic_sweep.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2 * 2 * 2);
  EXPECT_EQ(csv, slurp(b / "traffic_sweep.csv"));
  EXPECT_EQ(slurp(a / "traffic_sweep.manifest.json"), slurp(b / "traffic_sweep.manifest.json"));
}

TEST(Cli, DefaultSweepHasThirtySixRows) {
  // 9 eta values x 2 patterns x RIS on/off, one trial each to keep this quick
  const auto cfg = write_config("rows.json", R"({"system": {"M": 8}, "experiment": {"trials": 1}})");
  const fs::path dir = kWork / "rows";
  fs::remove_all(dir);
  ASSERT_EQ(run("sweep-traffic --config " + cfg.string() + " --out " + dir.string()), 0);
  const std::string csv = slurp(dir / "traffic_sweep.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 36);
}

TEST(Cli, ConvergenceFiveRows) {
  const auto cfg = write_config("conv.json", R"({"system": {"M": 32}, "solver": {"E": 5, "tau_out": "inf"}})");
  const fs::path dir = kWork / "conv";
  fs::remove_all(dir);
  ASSERT_EQ(run("convergence --config " + cfg.string() + " --out " + dir.string() + " --format json"), 0);
  const auto j = nlohmann::json::parse(slurp(dir / "convergence.json"));
  EXPECT_EQ(j.at("rows").size(), 5u);
  EXPECT_TRUE(fs::exists(dir / "convergence.manifest.json"));
}

TEST(Cli, SnapshotAndAntennaSweepWriteTables) {
  const auto cfg = write_config("quick2.json", kQuick);
  const fs::path dir = kWork / "misc";
  fs::remove_all(dir);
  ASSERT_EQ(run("snapshot --config " + cfg.string() + " --out " + dir.string()), 0);
  ASSERT_EQ(run("sweep-antennas --config " + cfg.string() + " --out " + dir.string() + " --strategy greedy"), 0);
  const std::string snap = slurp(dir / "snapshot.csv");
  EXPECT_EQ(std::count(snap.begin(), snap.end(), '\n'), 1 + 7);
  const std::string ant = slurp(dir / "antenna_sweep.csv");
  EXPECT_EQ(std::count(ant.begin(), ant.end(), '\n'), 1 + 3 * 2 * 2);
  EXPECT_TRUE(fs::exists(dir / "antenna_sweep.manifest.json"));
}

TEST(Cli, ThreadCapDoesNotChangeOutput) {
  const auto cfg = write_config("threads.json", kQuick);
  const fs::path a = kWork / "t1", b = kWork / "t3";
  fs::remove_all(a);
  fs::remove_all(b);
  ASSERT_EQ(run("sweep-traffic --config " + cfg.string() + " --out " + a.string()), 0);
  ASSERT_EQ(std::system(("RISBR_THREADS=3 " + std::string(RISBR_CLI) + " sweep-traffic --config " + cfg.string() +
                         " --out " + b.string() + " > /dev/null").c_str()),
            0);
  EXPECT_EQ(slurp(a / "traffic_sweep.csv"), slurp(b / "traffic_sweep.csv"));
}
