#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int status = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Outcome run_cli(const std::string& args) {
  const fs::path tmp = fs::temp_directory_path() / "adfl_cli_test";
  fs::create_directories(tmp);
  const auto out = tmp / "stdout.txt", err = tmp / "stderr.txt";
  const std::string cmd = std::string(ADFL_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int raw = std::system(cmd.c_str());
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(out), slurp(err)};
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / "adfl_cli_test" / name;
  fs::remove_all(p);
  return p;
}

const std::string kConfigs = ADFL_CONFIG_DIR;

}  // namespace

TEST(Cli, MissingConfigIsConfigError) {
  const auto r = run_cli("run --config /no/such/file.ini --out " + scratch("missing").string());
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("/no/such/file.ini"), std::string::npos);
  EXPECT_NE(r.err.find("\"error\":\"config\""), std::string::npos);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run_cli("").status, 1);
  EXPECT_EQ(run_cli("run --out x").status, 1);
  EXPECT_EQ(run_cli("--version").status, 0);
}

TEST(Cli, MinimalRunWritesArtifacts) {
  const auto dir = scratch("minimal");
  const auto r = run_cli("run --config " + kConfigs + "/minimal.ini --out " + dir.string());
  ASSERT_EQ(r.status, 0) << r.err;
  for (const char* f : {"report.csv", "ledger.csv", "schedule.csv", "manifest.txt"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  EXPECT_NE(slurp(dir / "manifest.txt").find("[results]"), std::string::npos);
}

TEST(Cli, SeedOverrideIsDeterministic) {
  const auto a = scratch("seed_a"), b = scratch("seed_b"), c = scratch("seed_c");
  const std::string base = "run --config " + kConfigs + "/minimal.ini --seed 7 --out ";
  ASSERT_EQ(run_cli(base + a.string()).status, 0);
  ASSERT_EQ(run_cli(base + b.string()).status, 0);
  EXPECT_EQ(slurp(a / "report.csv"), slurp(b / "report.csv"));
  ASSERT_EQ(run_cli("run --config " + kConfigs + "/minimal.ini --seed 8 --out " + c.string()).status, 0);
  EXPECT_NE(slurp(a / "report.csv"), slurp(c / "report.csv"));
}

TEST(Cli, InfeasibleNamesDevice) {
  const auto dir = scratch("infeasible");
  fs::create_directories(dir);
  const auto cfg = dir / "tiny_latency.ini";
  std::string text = slurp(kConfigs + "/minimal.ini");
  const std::string key = "latency_budget_s = 1";
  text.replace(text.find(key), key.size(), "latency_budget_s = 1e-12");
  { std::ofstream(cfg) << text; }
  const auto r = run_cli("run --config " + cfg.string() + " --out " + (dir / "out").string());
  EXPECT_EQ(r.status, 3);
  EXPECT_NE(r.err.find("\"device\":"), std::string::npos) << r.err;
}

TEST(Cli, SweepSchemes) {
  const auto dir = scratch("sweep");
  const auto r = run_cli("sweep --config " + kConfigs + "/minimal.ini --axis scheme --values mst,ring,gossip --out " +
                         dir.string());
  ASSERT_EQ(r.status, 0) << r.err;
  const auto table = slurp(dir / "sweep.csv");
  for (const char* v : {"scheme,mst,final_loss", "scheme,ring,final_loss", "scheme,gossip,final_loss"})
    EXPECT_NE(table.find(v), std::string::npos) << v;
  EXPECT_TRUE(fs::exists(dir / "scheme=ring" / "report.csv"));
}

TEST(Cli, SweepRejectsEmptyValues) {
  const auto r = run_cli("sweep --config " + kConfigs + "/minimal.ini --axis N --values \",\" --out " +
                         scratch("empty").string());
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("--values"), std::string::npos);
  EXPECT_EQ(run_cli("sweep --config " + kConfigs + "/minimal.ini --axis colour --values 1 --out " +
                    scratch("axis").string())
                .status,
            2);
}

TEST(Cli, VerifyTable1) {
  const auto r = run_cli("verify --suite table1");
  EXPECT_EQ(r.status, 0);
  EXPECT_NE(r.out.find("PASS table1 (1,1,3) strictly minimal"), std::string::npos) << r.out;
  EXPECT_EQ(run_cli("verify --suite nonsense").status, 2);
}

TEST(Cli, VerifyMstOracle) {
  const auto r = run_cli("verify --suite mst_oracle");
  EXPECT_EQ(r.status, 0) << r.out;
}
