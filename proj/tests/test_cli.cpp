#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

fs::path scratch() {
  static const fs::path root = [] {
    auto p = fs::temp_directory_path() / "dtheory_test_cli";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Result cli(const std::string& args) {
  const auto log = scratch() / "log.txt";
  const std::string cmd = std::string(DTHEORY_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int st = std::system(cmd.c_str());
  return {WIFEXITED(st) ? WEXITSTATUS(st) : -1, slurp(log)};
}

fs::path write_config(const std::string& name, const std::string& text) {
  const auto p = scratch() / name;
  std::ofstream(p) << text;
  return p;
}

TEST(Cli, MissingSubcommandIsConfigError) { EXPECT_EQ(cli("").code, 2); }

TEST(Cli, WorkerRangeIsChecked) { EXPECT_EQ(cli("perturbative --workers 0").code, 2); }

TEST(Cli, UnknownKeyReportsLineAndColumn) {
  const auto p = write_config("unknown.json", "{\n  \"s\": 2,\n  \"zz\": 1\n}\n");
  const auto r = cli("perturbative --config " + p.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("unknown.json:3:"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("/zz"), std::string::npos) << r.out;
}

TEST(Cli, TypeMismatchReportsPointer) {
  const auto p = write_config("type.json", "{\"mc\": {\"measurements\": \"many\"}}");
  const auto r = cli("mc-reference --config " + p.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("/mc/measurements"), std::string::npos) << r.out;
}

TEST(Cli, IntegerFieldRejectsFraction) {
  const auto p = write_config("frac.json", "{\"steps\": 10.5}");
  const auto r = cli("spiral --config " + p.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("/steps"), std::string::npos) << r.out;
}

TEST(Cli, SyntaxErrorReportsPosition) {
  const auto p = write_config("syntax.json", "{\n  \"s\": 2,\n  \"z\" 1\n}\n");
  const auto r = cli("perturbative --config " + p.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("syntax.json:3:"), std::string::npos) << r.out;
}

TEST(Cli, BadSweepFlagIsConfigError) {
  const auto r = cli("mc-reference --sweep beta=1:2");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("--sweep"), std::string::npos) << r.out;
}

TEST(Cli, HardwareLimitExitsWithFour) {
  const auto p = write_config("hw.json", "{\"geom\": \"2x2\", \"omega_d\": 30.0, \"steps\": 10}");
  const auto r = cli("spiral --config " + p.string() + " --output " + (scratch() / "hw" / "x").string());
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.out.find("exceeds"), std::string::npos) << r.out;
  EXPECT_FALSE(fs::exists(scratch() / "hw" / "x.csv"));
}

TEST(Cli, SizeLimitIsConfigError) {
  const auto r = cli("oracle-suite --lattice 6x6");
  EXPECT_EQ(r.code, 2) << r.out;
}

TEST(Cli, PerturbativeTableHasPreambleAndHeader) {
  const auto prefix = scratch() / "pt" / "table";
  const auto r = cli("perturbative --z 0.4:0.5:3 --output " + prefix.string());
  ASSERT_EQ(r.code, 0) << r.out;
  const auto csv = slurp(prefix.string() + ".csv");
  EXPECT_EQ(csv.rfind("# dtheory perturbative\n# config: ", 0), 0u) << csv;
  EXPECT_NE(csv.find("\nz,F_two_loop,F_one_loop,outside_validity\n"), std::string::npos) << csv;
  EXPECT_TRUE(fs::exists(prefix.string() + ".svg"));
  int rows = 0;
  for (char ch : csv) rows += ch == '\n';
  EXPECT_EQ(rows, 2 + 1 + 3);  // no seed line: the table is deterministic
}

TEST(Cli, CommandLineOverridesConfigFile) {
  const auto p = write_config("seed.json", "{\"seed\": 5, \"lattices\": [\"2x2\"]}");
  const auto prefix = scratch() / "seed" / "t";
  ASSERT_EQ(cli("oracle-suite --config " + p.string() + " --seed 9 --output " + prefix.string()).code, 0);
  EXPECT_NE(slurp(prefix.string() + ".csv").find("# seed: 9\n"), std::string::npos);
}

TEST(Cli, SeedOnDeterministicCommandIsRejected) {
  const auto r = cli("perturbative --seed 3");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("--seed"), std::string::npos) << r.out;
}

TEST(Cli, TinyShotCountWarnsInsteadOfFailing) {
  const auto p = write_config("shots.json", "{\"geom\": \"2x2\", \"steps\": 20, \"shots\": 2, \"bootstrap\": 100}");
  const auto prefix = scratch() / "shots" / "s";
  const auto r = cli("spiral --config " + p.string() + " --output " + prefix.string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("warning:"), std::string::npos) << r.out;
  EXPECT_NE(slurp(prefix.string() + ".csv").find("# warning:"), std::string::npos);
  EXPECT_TRUE(fs::exists(prefix.string() + "_trajectory.csv"));
  EXPECT_TRUE(fs::exists(prefix.string() + "_schedule.json"));
}

TEST(Cli, OracleSuitePrintsVerdictPerLattice) {
  const auto r = cli("oracle-suite --lattice 2x2 --lattice 3x2 --output " + (scratch() / "oc" / "o").string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("PASS 2x2"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("PASS 3x2"), std::string::npos) << r.out;
}

}  // namespace
