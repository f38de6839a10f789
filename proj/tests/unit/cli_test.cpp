#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "supsup/serialize.hpp"

using namespace supsup;
namespace fs = std::filesystem;

namespace {

struct Captured {
  int code;
  std::string out, err;
};

Captured run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

class CliRuns : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / "supsup_cli_test";
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  static void TearDownTestSuite() { fs::remove_all(root_); }
  static fs::path root_;
};
fs::path CliRuns::root_;

}  // namespace

TEST(Cli, ConfigErrorsExitTwo) {
  EXPECT_EQ(run({"gg", "--tasks", "0"}).code, cli::kExitConfig);
  const Captured unknown = run({"gnu", "--no-such-flag"});
  EXPECT_EQ(unknown.code, cli::kExitConfig);
  EXPECT_NE(unknown.err.find("Usage"), std::string::npos);
  EXPECT_EQ(run({}).code, cli::kExitConfig);
  EXPECT_EQ(run({"gnu", "--dataset", "synthetic", "--arch", "vgg"}).code, cli::kExitConfig);
  EXPECT_EQ(run({"nns", "--dataset", "synthetic", "--infer", "binary"}).code, cli::kExitConfig);
}

TEST(Cli, MissingDataExitsThree) {
  const auto empty = fs::temp_directory_path() / "supsup_cli_no_mnist";
  fs::create_directories(empty);
  EXPECT_EQ(run({"gg", "--data-dir", empty.string(), "--out", (empty / "o").string()}).code, cli::kExitData);
  EXPECT_EQ(run({"inspect", "--in", (empty / "missing.bin").string()}).code, cli::kExitData);
  fs::remove_all(empty);
}

TEST(Cli, Help) { EXPECT_EQ(run({"--help"}).code, cli::kExitOk); }

TEST_F(CliRuns, DeterministicCsvAndMaskExport) {
  const auto a = root_ / "a", b = root_ / "b";
  for (const auto& dir : {a, b}) {
    const Captured c = run({"gnu", "--dataset", "synthetic", "--tasks", "5", "--seed", "1", "--out", dir.string()});
    ASSERT_EQ(c.code, cli::kExitOk) << c.err;
  }
  const std::string csv = slurp(a / "metrics.csv");
  EXPECT_EQ(csv.rfind("task,accuracy,id_accuracy,masks,bytes,seconds\r\n", 0), 0u);
  EXPECT_EQ(csv, slurp(b / "metrics.csv"));
  EXPECT_EQ(slurp(a / "snapshot.bin"), slurp(b / "snapshot.bin"));

  const auto mask = root_ / "m3.ssup";
  ASSERT_EQ(run({"export-mask", "--in", (a / "snapshot.bin").string(), "--task", "3", "--out", mask.string()}).code,
            cli::kExitOk);
  const Snapshot snap = deserialize_snapshot(read_file(a / "snapshot.bin"));
  ASSERT_EQ(snap.masks.size(), 5u);
  EXPECT_EQ(deserialize_mask(read_file(mask)), snap.masks[3]);
  EXPECT_EQ(run({"export-mask", "--in", (a / "snapshot.bin").string(), "--task", "5"}).code, cli::kExitConfig);

  const Captured info = run({"inspect", "--in", mask.string()});
  EXPECT_EQ(info.code, cli::kExitOk);
  EXPECT_NE(info.out.find("3 layers"), std::string::npos);
}

TEST_F(CliRuns, ConfigFileIsOverriddenByFlags) {
  const auto cfg = root_ / "run.cfg";
  std::ofstream(cfg) << "# quick run\ndataset = synthetic\ntasks = 2\nsteps = 5\nseed = 9\nout = "
                     << (root_ / "from_file").string() << "\n";
  const Captured c = run({"gg", "--config", cfg.string(), "--tasks", "1"});
  ASSERT_EQ(c.code, cli::kExitOk) << c.err;
  const std::string csv = slurp(root_ / "from_file" / "metrics.csv");
  EXPECT_NE(csv.find("\r\n0,"), std::string::npos);
  EXPECT_EQ(csv.find("\r\n1,"), std::string::npos);

  std::ofstream(root_ / "bad.cfg") << "tasks 3\n";
  EXPECT_EQ(run({"gg", "--config", (root_ / "bad.cfg").string()}).code, cli::kExitConfig);
  std::ofstream(root_ / "unknown.cfg") << "colour = red\n";
  EXPECT_EQ(run({"gg", "--config", (root_ / "unknown.cfg").string()}).code, cli::kExitConfig);
}
