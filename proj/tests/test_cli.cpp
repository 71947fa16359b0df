#include <cstdio>
#include <filesystem>
#include <random>
#include <sys/wait.h>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "topofuse/artifacts.hpp"
#include "topofuse/volio.hpp"

using namespace topofuse;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
};

/// Runs the CLI with stderr folded into stdout.
CliRun run(const std::string& args) {
  const std::string cmd = std::string(TOPOFUSE_CLI) + " " + args + " 2>&1";
  CliRun r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  while (std::size_t got = std::fread(buf, 1, sizeof buf, p)) r.out.append(buf, got);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path scratch() {
  const fs::path d = fs::temp_directory_path() / "topofuse_test_cli";
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST(Cli, MissingFileExitsTwoAndNamesIt) {
  const CliRun r = run("correlate /nonexistent/one.nrrd /nonexistent/two.nrrd");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("/nonexistent/one.nrrd"), std::string::npos) << r.out;
}

TEST(Cli, BadArgumentsExitTwo) {
  EXPECT_EQ(run("fuse --synth --threshold -1").code, 2);
  EXPECT_EQ(run("no-such-command").code, 2);
  EXPECT_EQ(run("fuse").code, 2);
}

TEST(Cli, CorrelateRanksEveryPair) {
  std::mt19937_64 rng(1000);
  const fs::path d = scratch();
  const Volume a = oracle::random_volume(rng, {8, 8, 8}, false);
  const Volume b = oracle::random_volume(rng, {8, 8, 8}, false);
  write_volume(a, d / "a.nrrd");
  write_volume(a, d / "a_copy.nrrd");
  write_volume(b, d / "b.nrrd");
  const CliRun r = run("correlate " + (d / "a.nrrd").string() + " " + (d / "a_copy.nrrd").string() + " " +
                    (d / "b.nrrd").string());
  ASSERT_EQ(r.code, 0) << r.out;
  std::size_t rows = 0;
  for (std::size_t at = 0; (at = r.out.find('\n', at)) != std::string::npos; ++at) ++rows;
  EXPECT_EQ(rows, 4u);  // header plus three pairs
  // ascending by correlation, so the identical pair comes last
  const std::size_t last_row = r.out.rfind('\n', r.out.size() - 2) + 1;
  EXPECT_NE(r.out.find("a_copy.nrrd", last_row), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("1.000", last_row), std::string::npos) << r.out;
}

TEST(Cli, PeaksOnMonotoneHistogram) {
  const fs::path f = scratch() / "monotone.csv";
  detail::write_bytes(f, "bin_center,weight\n0.1,1\n0.3,2\n0.5,3\n0.7,4\n0.9,5\n");
  const CliRun r = run("peaks " + f.string() + " -m 0.05");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(Json::parse(r.out).at("count"), 1);
}

TEST(Cli, StageCommandsChain) {
  const fs::path d = scratch() / "chain";
  fs::remove_all(d);
  ASSERT_EQ(run("synth --voxels-per-blob 20000 -o " + d.string()).code, 0);
  ASSERT_EQ(run("histogram " + (d / "synth_v1.nrrd").string() + " " + (d / "synth_v2.nrrd").string() +
                " --bins 200 -o " + d.string()).code, 0);
  ASSERT_EQ(run("topo " + (d / "density.grid").string() + " -o " + d.string()).code, 0);
  ASSERT_EQ(run("path " + (d / "mst.json").string() + " -o " + (d / "path.json").string()).code, 0);
  const CliRun s = run("spline " + (d / "path.json").string() + " -n 200 --samples 5000 -o " + d.string());
  ASSERT_EQ(s.code, 0) << s.out;
  EXPECT_TRUE(fs::exists(d / "splines.json"));
  EXPECT_TRUE(fs::exists(d / "spline_samples_0.json"));
  EXPECT_EQ(tree_path_from_json(read_json(d / "path.json")).nodes.front().kind, CriticalKind::maximum);
}

TEST(Cli, FuseWritesManifestWithHashes) {
  const fs::path d = scratch() / "fuse";
  fs::remove_all(d);
  const fs::path cfg = scratch() / "fuse.json";
  detail::write_bytes(cfg, R"({"inputs": {"synth": {"voxels_per_blob": 20000}}, "bins": 200, "sample_count": 20000})");
  const CliRun r = run("fuse -c " + cfg.string() + " -o " + d.string());
  ASSERT_EQ(r.code, 0) << r.out;
  const Json m = read_json(d / "manifest.json");
  for (const auto& [name, entry] : m.at("artifacts").items())
    EXPECT_EQ(entry.at("sha256"), sha256_hex(detail::read_bytes(d / name))) << name;
}
