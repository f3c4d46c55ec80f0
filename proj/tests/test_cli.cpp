#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "cursor_cli_tests";

int run(const std::string& args) {
  const std::string cmd = "cd '" + kRoot.string() + "' && '" CURSOR_CLI_PATH "' " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void fresh() {
  fs::remove_all(kRoot);
  fs::create_directories(kRoot);
}

const char* kGenerate = "generate --targets 1 --trajectories 3 --points 40 --latent-dim 8 --response-dim 12 --noise 0.5";

}  // namespace

TEST_CASE("generate rerun from its manifest is byte identical") {
  fresh();
  REQUIRE(run(std::string("--seed 4 -o a --format bin ") + kGenerate) == 0);
  REQUIRE(run("--config a/manifest.toml -o b") == 0);
  CHECK(slurp(kRoot / "a/dataset.bin") == slurp(kRoot / "b/dataset.bin"));
  CHECK_FALSE(slurp(kRoot / "a/dataset.bin").empty());
}

TEST_CASE("rank and optimize are reproducible across worker counts") {
  fresh();
  REQUIRE(run(std::string("--seed 5 -o data ") + kGenerate) == 0);
  REQUIRE(run("--workers 1 -o r1 rank --data data/dataset.csv --estimator ols dummy --L 10") == 0);
  REQUIRE(run("--workers 8 -o r8 rank --data data/dataset.csv --estimator ols dummy --L 10") == 0);
  CHECK(slurp(kRoot / "r1/rank.jsonl") == slurp(kRoot / "r8/rank.jsonl"));
  CHECK(slurp(kRoot / "r1/scores.csv") == slurp(kRoot / "r8/scores.csv"));

  REQUIRE(run("--workers 1 -o o1 optimize --data data/dataset.csv --budget 60") == 0);
  REQUIRE(run("--config o1/manifest.toml --workers 8 -o o2") == 0);
  CHECK(slurp(kRoot / "o1/trace.jsonl") == slurp(kRoot / "o2/trace.jsonl"));
  CHECK(slurp(kRoot / "o1/pca_latents.bin") == slurp(kRoot / "o2/pca_latents.bin"));

  REQUIRE(run("-o rec recover --data data/dataset.csv --estimate o1/summary.json") == 0);
  CHECK(fs::exists(kRoot / "rec/recovery.json"));
  REQUIRE(run("-o rep report --runs r1 o1") == 0);
  CHECK(fs::exists(kRoot / "rep/ranking.csv"));
}

TEST_CASE("exit codes") {
  fresh();
  CHECK(run("--help") == 0);
  CHECK(run("-o x") == 2);
  CHECK(run("-o x rank --data missing.csv") == 2);
  CHECK(run("-o x frobnicate") == 2);
  REQUIRE(run(std::string("-o data ") + kGenerate) == 0);
  CHECK(run("-o x rank --data data/dataset.csv --estimator svr") == 2);
}
