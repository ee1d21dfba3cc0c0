#include "maxent/cli.hpp"
#include "maxent/config.hpp"
#include "maxent/io.hpp"

#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <string>
#include <vector>

using namespace maxent;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("maxent_cli_" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "maxent");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return cli_main(int(argv.size()), argv.data());
}

const char* kSmallConfig =
    "# tiny networks for a quick run\n"
    "batch_M = 16\nactor_hidden = 8\nembed_dim = 2\nembed_hidden = 4\n"
    "subnet_hidden = 8\naux_hidden = 8\nquad.intervals = 16\nwarmup_steps = 20\n";

int count_lines(const std::string& s) {
  int n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(run({}) == 2);
  CHECK(run({"fly"}) == 2);
  CHECK(run({"train", "--env", "pendulum1d"}) == 2);
  CHECK(run({"train", "--out", "x", "--bogus", "1"}) == 2);
  CHECK(run({"eval", "--checkpoint", "/nonexistent.ckpt", "--out", "x"}) == 2);
  CHECK(run({"--help"}) == 0);
}

TEST_CASE("runtime failures exit with 1") {
  TempDir dir;
  CHECK(run({"train", "--env", "cartpole", "--out", (dir.path / "a").string()}) == 1);
  write_file_atomic(dir.path / "bad.cfg", "no_such_key = 1\n");
  CHECK(run({"train", "--env", "pendulum1d", "--config", (dir.path / "bad.cfg").string(), "--out",
             (dir.path / "b").string()}) == 1);
  CHECK(run({"train", "--env", "pendulum1d", "--alpha", "-1", "--out", (dir.path / "c").string()}) == 1);
}

TEST_CASE("train with zero steps writes a manifest and an empty metrics file") {
  TempDir dir;
  const fs::path out = dir.path / "zero";
  CHECK(run({"train", "--env", "quadratic_bandit_1d", "--algo", "sac", "--steps", "0", "--out", out.string()}) == 0);
  REQUIRE(fs::exists(out / "manifest.txt"));
  const std::string metrics = read_file(out / "metrics.csv");
  CHECK(count_lines(metrics) == 1);
  CHECK(metrics.rfind("step,episodic_reward", 0) == 0);
  const Config m = Config::load(out / "manifest.txt");
  CHECK(m.get_string("algorithm", "") == "sac_reverse");
  CHECK(m.get_int("steps_L", -1) == 0);
  CHECK(m.get_string("manifest.artifact_version", "") == kArtifactVersion);
  CHECK(m.get_string("manifest.config_hash", "").size() == 40);
}

TEST_CASE("manifest round trip reproduces the metrics bitwise, and eval reads the checkpoint") {
  TempDir dir;
  write_file_atomic(dir.path / "small.cfg", kSmallConfig);
  const fs::path first = dir.path / "first";
  const fs::path second = dir.path / "second";
  REQUIRE(run({"train", "--env", "coupled_bandit_2d", "--algo", "bidirectional", "--config",
               (dir.path / "small.cfg").string(), "--seed", "3", "--steps", "120", "--out", first.string()}) == 0);
  REQUIRE(run({"train", "--config", (first / "manifest.txt").string(), "--out", second.string()}) == 0);
  const std::string m1 = read_file(first / "metrics.csv");
  CHECK(count_lines(m1) == 121);
  CHECK(m1 == read_file(second / "metrics.csv"));
  CHECK(Config::load(first / "manifest.txt").get_string("manifest.config_hash", "a") ==
        Config::load(second / "manifest.txt").get_string("manifest.config_hash", "b"));
  REQUIRE(fs::exists(first / "checkpoint_120.ckpt"));

  const fs::path ev = dir.path / "eval";
  CHECK(run({"eval", "--checkpoint", (first / "checkpoint_120.ckpt").string(), "--env", "coupled_bandit_2d",
             "--episodes", "3", "--out", ev.string()}) == 0);
  CHECK(count_lines(read_file(ev / "eval.csv")) == 5);
  CHECK(run({"eval", "--checkpoint", (first / "checkpoint_120.ckpt").string(), "--env", "pendulum1d", "--out",
             ev.string()}) == 1);

  write_file_atomic(dir.path / "states.txt", "0.0\n# comment\n0.5\n");
  const fs::path dp = dir.path / "dproj";
  CHECK(run({"diag-projection", "--checkpoint", (first / "checkpoint_120.ckpt").string(), "--states",
             (dir.path / "states.txt").string(), "--out", dp.string()}) == 0);
  CHECK(count_lines(read_file(dp / "projection.csv")) == 1 + 2 * 2);
  write_file_atomic(dir.path / "bad_states.txt", "0.0 1.0\n");
  CHECK(run({"diag-projection", "--checkpoint", (first / "checkpoint_120.ckpt").string(), "--states",
             (dir.path / "bad_states.txt").string(), "--out", dp.string()}) == 1);

  const fs::path dm = dir.path / "dmarg";
  CHECK(run({"diag-marginals", "--checkpoint", (first / "checkpoint_120.ckpt").string(), "--out", dm.string()}) == 0);
  CHECK(count_lines(read_file(dm / "marginals.csv")) == 1 + 2 * 401);
  CHECK(count_lines(read_file(dm / "marginals_summary.csv")) == 3);
}

TEST_CASE("kl-lab writes one trajectory per seed and a summary") {
  TempDir dir;
  write_file_atomic(dir.path / "kl.cfg", "epochs = 30\nseeds = 1,2\n");
  const fs::path out = dir.path / "kl";
  CHECK(run({"kl-lab", "--config", (dir.path / "kl.cfg").string(), "--out", out.string()}) == 0);
  const std::string t = read_file(out / "kl_lab_seed1.csv");
  CHECK(t.rfind("# mu_star=", 0) == 0);
  CHECK(count_lines(t) == 2 + 31);
  CHECK(fs::exists(out / "kl_lab_seed2.csv"));
  CHECK(count_lines(read_file(out / "kl_lab_summary.csv")) == 3);
  write_file_atomic(dir.path / "kl_bad.cfg", "epoch = 30\n");
  CHECK(run({"kl-lab", "--config", (dir.path / "kl_bad.cfg").string(), "--out", out.string()}) == 1);
}

TEST_CASE("compare summarizes every algorithm and seed") {
  TempDir dir;
  write_file_atomic(dir.path / "small.cfg", kSmallConfig);
  const fs::path out = dir.path / "cmp";
  CHECK(run({"compare", "--algos", "sac,bidirectional", "--env", "quadratic_bandit_1d", "--seeds", "0,1",
             "--config", (dir.path / "small.cfg").string(), "--steps", "60", "--out", out.string()}) == 0);
  CHECK(count_lines(read_file(out / "summary.csv")) == 5);
  CHECK(fs::exists(out / "sac_reverse_seed1" / "metrics.csv"));
  CHECK(run({"compare", "--algos", "ppo", "--env", "quadratic_bandit_1d", "--seeds", "0", "--out", out.string()}) ==
        1);
}
