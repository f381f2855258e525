#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "neurphy/cli.hpp"
#include "neurphy/dataset_io.hpp"
#include "neurphy/io_util.hpp"

using namespace neurphy;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "neurphy_test_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "neurphy");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return cli::main(static_cast<int>(argv.size()), argv.data());
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

const char* kTinyModel[] = {"--context_widths", "16,8", "--recognition_widths", "8,8", "--transition_widths",
                            "16,8", "--decoder_widths", "8,16"};

}  // namespace

TEST_CASE("generate") {
  const auto dir = fresh_dir("generate");
  const auto a = (dir / "a.jsonl").string(), b = (dir / "b.jsonl").string();
  CHECK(run({"generate", "--l_steps", "3", "--m_steps", "3", "--out", a, "--seed", "4"}) == 0);
  CHECK(lines(read_file(a)) == 9);
  CHECK(run({"generate", "--l_steps", "3", "--m_steps", "3", "--out", b, "--seed", "4"}) == 0);
  CHECK(read_file(a) == read_file(b));

  const auto orbit = (dir / "o.jsonl").string();
  CHECK(run({"generate", "--system", "orbit", "--r0_min", "2", "--r0_steps", "1", "--v0r_max", "0", "--v0r_steps",
             "1", "--v0theta_min", "0.70710678118654752", "--v0theta_steps", "2", "--out", orbit}) == 0);
  const auto tasks = load_tasks_jsonl(orbit);
  REQUIRE(tasks.size() == 2);
  CHECK(tasks[0].global("e") == 0.0);

  CHECK(run({"generate", "--out", (dir / "p.jsonl").string(), "--grid", "full"}) == 0);
  CHECK(lines(read_file(dir / "p.jsonl")) == 651);

  CHECK(run({"generate", "--out", a, "--l_steps", "zero"}) == cli::kExitUsage);
  CHECK(run({"generate", "--out", a, "--bogus"}) == cli::kExitUsage);
  CHECK(run({"generate", "--out", "/nonexistent/dir/x.jsonl"}) == cli::kExitIo);
  CHECK(run({}) == cli::kExitUsage);
}

TEST_CASE("train, eval, rollout, manifold and plot") {
  const auto dir = fresh_dir("pipeline");
  const auto data = (dir / "d.jsonl").string();
  REQUIRE(run({"generate", "--l_steps", "3", "--m_steps", "2", "--out", data}) == 0);
  const auto run_dir = (dir / "run").string();
  std::vector<std::string> train{"train", "--data", data, "--out", run_dir, "--epochs", "2", "--config", "D=1"};
  train.insert(train.end(), std::begin(kTinyModel), std::end(kTinyModel));
  REQUIRE(run(train) == 0);
  const std::string metrics = read_file(fs::path(run_dir) / "metrics.csv");
  CHECK(metrics.rfind("epoch,recon,kl1,total\n", 0) == 0);
  CHECK(lines(metrics) == 3);
  CHECK(fs::exists(fs::path(run_dir) / "checkpoint.nphy"));
  const auto manifest = nlohmann::json::parse(read_file(fs::path(run_dir) / "manifest.json"));
  CHECK(manifest.at("checkpoint").at("sha256") == sha256_file(fs::path(run_dir) / "checkpoint.nphy"));
  CHECK(manifest.at("metrics").at(0).at("sha256") == sha256_file(fs::path(run_dir) / "metrics.csv"));

  SUBCASE("rerun from the saved config reproduces the artifacts") {
    const auto rerun = (dir / "rerun").string();
    REQUIRE(run({"train", "--data", data, "--out", rerun, "--config", (fs::path(run_dir) / "config.ini").string()}) ==
            0);
    CHECK(read_file(fs::path(rerun) / "metrics.csv") == metrics);
    CHECK(read_file(fs::path(rerun) / "checkpoint.nphy") == read_file(fs::path(run_dir) / "checkpoint.nphy"));
  }
  SUBCASE("NEURPHY_SEED overrides the config seed") {
    const auto seeded = (dir / "seeded").string();
    ::setenv("NEURPHY_SEED", "31", 1);
    std::vector<std::string> args = train;
    args[4] = seeded;
    const int rc = run(args);
    ::unsetenv("NEURPHY_SEED");
    REQUIRE(rc == 0);
    CHECK(nlohmann::json::parse(read_file(fs::path(seeded) / "manifest.json")).at("seed") == 31);
    CHECK(read_file(fs::path(seeded) / "metrics.csv") != metrics);
  }
  SUBCASE("eval tables") {
    CHECK(run({"eval", "--run", run_dir, "--stage", "training", "--eval-seed", "3"}) == 0);
    const std::string mse = read_file(fs::path(run_dir) / "mse_training.csv");
    CHECK(mse.rfind("stage,T+0,T+1\n", 0) == 0);
    CHECK(run({"eval", "--run", run_dir, "--stage", "training", "--eval-seed", "3"}) == 0);
    CHECK(read_file(fs::path(run_dir) / "mse_training.csv") == mse);
    const std::string r2 = read_file(fs::path(run_dir) / "r2.csv");
    CHECK(lines(r2) == 5);
    CHECK(run({"eval", "--run", run_dir, "--stage", "nope"}) == cli::kExitUsage);
    CHECK(run({"eval", "--run", (dir / "missing").string()}) == cli::kExitIo);
  }
  SUBCASE("rollout windows") {
    const auto out = (dir / "roll.csv").string();
    CHECK(run({"rollout", "--run", run_dir, "--task", "2", "--start", "5", "--horizon", "0", "--out", out}) == 0);
    CHECK(lines(read_file(out)) == 2);
    CHECK(run({"rollout", "--run", run_dir, "--task", "2", "--start", "5", "--horizon", "50", "--out", out}) == 0);
    const std::string csv = read_file(out);
    CHECK(lines(csv) == 52);
    const auto tasks = load_tasks_jsonl(data);
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    std::getline(in, line);
    CHECK(line.rfind("5," + format_real(tasks[2].observations[5][0]) + "," + format_real(tasks[2].observations[5][1]) +
                         ",",
                     0) == 0);
    CHECK(run({"rollout", "--run", run_dir, "--task", "2", "--start", "90", "--horizon", "50", "--out", out}) ==
          cli::kExitUsage);
    CHECK(run({"rollout", "--run", run_dir, "--task", "99", "--out", out}) == cli::kExitUsage);

    const auto svg = (dir / "roll.svg").string();
    CHECK(run({"plot", "--in", out, "--out", svg}) == 0);
    const std::string first = read_file(svg);
    CHECK(run({"plot", "--in", out, "--out", svg}) == 0);
    CHECK(read_file(svg) == first);
  }
  SUBCASE("manifold export and plot") {
    const auto out = (dir / "manifold").string();
    CHECK(run({"manifold", "--run", run_dir, "--out", out}) == 0);
    CHECK(lines(read_file(fs::path(out) / "manifold_tasks.csv")) == 7);
    CHECK(run({"plot", "--in", (fs::path(out) / "manifold_tasks.csv").string(), "--out",
               (dir / "m.svg").string(), "--color-by", "m"}) == 0);
    write_file_atomic(dir / "odd.csv", "a,b\n1,2\n");
    CHECK(run({"plot", "--in", (dir / "odd.csv").string(), "--out", (dir / "odd.svg").string()}) == cli::kExitUsage);
  }
}
