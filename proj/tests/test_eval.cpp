#include <doctest.h>

#include <cmath>
#include <random>

#include "neurphy/error.hpp"
#include "neurphy/eval.hpp"

using namespace neurphy;
using namespace neurphy::eval;

namespace {

std::vector<std::vector<double>> random_features(std::size_t n, std::size_t k, Rng& rng) {
  std::normal_distribution<double> g;
  std::vector<std::vector<double>> x(n, std::vector<double>(k));
  for (auto& row : x) {
    for (double& v : row) v = g(rng);
  }
  return x;
}

RunConfig small_run() {
  RunConfig cfg;
  cfg.model.context_widths = {16, 8};
  cfg.model.recognition_widths = {8, 8};
  cfg.model.transition_widths = {16, 8};
  cfg.model.decoder_widths = {8, 16};
  cfg.train.D = 3;
  cfg.train.seed = 4;
  cfg.model.init_seed = 4;
  cfg.grid.l = {1, 3, 3};
  cfg.grid.m = {1, 4, 4};
  return cfg;
}

}  // namespace

TEST_CASE("polynomial features") {
  const std::vector<double> x{2, 3};
  CHECK(poly_features(x, 1) == std::vector<double>{2, 3});
  CHECK(poly_features(x, 2) == std::vector<double>{2, 3, 4, 6, 9});
  CHECK_THROWS_AS(poly_features(x, 3), Error);
}

TEST_CASE("R2 of exact relations") {
  Rng rng(1);
  const auto x = random_features(50, 3, rng);
  std::vector<double> lin, quad;
  for (const auto& r : x) {
    lin.push_back(0.5 + 2 * r[0] - r[1] + 0.25 * r[2]);
    quad.push_back(1 - r[0] * r[0] + 3 * r[1] * r[2] + r[2]);
  }
  CHECK(std::abs(fit_poly_r2(x, lin, 1).r2 - 1.0) < 1e-9);
  CHECK(std::abs(fit_poly_r2(x, quad, 2).r2 - 1.0) < 1e-9);
  CHECK(fit_poly_r2(x, quad, 1).r2 < 0.9);
}

TEST_CASE("R2 of unrelated noise is near zero") {
  Rng rng(2);
  const auto x = random_features(1000, 3, rng);
  std::normal_distribution<double> g;
  std::vector<double> y(1000);
  for (double& v : y) v = g(rng);
  const auto r = fit_poly_r2(x, y, 1, "noise");
  CHECK(r.r2 < 0.1);
  CHECK(r.r2 <= 1.0);
  CHECK(r.target == "noise");
}

TEST_CASE("quadratic fit never loses to linear") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(seed);
    const auto x = random_features(40, 3, rng);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> y;
    for (const auto& r : x) y.push_back(std::sin(r[0]) + r[1] * u(rng));
    CHECK(fit_poly_r2(x, y, 2).r2 >= fit_poly_r2(x, y, 1).r2 - 1e-6);
  }
}

TEST_CASE("R2 preconditions") {
  Rng rng(3);
  const auto x = random_features(20, 3, rng);
  try {
    fit_poly_r2(x, std::vector<double>(20, 4.0), 1);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDegenerateTarget);
  }
  const auto few = random_features(10, 3, rng);
  std::vector<double> y(10);
  for (std::size_t i = 0; i < 10; ++i) y[i] = static_cast<double>(i);
  CHECK_THROWS_AS(fit_poly_r2(few, y, 2), Error);
}

TEST_CASE("stage construction") {
  const RunConfig cfg = small_run();
  const auto tasks = physics::generate_task_grid(cfg.grid).tasks;
  const auto split = run_split(tasks, cfg);
  CHECK(split.meta_train.size() == 10);
  CHECK(split.meta_test.size() == 2);

  const auto training = stage_tasks(split, Stage::kTraining, cfg, 3, 0);
  const auto test = stage_tasks(split, Stage::kTest, cfg, 3, 0);
  REQUIRE(training.size() == 10);
  for (std::size_t i = 0; i < training.size(); ++i) {
    for (auto t : training[i].frames) {
      CHECK(t >= 4);
      CHECK_FALSE(std::binary_search(test[i].frames.begin(), test[i].frames.end(), t));
    }
    CHECK(training[i].ctx.size() == cfg.train.n_c);
  }
  const auto mt2 = stage_tasks(split, Stage::kMetatest2, cfg, 3, 0);
  REQUIRE(mt2.size() == 2);
  CHECK(mt2[0].ctx.size() == 2);
  CHECK(mt2[0].frames.front() == 21);
  CHECK(mt2[0].frames.back() == 100);
  for (auto i : mt2[0].ctx.indices) CHECK(i <= 19);
  const auto mt20 = stage_tasks(split, Stage::kMetatest20, cfg, 3, 0);
  CHECK(mt20[0].ctx.size() == 20);

  CHECK(stage_from_string("metatest20") == Stage::kMetatest20);
  CHECK_THROWS_AS(stage_from_string("bogus"), Error);
}

TEST_CASE("MSE and KL tables") {
  const RunConfig cfg = small_run();
  const auto tasks = physics::generate_task_grid(cfg.grid).tasks;
  const auto split = run_split(tasks, cfg);
  NeurPhyModel model{cfg.model};
  const auto before = model.parameters();
  const auto set = stage_tasks(split, Stage::kTraining, cfg, 3, 0);

  const auto mse = rollout_mse(model, set, Stage::kTraining, 3);
  CHECK(mse.mse.size() == 4);
  for (double v : mse.mse) CHECK(v >= 0.0);
  const auto kl = kl_report(model, set, cfg.train, 3, 7);
  CHECK(kl.size() == 3);
  for (double v : kl) CHECK(v >= 0.0);
  CHECK(kl_report(model, set, cfg.train, 3, 7) == kl);
  CHECK(rollout_mse(model, set, Stage::kTraining, 3).mse == mse.mse);
  CHECK(model.parameters() == before);

  SUBCASE("T+0 is the mean squared reconstruction error") {
    const auto& et = set[0];
    const std::vector<EvalTask> one{et};
    const auto m = rollout_mse(model, one, Stage::kTraining, 0);
    double acc = 0.0;
    for (auto t : et.frames) {
      const auto g = recognize_frames(model, et.task->observations[t - 1], et.task->observations[t]);
      ad::Tape tape;
      nn::Binding params(tape, model.parameters(), false);
      const auto x = model.decode(params, tape.constant(ad::Tensor::row(g.mean))).value();
      for (int k = 0; k < 2; ++k) acc += std::pow(x[k] - et.task->observations[t][k], 2);
    }
    CHECK(m.mse[0] == doctest::Approx(acc / (2.0 * static_cast<double>(et.frames.size()))).epsilon(1e-12));
  }

  const std::string csv = mse_csv({mse});
  CHECK(csv.rfind("stage,T+0,T+1,T+2,T+3\ntraining,", 0) == 0);
  CHECK(kl_csv({{Stage::kTraining, kl}}).rfind("stage,kl1,kl2,kl3\n", 0) == 0);
  CHECK(mse_text({mse}).find("T+3") != std::string::npos);
}

TEST_CASE("R2 rows and manifold exports") {
  const RunConfig cfg = small_run();
  const auto tasks = physics::generate_task_grid(cfg.grid).tasks;
  NeurPhyModel model{cfg.model};
  const auto rows = global_r2(model, tasks, 20, 0);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].target == "l");
  CHECK(rows[0].degree == 1);
  CHECK(rows[1].degree == 2);
  CHECK(rows[3].target == "m");
  for (const auto& r : rows) CHECK(r.r2 <= 1.0);
  CHECK(r2_csv(rows).rfind("target,degree,r2\nl,1,", 0) == 0);

  const std::string t1 = manifold_tasks_csv(model, tasks, 20, 0);
  CHECK(t1.rfind("r_c_0,r_c_1,r_c_2,l,m\n", 0) == 0);
  CHECK(std::count(t1.begin(), t1.end(), '\n') == static_cast<long>(tasks.size() + 1));
  CHECK(manifold_tasks_csv(model, tasks, 20, 0) == t1);
  const std::string f1 = manifold_frames_csv(model, tasks);
  CHECK(f1.rfind("task_id,t,z_0,z_1,z_2,theta,omega\n", 0) == 0);
  CHECK(std::count(f1.begin(), f1.end(), '\n') == static_cast<long>(tasks.size() * 100 + 1));
  CHECK(manifold_frames_csv(model, tasks) == f1);
}
