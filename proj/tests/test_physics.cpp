#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "neurphy/error.hpp"
#include "neurphy/physics.hpp"

using namespace neurphy;
using namespace neurphy::physics;

namespace {

constexpr double kPi = std::numbers::pi;

bool rel_close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); }

// Energy-equation form of the eccentricity, written independently of the
// library's sum-of-squares evaluation.
double eccentricity_oracle(double r0, double v0r, double v0t, double gm) {
  const double h = r0 * v0t;
  const double energy = 0.5 * (v0r * v0r + v0t * v0t) - gm / r0;
  return std::sqrt(std::max(0.0, 1.0 + 2.0 * h * h * energy / (gm * gm)));
}

}  // namespace

TEST_CASE("pendulum_step matches hand-evaluated Euler updates") {
  PendulumParams p;
  p.l = 2, p.m = 1, p.g = 10, p.mu = 0.5, p.dt = 0.1;
  PendulumState s = pendulum_step({-kPi, 4.0}, p);
  CHECK(rel_close(s.theta, -kPi + 0.4, 1e-12));
  CHECK(rel_close(s.omega, 3.8, 1e-12));

  PendulumParams q;
  q.l = 1, q.m = 1, q.g = 10, q.mu = 0.5, q.dt = 0.1;
  s = pendulum_step({kPi / 2, 0.0}, q);
  CHECK(s.theta == kPi / 2);
  CHECK(rel_close(s.omega, -1.0, 1e-12));
}

TEST_CASE("pendulum fixed point is exact") {
  for (double l : {0.5, 1.0, 3.0}) {
    PendulumParams p;
    p.l = l;
    const auto s = pendulum_step({0.0, 0.0}, p);
    CHECK(s.theta == 0.0);
    CHECK(s.omega == 0.0);
  }
}

TEST_CASE("pendulum endpoint convention") {
  PendulumParams p;
  p.l = 2;
  auto e = pendulum_endpoint({0.0, 0.0}, p);
  CHECK(e[0] == 0.0);
  CHECK(e[1] == -2.0);
  p.l = 1;
  e = pendulum_endpoint({kPi / 2, 0.0}, p);
  CHECK(e[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(e[1]) < 1e-15);
  p.l = 3;
  e = pendulum_endpoint({kPi, 0.0}, p);
  CHECK(std::abs(e[0]) < 1e-15);
  CHECK(e[1] == doctest::Approx(3.0));
}

TEST_CASE("pendulum trajectory") {
  PendulumParams p;
  const Task t = pendulum_trajectory(p, 101);
  CHECK(t.length() == 101);
  CHECK(t.states.size() == 101);
  CHECK(t.system == System::kPendulum);
  CHECK(t.global("l") == 2.0);
  CHECK(t.global("m") == 1.0);
  CHECK(rel_close(t.states[1][0], -kPi + 0.4, 1e-12));
  CHECK(rel_close(t.states[1][1], 3.8, 1e-12));
  for (std::size_t i = 0; i < t.length(); ++i) {
    const auto e = pendulum_endpoint({t.states[i][0], t.states[i][1]}, p);
    CHECK(e == t.observations[i]);
  }

  PendulumParams rest;
  rest.theta0 = 0;
  rest.omega0 = 0;
  const Task two = pendulum_trajectory(rest, 2);
  CHECK(two.states[0] == two.states[1]);
  CHECK_THROWS_AS(pendulum_trajectory(p, 1), Error);
}

TEST_CASE("circular orbit conversion") {
  const OrbitParams o = orbit_params_from_init({2.0, 0.0, 1.0 / std::sqrt(2.0), 0.0, 1.0});
  CHECK(rel_close(o.h, std::sqrt(2.0), 1e-12));
  CHECK(o.e == 0.0);
  CHECK(rel_close(o.r_n, 2.0, 1e-12));
  CHECK(o.theta_n == 0.0);
}

TEST_CASE("e = 0.02 orbit conversion starts at aphelion") {
  const OrbitParams o = orbit_params_from_init({2.0, 0.0, 0.7, 0.0, 1.0});
  CHECK(rel_close(o.h, 1.4, 1e-12));
  CHECK(rel_close(o.e, eccentricity_oracle(2.0, 0.0, 0.7, 1.0), 1e-9));
  CHECK(rel_close(o.e, 0.02, 1e-9));
  CHECK(rel_close(o.r_n, 1.96 / 1.02, 1e-9));
  CHECK(rel_close(o.r_n, 1.9215686274509804, 1e-9));
  CHECK(rel_close(o.theta_n, kPi, 1e-9));
  CHECK(rel_close(orbit_radius(o, 0.0), 2.0, 1e-9));
}

TEST_CASE("orbit conversion invariants over the grid ranges") {
  for (double r0 : {1.5, 1.75, 2.0}) {
    for (double v0r : {-0.2, -0.05, 0.0, 0.1, 0.2}) {
      for (double v0t : {0.7, 0.75, 0.8}) {
        OrbitParams o;
        try {
          o = orbit_params_from_init({r0, v0r, v0t, 0.0, 1.0});
        } catch (const Error& e) {
          CHECK(e.code() == ErrorCode::kUnboundOrbit);
          CHECK(eccentricity_oracle(r0, v0r, v0t, 1.0) >= 1.0 - 1e-12);
          continue;
        }
        CAPTURE(r0);
        CAPTURE(v0r);
        CAPTURE(v0t);
        CHECK(o.e >= 0.0);
        CHECK(o.e < 1.0);
        CHECK(rel_close(o.e, eccentricity_oracle(r0, v0r, v0t, 1.0), 1e-9));
        CHECK(rel_close(o.h * o.h, o.GM * (1 + o.e) * o.r_n, 1e-9));
        CHECK(rel_close(orbit_radius(o, 0.0), r0, 1e-9));
        if (o.e > 1e-9 && v0r != 0.0) {
          // Radial velocity direction: dr/dtheta at theta = 0 has the sign of v0r.
          CHECK(std::signbit(std::sin(0.0 - o.theta_n)) == std::signbit(v0r));
        }
      }
    }
  }
}

TEST_CASE("unbound orbit is rejected") {
  CHECK_THROWS_AS(orbit_params_from_init({2.0, 0.0, 1.2, 0.0, 1.0}), Error);
  try {
    orbit_params_from_init({2.0, 0.5, 1.2, 0.0, 1.0});
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kUnboundOrbit);
  }
}

TEST_CASE("orbit_step hand examples") {
  const OrbitParams circ = orbit_params_from_init({2.0, 0.0, 1.0 / std::sqrt(2.0), 0.0, 1.0});
  const OrbitState s = orbit_step({2.0, 0.0}, circ, 0.1);
  CHECK(s.r == circ.r_n);
  CHECK(rel_close(s.theta, 0.1 * std::sqrt(2.0) / 4.0, 1e-12));
  CHECK(rel_close(s.theta, 0.035355339059327376, 1e-9));
}

TEST_CASE("orbit trajectory properties") {
  const Task circ = orbit_trajectory({2.0, 0.0, 1.0 / std::sqrt(2.0), 0.0, 1.0}, 3, 0.1);
  for (const auto& st : circ.states) CHECK(rel_close(st[0], 2.0, 1e-12));
  CHECK(circ.global("e") == 0.0);

  const OrbitInit init{1.6, 0.15, 0.75, 0.0, 1.0};
  const OrbitParams o = orbit_params_from_init(init);
  const Task t = orbit_trajectory(init, 101, 0.1);
  CHECK(t.length() == 101);
  CHECK(t.global("r_n") == o.r_n);
  CHECK(t.global("e") == o.e);
  CHECK(t.global("theta_n") == o.theta_n);
  const double r_max = o.r_n * (1 + o.e) / (1 - o.e);
  for (std::size_t i = 0; i < t.length(); ++i) {
    const double r = t.states[i][0], th = t.states[i][1];
    CHECK(std::hypot(t.observations[i][0], t.observations[i][1]) == doctest::Approx(r).epsilon(1e-12));
    CHECK(r >= o.r_n * (1 - 1e-9));
    CHECK(r <= r_max * (1 + 1e-9));
    if (i > 0) {
      CHECK(th > t.states[i - 1][1]);
      CHECK(rel_close(r, orbit_radius(o, th), 1e-12));
    }
  }
}

TEST_CASE("task grids") {
  GridConfig g;
  g.l = {1, 3, 3};
  g.m = {1, 4, 3};
  const auto r = generate_task_grid(g);
  CHECK(r.tasks.size() == 9);
  std::set<std::pair<double, double>> points;
  for (std::size_t i = 0; i < r.tasks.size(); ++i) {
    CHECK(r.tasks[i].task_id == static_cast<std::int64_t>(i));
    points.insert({r.tasks[i].global("l"), r.tasks[i].global("m")});
  }
  CHECK(points.count({2.0, 2.5}) == 1);
  CHECK(points.size() == 9);
  CHECK(generate_task_grid(g).tasks == r.tasks);

  CHECK(generate_task_grid(full_scale_pendulum_grid()).tasks.size() == 651);

  GridConfig og;
  og.system = System::kOrbit;
  og.r0 = {2.0, 2.0, 1};
  og.v0r = {0.0, 0.0, 1};
  og.v0theta = {1.0 / std::sqrt(2.0), 0.8, 2};
  const auto orb = generate_task_grid(og);
  REQUIRE(orb.tasks.size() == 2);
  CHECK(orb.tasks[0].global("e") == 0.0);

  og.v0theta = {0.7, 1.3, 2};
  const auto skipped = generate_task_grid(og);
  CHECK(skipped.tasks.size() == 1);
  CHECK(skipped.skipped_unbound == 1);
}

TEST_CASE("meta split") {
  GridConfig g;
  g.l = {1, 3, 5};
  g.m = {1, 4, 2};
  const auto tasks = generate_task_grid(g).tasks;
  const auto s = split_meta(tasks, 0.9, 7);
  CHECK(s.meta_train.size() == 9);
  CHECK(s.meta_test.size() == 1);
  const auto again = split_meta(tasks, 0.9, 7);
  CHECK(again.meta_train == s.meta_train);
  std::set<std::int64_t> ids;
  for (const auto& t : s.meta_train) ids.insert(t.task_id);
  for (const auto& t : s.meta_test) ids.insert(t.task_id);
  CHECK(ids.size() == tasks.size());

  const std::vector<Task> two(tasks.begin(), tasks.begin() + 2);
  const auto half = split_meta(two, 0.5, 1);
  CHECK(half.meta_train.size() == 1);
  CHECK(half.meta_test.size() == 1);
  CHECK_THROWS_AS(split_meta(two, 0.1, 1), Error);
  CHECK_THROWS_AS(split_meta(two, 1.0, 1), Error);
}

TEST_CASE("context selection") {
  PendulumParams p;
  const Task t = pendulum_trajectory(p, 101);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto c = select_contexts(t, 20, ContextMode::kMetatestPrefix, seed);
    CHECK(c.size() == 20);
    for (auto i : c.indices) CHECK(i <= 19);
    const auto r = select_contexts(t, 20, ContextMode::kTrainRandom, seed);
    std::set<std::size_t> uniq(r.indices.begin(), r.indices.end());
    CHECK(uniq.size() == 20);
    for (std::size_t k = 0; k < r.size(); ++k) {
      CHECK(r.indices[k] <= 99);
      CHECK(r.pairs[k].first == t.observations[r.indices[k]]);
      CHECK(r.pairs[k].second == t.observations[r.indices[k] + 1]);
    }
    CHECK(select_contexts(t, 20, ContextMode::kTrainRandom, seed).indices == r.indices);
  }
  CHECK_THROWS_AS(select_contexts(t, 21, ContextMode::kMetatestPrefix, 0), Error);
  CHECK_THROWS_AS(select_contexts(t, 0, ContextMode::kTrainRandom, 0), Error);

  const Task two = pendulum_trajectory(p, 2);
  const auto one = select_contexts(two, 1, ContextMode::kTrainRandom, 3);
  CHECK(one.indices == std::vector<std::size_t>{0});
  CHECK(one.pairs[0].first == two.observations[0]);
  CHECK(one.pairs[0].second == two.observations[1]);
}
