#include "neurphy/physics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "neurphy/error.hpp"
#include "neurphy/rng.hpp"

namespace neurphy::physics {

const char* to_string(System s) noexcept {
  return s == System::kPendulum ? "pendulum" : "orbit";
}

System system_from_string(const std::string& name) {
  if (name == "pendulum") return System::kPendulum;
  if (name == "orbit") return System::kOrbit;
  throw Error(ErrorCode::kConfig, "unknown system '" + name + "'");
}

double Task::global(const std::string& name) const {
  for (const auto& [key, value] : globals) {
    if (key == name) return value;
  }
  throw Error(ErrorCode::kOutOfRange, "task has no global '" + name + "'");
}

std::vector<std::string> Task::state_names() const {
  if (system == System::kPendulum) return {"theta", "omega"};
  return {"r", "theta"};
}

PendulumState pendulum_step(const PendulumState& s, const PendulumParams& p) noexcept {
  return {s.theta + p.dt * s.omega,
          s.omega - p.dt * (p.mu / p.m * s.omega + p.g / p.l * std::sin(s.theta))};
}

Observation pendulum_endpoint(const PendulumState& s, const PendulumParams& p) noexcept {
  return {p.l * std::sin(s.theta), -p.l * std::cos(s.theta)};
}

Task pendulum_trajectory(const PendulumParams& p, std::size_t steps) {
  if (steps < 2) throw Error(ErrorCode::kOutOfRange, "trajectory needs at least 2 steps");
  if (!(p.l > 0 && p.m > 0 && p.g > 0 && p.mu >= 0 && p.dt > 0)) {
    throw Error(ErrorCode::kConfig, "pendulum parameters out of domain");
  }
  Task task;
  task.system = System::kPendulum;
  task.globals = {{"l", p.l}, {"m", p.m}};
  task.dt = p.dt;
  task.states.reserve(steps);
  task.observations.reserve(steps);
  PendulumState s{p.theta0, p.omega0};
  for (std::size_t t = 0; t < steps; ++t) {
    if (t > 0) s = pendulum_step(s, p);
    task.states.push_back({s.theta, s.omega});
    task.observations.push_back(pendulum_endpoint(s, p));
  }
  return task;
}

OrbitParams orbit_params_from_init(const OrbitInit& init) {
  if (!(init.r0 > 0 && init.v0theta > 0 && init.GM > 0) || init.theta0 != 0.0) {
    throw Error(ErrorCode::kConfig, "orbit initial condition out of domain");
  }
  OrbitParams p;
  p.GM = init.GM;
  p.h = init.r0 * init.v0theta;

  // Energy balance between the initial point and perihelion,
  //   (GM^2 / 2h^2)(e^2 - 1) = (v_r^2 + v_theta^2)/2 - GM/r0,
  // rearranged as a sum of squares so circular orbits do not lose all their
  // digits to cancellation:
  //   e^2 = (h^2/(GM r0) - 1)^2 + (h v_r / GM)^2.
  const double semi_latus = p.h * p.h / init.GM;
  const double ecos = semi_latus / init.r0 - 1.0;
  const double esin = p.h * init.v0r / init.GM;
  double e2 = ecos * ecos + esin * esin;
  e2 = std::max(e2, 0.0);
  double e = std::sqrt(e2);
  if (e >= 1.0) {
    throw Error(ErrorCode::kUnboundOrbit,
                "eccentricity " + std::to_string(e) + " >= 1 for r0=" + std::to_string(init.r0) +
                    " v0r=" + std::to_string(init.v0r) + " v0theta=" + std::to_string(init.v0theta));
  }
  if (e < 1e-9) e = 0.0;
  p.e = e;
  p.r_n = p.h * p.h / (init.GM * (1.0 + e));

  if (e == 0.0) {
    p.theta_n = 0.0;
  } else {
    // r0 = r_n (1+e) / (1 + e cos theta_n); only cos theta_n is determined.
    double c = (p.r_n * (1.0 + e) / init.r0 - 1.0) / e;
    c = std::clamp(c, -1.0, 1.0);
    const double angle = std::acos(c);
    // v_r = (GM/h) e sin(theta - theta_n): an outbound start needs theta_n < 0.
    p.theta_n = init.v0r > 0 ? -angle : angle;
  }
  return p;
}

double orbit_radius(const OrbitParams& p, double theta) noexcept {
  return p.r_n * (1.0 + p.e) / (1.0 + p.e * std::cos(theta - p.theta_n));
}

OrbitState orbit_step(const OrbitState& s, const OrbitParams& p, double dt) noexcept {
  const double theta = s.theta + dt * p.h / (s.r * s.r);
  return {orbit_radius(p, theta), theta};
}

Task orbit_trajectory(const OrbitInit& init, std::size_t steps, double dt) {
  if (steps < 2) throw Error(ErrorCode::kOutOfRange, "trajectory needs at least 2 steps");
  if (!(dt > 0)) throw Error(ErrorCode::kConfig, "dt must be positive");
  const OrbitParams p = orbit_params_from_init(init);
  Task task;
  task.system = System::kOrbit;
  task.globals = {{"r_n", p.r_n}, {"e", p.e}, {"theta_n", p.theta_n}};
  task.dt = dt;
  task.states.reserve(steps);
  task.observations.reserve(steps);
  OrbitState s{init.r0, init.theta0};
  for (std::size_t t = 0; t < steps; ++t) {
    if (t > 0) s = orbit_step(s, p, dt);
    task.states.push_back({s.r, s.theta});
    task.observations.push_back({s.r * std::cos(s.theta), s.r * std::sin(s.theta)});
  }
  return task;
}

std::vector<double> Range::points() const {
  if (steps == 0) throw Error(ErrorCode::kConfig, "grid range needs at least one step");
  std::vector<double> out(steps);
  if (steps == 1) {
    out[0] = min;
    return out;
  }
  for (std::size_t i = 0; i < steps; ++i) {
    // Exact endpoints; interior points by linear interpolation.
    out[i] = i + 1 == steps ? max : min + (max - min) * static_cast<double>(i) / static_cast<double>(steps - 1);
  }
  return out;
}

GridConfig full_scale_pendulum_grid() {
  GridConfig cfg;
  cfg.system = System::kPendulum;
  cfg.l = {1.0, 3.0, 21};
  cfg.m = {1.0, 4.0, 31};
  return cfg;
}

GridResult generate_task_grid(const GridConfig& cfg) {
  GridResult result;
  std::int64_t next_id = 0;
  auto push = [&](Task task) {
    task.task_id = next_id++;
    task.seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(task.task_id)});
    result.tasks.push_back(std::move(task));
  };

  if (cfg.system == System::kPendulum) {
    for (double l : cfg.l.points()) {
      for (double m : cfg.m.points()) {
        PendulumParams p{l, m, cfg.g, cfg.mu, cfg.theta0, cfg.omega0, cfg.dt};
        push(pendulum_trajectory(p, cfg.steps));
      }
    }
    return result;
  }

  for (double r0 : cfg.r0.points()) {
    for (double v0r : cfg.v0r.points()) {
      for (double v0theta : cfg.v0theta.points()) {
        OrbitInit init{r0, v0r, v0theta, 0.0, cfg.GM};
        try {
          push(orbit_trajectory(init, cfg.steps, cfg.dt));
        } catch (const Error& err) {
          if (err.code() != ErrorCode::kUnboundOrbit) throw;
          ++result.skipped_unbound;
        }
      }
    }
  }
  return result;
}

MetaSplit split_meta(const std::vector<Task>& tasks, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw Error(ErrorCode::kConfig, "split ratio must be in (0, 1)");
  std::vector<std::size_t> order(tasks.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, {0x6d657461ULL}));
  std::shuffle(order.begin(), order.end(), rng);

  const auto n_train = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(tasks.size()) + 1e-9));
  if (n_train == 0 || n_train >= tasks.size()) {
    throw Error(ErrorCode::kDegenerate, "meta split of " + std::to_string(tasks.size()) +
                                            " tasks at ratio " + std::to_string(ratio) + " leaves a side empty");
  }
  MetaSplit split;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? split.meta_train : split.meta_test).push_back(tasks[order[i]]);
  }
  return split;
}

ContextSet select_contexts(const Task& task, std::size_t n_c, ContextMode mode, std::uint64_t seed) {
  if (n_c == 0) throw Error(ErrorCode::kEmptyContext, "n_c must be at least 1");
  if (task.length() < 2) throw Error(ErrorCode::kInfeasible, "task too short for a context pair");
  std::size_t last_start = task.length() - 2;
  if (mode == ContextMode::kMetatestPrefix) last_start = std::min(last_start, kMetatestPrefixFrames - 2);
  const std::size_t available = last_start + 1;
  if (n_c > available) {
    throw Error(ErrorCode::kInfeasible, "requested " + std::to_string(n_c) + " contexts but only " +
                                            std::to_string(available) + " start indices exist");
  }

  // Partial Fisher-Yates: the first n_c slots are a uniform draw without replacement.
  std::vector<std::size_t> pool(available);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = 0; i < n_c; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, available - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(n_c);
  std::sort(pool.begin(), pool.end());

  ContextSet ctx;
  ctx.indices = pool;
  ctx.pairs.reserve(n_c);
  for (std::size_t t : pool) ctx.pairs.emplace_back(task.observations[t], task.observations[t + 1]);
  return ctx;
}

}  // namespace neurphy::physics
