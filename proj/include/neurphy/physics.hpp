#pragma once

// Reference simulators for the damped pendulum and Keplerian orbits, plus the
// task-grid generators and the meta/context splitting used for training.
//
// Both integrators reproduce the discrete update rules exactly (explicit Euler
// on the angle; the orbit radius is re-evaluated on the conic). The learned
// model has to match these generators, not the continuous ODEs.

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace neurphy::physics {

struct PendulumParams {
  double l = 2.0;
  double m = 1.0;
  double g = 10.0;
  double mu = 0.5;
  double theta0 = -3.14159265358979323846;
  double omega0 = 4.0;
  double dt = 0.1;
};

struct PendulumState {
  double theta = 0.0;
  double omega = 0.0;
};

struct OrbitInit {
  double r0 = 2.0;
  double v0r = 0.0;
  double v0theta = 0.7;
  double theta0 = 0.0;
  double GM = 1.0;
};

struct OrbitParams {
  double r_n = 0.0;
  double e = 0.0;
  double theta_n = 0.0;
  double h = 0.0;
  double GM = 1.0;
};

struct OrbitState {
  double r = 0.0;
  double theta = 0.0;
};

enum class System { kPendulum, kOrbit };

const char* to_string(System s) noexcept;
System system_from_string(const std::string& name);

using Observation = std::array<double, 2>;

/// One trajectory under one global-parameter setting.
struct Task {
  std::int64_t task_id = 0;
  System system = System::kPendulum;
  // Ordered: pendulum {l, m}; orbit {r_n, e, theta_n}.
  std::vector<std::pair<std::string, double>> globals;
  std::vector<std::vector<double>> states;
  std::vector<Observation> observations;
  double dt = 0.1;
  std::uint64_t seed = 0;

  std::size_t length() const noexcept { return observations.size(); }
  double global(const std::string& name) const;
  std::vector<std::string> state_names() const;

  friend bool operator==(const Task&, const Task&) = default;
};

/// Consecutive observation pairs (x_t, x_{t+1}) identified by their start index t.
struct ContextSet {
  std::vector<std::size_t> indices;
  std::vector<std::pair<Observation, Observation>> pairs;

  std::size_t size() const noexcept { return pairs.size(); }
};

// --- pendulum ---------------------------------------------------------------

PendulumState pendulum_step(const PendulumState& s, const PendulumParams& p) noexcept;
Observation pendulum_endpoint(const PendulumState& s, const PendulumParams& p) noexcept;
Task pendulum_trajectory(const PendulumParams& p, std::size_t steps);

// --- orbit ------------------------------------------------------------------

/// Converts an initial condition at theta0 = 0 into conic parameters.
/// Throws Error(kUnboundOrbit) when the resulting eccentricity is >= 1.
OrbitParams orbit_params_from_init(const OrbitInit& init);
/// Conic radius r(theta) for the given orbit.
double orbit_radius(const OrbitParams& p, double theta) noexcept;
OrbitState orbit_step(const OrbitState& s, const OrbitParams& p, double dt) noexcept;
Task orbit_trajectory(const OrbitInit& init, std::size_t steps, double dt);

// --- grids and splits ---------------------------------------------------------

struct Range {
  double min = 0.0;
  double max = 0.0;
  std::size_t steps = 1;

  /// Evenly spaced points; a single step yields `min`.
  std::vector<double> points() const;
};

struct GridConfig {
  System system = System::kPendulum;
  std::size_t steps = 101;  // frames per trajectory
  double dt = 0.1;
  std::uint64_t seed = 0;

  // Pendulum: l and m vary, the rest is fixed.
  Range l{1.0, 3.0, 5};
  Range m{1.0, 4.0, 5};
  double g = 10.0;
  double mu = 0.5;
  double theta0 = -3.14159265358979323846;
  double omega0 = 4.0;

  // Orbit: initial radius, radial and tangential velocity vary.
  Range r0{1.5, 2.0, 3};
  Range v0r{0.0, 0.2, 3};
  Range v0theta{0.7, 0.8, 3};
  double GM = 1.0;
};

/// 21 x 31 regular grid over l in [1,3], m in [1,4]: 651 tasks.
GridConfig full_scale_pendulum_grid();

struct GridResult {
  std::vector<Task> tasks;
  std::size_t skipped_unbound = 0;
};

/// Cartesian product of the varied parameters, one task per point. Task ids
/// follow the row-major order of the product (first parameter outermost).
GridResult generate_task_grid(const GridConfig& cfg);

struct MetaSplit {
  std::vector<Task> meta_train;
  std::vector<Task> meta_test;
};

/// Seeded shuffle then split; floor(ratio * n) tasks go to meta-train.
MetaSplit split_meta(const std::vector<Task>& tasks, double ratio, std::uint64_t seed);

enum class ContextMode { kTrainRandom, kMetatestPrefix };

/// Number of frames whose pairs are admissible in metatest_prefix mode.
inline constexpr std::size_t kMetatestPrefixFrames = 21;

ContextSet select_contexts(const Task& task, std::size_t n_c, ContextMode mode, std::uint64_t seed);

}  // namespace neurphy::physics
