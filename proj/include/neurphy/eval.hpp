#pragma once

// Evaluation of a trained model: polynomial R^2 of representations against
// ground-truth parameters, per-overshoot prediction MSE, per-overshoot KL,
// and CSV exports of the learned manifolds.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "neurphy/config.hpp"
#include "neurphy/model.hpp"
#include "neurphy/physics.hpp"
#include "neurphy/train.hpp"

namespace neurphy::eval {

enum class Stage { kTraining, kTest, kMetatest20, kMetatest2 };

const char* to_string(Stage s) noexcept;
/// "training", "test", "metatest20", "metatest2"; throws kConfig otherwise.
Stage stage_from_string(const std::string& s);
inline constexpr Stage kAllStages[] = {Stage::kTraining, Stage::kTest, Stage::kMetatest20, Stage::kMetatest2};

struct R2Report {
  std::string target;
  int degree = 1;
  double r2 = 0.0;
};

/// Monomials of degree <= `degree` (without the constant), in a fixed order:
/// x_i, then x_i * x_j for i <= j.
std::vector<double> poly_features(std::span<const double> x, int degree);

/// OLS with intercept on the polynomial expansion, normal equations with a
/// 1e-8 ridge. Throws kDegenerateTarget for constant targets and kInfeasible
/// when there are too few samples.
R2Report fit_poly_r2(const std::vector<std::vector<double>>& features, std::span<const double> target, int degree,
                     std::string target_name = {});

/// One task under evaluation: its contexts and the frames scored.
struct EvalTask {
  const physics::Task* task = nullptr;
  physics::ContextSet ctx;
  std::vector<std::size_t> frames;
};

/// Meta-train / meta-test assignment used by a run.
physics::MetaSplit run_split(const std::vector<physics::Task>& tasks, const RunConfig& cfg);

/// Frames and contexts for a stage.
///   training:   meta-train tasks, target frames, random contexts
///   test:       meta-train tasks, held-out frames, random contexts
///   metatestN:  meta-test tasks, frames t >= max(21, D+1), N prefix contexts
/// Frames are restricted to t >= D+1 so every overshoot up to D is defined;
/// tasks without eligible frames are dropped.
std::vector<EvalTask> stage_tasks(const physics::MetaSplit& split, Stage stage, const RunConfig& cfg,
                                  std::size_t D, std::uint64_t eval_seed);

struct MseTable {
  Stage stage = Stage::kTraining;
  std::vector<double> mse;  // indexed by overshoot 0..D
};

/// mse[d]: x_t predicted from the recognized mean at x_{t-d-1:t-d} after d
/// mean transitions, squared error averaged over coordinates, frames and tasks.
MseTable rollout_mse(const NeurPhyModel& model, const std::vector<EvalTask>& tasks, Stage stage, std::size_t D);

/// Mean per-overshoot KL (pre-beta) for d = 1..D, averaged over tasks, with
/// noise drawn from `eval_seed`.
std::vector<double> kl_report(const NeurPhyModel& model, const std::vector<EvalTask>& tasks, const TrainConfig& cfg,
                              std::size_t D, std::uint64_t eval_seed);

/// r_c per task with random contexts.
std::vector<std::vector<double>> task_representations(const NeurPhyModel& model, const std::vector<physics::Task>& tasks,
                                                      std::size_t n_c, std::uint64_t eval_seed);

/// One row per (global parameter, degree in {1,2}), pooled over `tasks`.
/// A constant parameter, or too few tasks for the fit, is reported with r2 = NaN.
std::vector<R2Report> global_r2(const NeurPhyModel& model, const std::vector<physics::Task>& tasks, std::size_t n_c,
                                std::uint64_t eval_seed);

/// Manifold exports. The task file has columns r_c_0..r_c_{dim_r-1} then the
/// globals, one row per task; the frame file has task_id, t, z_0..z_{dim_z-1}
/// then the true state, one row per frame t >= 1.
std::string manifold_tasks_csv(const NeurPhyModel& model, const std::vector<physics::Task>& tasks, std::size_t n_c,
                               std::uint64_t eval_seed);
std::string manifold_frames_csv(const NeurPhyModel& model, const std::vector<physics::Task>& tasks);
void export_manifold(const NeurPhyModel& model, const std::vector<physics::Task>& tasks, std::size_t n_c,
                     std::uint64_t eval_seed, const std::filesystem::path& tasks_path,
                     const std::filesystem::path& frames_path);

// Table rendering.
std::string r2_csv(const std::vector<R2Report>& rows);
std::string r2_text(const std::vector<R2Report>& rows);
/// Header stage,T+0..T+D.
std::string mse_csv(const std::vector<MseTable>& tables);
std::string mse_text(const std::vector<MseTable>& tables);
/// Header stage,kl1..klD.
std::string kl_csv(const std::vector<std::pair<Stage, std::vector<double>>>& rows);
std::string kl_text(const std::vector<std::pair<Stage, std::vector<double>>>& rows);

}  // namespace neurphy::eval
