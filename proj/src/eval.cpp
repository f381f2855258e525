#include "neurphy/eval.hpp"

#include <Eigen/Dense>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "neurphy/error.hpp"
#include "neurphy/io_util.hpp"

namespace neurphy::eval {

using ad::Tensor;
using ad::Var;
using physics::Task;

namespace {

constexpr std::uint64_t kTagMeta = 0x6d657461ULL;
constexpr std::uint64_t kTagEvalCtx = 0x65637478ULL;
constexpr std::uint64_t kTagEvalNoise = 0x656e6f69ULL;
constexpr std::uint64_t kTagRepr = 0x72657072ULL;

std::uint64_t id_of(const Task& t) { return static_cast<std::uint64_t>(t.task_id); }

std::vector<std::size_t> eligible(std::vector<std::size_t> frames, std::size_t first) {
  frames.erase(std::remove_if(frames.begin(), frames.end(), [first](std::size_t t) { return t < first; }),
               frames.end());
  return frames;
}

std::string text_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  auto line = [&](const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c) out += "  ";
      out += c == 0 ? fmt::format("{:<{}}", cells[c], width[c]) : fmt::format("{:>{}}", cells[c], width[c]);
    }
    return out + "\n";
  };
  std::string out = line(header);
  for (const auto& r : rows) out += line(r);
  return out;
}

std::string short_real(double v) { return std::isnan(v) ? "n/a" : fmt::format("{:.6g}", v); }

}  // namespace

const char* to_string(Stage s) noexcept {
  switch (s) {
    case Stage::kTraining: return "training";
    case Stage::kTest: return "test";
    case Stage::kMetatest20: return "metatest20";
    case Stage::kMetatest2: return "metatest2";
  }
  return "unknown";
}

Stage stage_from_string(const std::string& s) {
  for (Stage st : kAllStages) {
    if (s == to_string(st)) return st;
  }
  throw Error(ErrorCode::kConfig, "unknown stage '" + s + "' (training, test, metatest20, metatest2)");
}

std::vector<double> poly_features(std::span<const double> x, int degree) {
  if (degree != 1 && degree != 2) throw Error(ErrorCode::kConfig, "polynomial degree must be 1 or 2");
  std::vector<double> out(x.begin(), x.end());
  if (degree == 2) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      for (std::size_t j = i; j < x.size(); ++j) out.push_back(x[i] * x[j]);
    }
  }
  return out;
}

R2Report fit_poly_r2(const std::vector<std::vector<double>>& features, std::span<const double> target, int degree,
                     std::string target_name) {
  const std::size_t n = features.size();
  if (n != target.size()) throw Error(ErrorCode::kShapeMismatch, "feature and target counts differ");
  if (n == 0) throw Error(ErrorCode::kInfeasible, "no samples");
  const std::size_t width = features[0].size();

  std::vector<std::vector<double>> rows;
  rows.reserve(n);
  for (const auto& f : features) {
    if (f.size() != width) throw Error(ErrorCode::kShapeMismatch, "ragged feature rows");
    rows.push_back(poly_features(f, degree));
  }
  const std::size_t p = rows[0].size() + 1;
  if (n < p + 1) {
    throw Error(ErrorCode::kInfeasible, fmt::format("{} samples cannot fit {} polynomial terms", n, p));
  }

  const double y_mean = std::accumulate(target.begin(), target.end(), 0.0) / static_cast<double>(n);
  double ss_tot = 0.0;
  for (double y : target) ss_tot += (y - y_mean) * (y - y_mean);
  if (std::all_of(target.begin(), target.end(), [&](double y) { return y == target[0]; }) || !(ss_tot > 0.0)) {
    throw Error(ErrorCode::kDegenerateTarget, "target '" + target_name + "' has zero variance");
  }

  Eigen::MatrixXd X(n, p);
  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    for (std::size_t k = 1; k < p; ++k) X(i, k) = rows[i][k - 1];
    y(i) = target[i];
  }
  Eigen::MatrixXd A = X.transpose() * X;
  A.diagonal().array() += 1e-8;
  const Eigen::VectorXd beta = A.ldlt().solve(X.transpose() * y);
  const double ss_res = (y - X * beta).squaredNorm();
  return {std::move(target_name), degree, 1.0 - ss_res / ss_tot};
}

physics::MetaSplit run_split(const std::vector<Task>& tasks, const RunConfig& cfg) {
  return physics::split_meta(tasks, cfg.train.meta_train_ratio, derive_seed(cfg.train.seed, {kTagMeta}));
}

std::vector<EvalTask> stage_tasks(const physics::MetaSplit& split, Stage stage, const RunConfig& cfg, std::size_t D,
                                  std::uint64_t eval_seed) {
  std::vector<EvalTask> out;
  const bool meta_test = stage == Stage::kMetatest20 || stage == Stage::kMetatest2;
  const auto& pool = meta_test ? split.meta_test : split.meta_train;
  for (const Task& task : pool) {
    EvalTask et;
    et.task = &task;
    if (meta_test) {
      const std::size_t n_c = stage == Stage::kMetatest20 ? 20 : 2;
      et.ctx = physics::select_contexts(task, n_c, physics::ContextMode::kMetatestPrefix,
                                        derive_seed(eval_seed, {kTagEvalCtx, id_of(task)}));
      const std::size_t first = std::max(physics::kMetatestPrefixFrames, D + 1);
      for (std::size_t t = first; t < task.length(); ++t) et.frames.push_back(t);
    } else {
      et.ctx = physics::select_contexts(task, cfg.train.n_c, physics::ContextMode::kTrainRandom,
                                        derive_seed(eval_seed, {kTagEvalCtx, id_of(task)}));
      FrameSplit fs = split_frames(task, cfg.train.target_fraction, frame_split_seed(cfg.train.seed, task), D);
      et.frames = eligible(stage == Stage::kTraining ? fs.targets : fs.heldout, D + 1);
    }
    if (!et.frames.empty()) out.push_back(std::move(et));
  }
  return out;
}

MseTable rollout_mse(const NeurPhyModel& model, const std::vector<EvalTask>& tasks, Stage stage, std::size_t D) {
  MseTable table{stage, std::vector<double>(D + 1, 0.0)};
  std::vector<double> count(D + 1, 0.0);
  for (const auto& et : tasks) {
    ad::Tape tape;
    nn::Binding params(tape, model.parameters(), false);
    Var r_c = model.encode_context(params, et.ctx);
    const Tensor truth = frames(*et.task, et.frames);
    for (std::size_t d = 0; d <= D; ++d) {
      nn::DiagGaussian q = model.recognize(params, tape.constant(frame_pairs(*et.task, et.frames, d)));
      Var z = q.mean;
      if (d > 0) z = model.rollout(params, z, r_c, d, RolloutMode::kMean, nullptr).states.back();
      const Tensor& pred = model.decode(params, z).value();
      for (std::size_t k = 0; k < pred.numel(); ++k) {
        const double e = pred[k] - truth[k];
        table.mse[d] += e * e;
      }
      count[d] += static_cast<double>(pred.numel());
    }
  }
  for (std::size_t d = 0; d <= D; ++d) {
    table.mse[d] = count[d] > 0 ? table.mse[d] / count[d] : std::numeric_limits<double>::quiet_NaN();
  }
  return table;
}

std::vector<double> kl_report(const NeurPhyModel& model, const std::vector<EvalTask>& tasks, const TrainConfig& cfg,
                              std::size_t D, std::uint64_t eval_seed) {
  TrainConfig c = cfg;
  c.D = D;
  c.beta.clear();
  std::vector<double> out(D, 0.0);
  if (tasks.empty()) return std::vector<double>(D, std::numeric_limits<double>::quiet_NaN());
  for (const auto& et : tasks) {
    Rng rng(derive_seed(eval_seed, {kTagEvalNoise, id_of(*et.task)}));
    const LossBreakdown lb = elbo_loss(model, *et.task, et.ctx, et.frames, c, rng);
    for (std::size_t d = 0; d < D; ++d) out[d] += lb.kl[d];
  }
  for (double& v : out) v /= static_cast<double>(tasks.size());
  return out;
}

std::vector<std::vector<double>> task_representations(const NeurPhyModel& model, const std::vector<Task>& tasks,
                                                      std::size_t n_c, std::uint64_t eval_seed) {
  std::vector<std::vector<double>> out;
  out.reserve(tasks.size());
  for (const Task& task : tasks) {
    const auto ctx = physics::select_contexts(task, n_c, physics::ContextMode::kTrainRandom,
                                              derive_seed(eval_seed, {kTagRepr, id_of(task)}));
    out.push_back(global_representation(model, ctx));
  }
  return out;
}

std::vector<R2Report> global_r2(const NeurPhyModel& model, const std::vector<Task>& tasks, std::size_t n_c,
                                std::uint64_t eval_seed) {
  if (tasks.empty()) throw Error(ErrorCode::kInfeasible, "no tasks for R^2");
  const auto reps = task_representations(model, tasks, n_c, eval_seed);
  std::vector<R2Report> out;
  for (const auto& [name, _] : tasks[0].globals) {
    std::vector<double> target;
    for (const Task& t : tasks) target.push_back(t.global(name));
    for (int degree : {1, 2}) {
      try {
        out.push_back(fit_poly_r2(reps, target, degree, name));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kDegenerateTarget && e.code() != ErrorCode::kInfeasible) throw;
        out.push_back({name, degree, std::numeric_limits<double>::quiet_NaN()});
      }
    }
  }
  return out;
}

std::string manifold_tasks_csv(const NeurPhyModel& model, const std::vector<Task>& tasks, std::size_t n_c,
                               std::uint64_t eval_seed) {
  const std::size_t dim_r = model.config().dim_r;
  std::string out;
  for (std::size_t k = 0; k < dim_r; ++k) out += (k ? ",r_c_" : "r_c_") + std::to_string(k);
  if (!tasks.empty()) {
    for (const auto& [name, _] : tasks[0].globals) out += "," + name;
  }
  out += "\n";
  const auto reps = task_representations(model, tasks, n_c, eval_seed);
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    for (std::size_t k = 0; k < dim_r; ++k) out += (k ? "," : "") + format_real(reps[i][k]);
    for (const auto& [_, v] : tasks[i].globals) out += "," + format_real(v);
    out += "\n";
  }
  return out;
}

std::string manifold_frames_csv(const NeurPhyModel& model, const std::vector<Task>& tasks) {
  const std::size_t dim_z = model.config().dim_z;
  std::string out = "task_id,t";
  for (std::size_t k = 0; k < dim_z; ++k) out += ",z_" + std::to_string(k);
  if (!tasks.empty()) {
    for (const auto& name : tasks[0].state_names()) out += "," + name;
  }
  out += "\n";
  for (const Task& task : tasks) {
    if (task.length() < 2) continue;
    std::vector<std::size_t> ts;
    for (std::size_t t = 1; t < task.length(); ++t) ts.push_back(t);
    ad::Tape tape;
    nn::Binding params(tape, model.parameters(), false);
    const Tensor& z = model.recognize(params, tape.constant(frame_pairs(task, ts))).mean.value();
    for (std::size_t i = 0; i < ts.size(); ++i) {
      out += std::to_string(task.task_id) + "," + std::to_string(ts[i]);
      for (std::size_t k = 0; k < dim_z; ++k) out += "," + format_real(z(i, k));
      for (double s : task.states[ts[i]]) out += "," + format_real(s);
      out += "\n";
    }
  }
  return out;
}

void export_manifold(const NeurPhyModel& model, const std::vector<Task>& tasks, std::size_t n_c,
                     std::uint64_t eval_seed, const std::filesystem::path& tasks_path,
                     const std::filesystem::path& frames_path) {
  write_file_atomic(tasks_path, manifold_tasks_csv(model, tasks, n_c, eval_seed));
  write_file_atomic(frames_path, manifold_frames_csv(model, tasks));
}

std::string r2_csv(const std::vector<R2Report>& rows) {
  std::string out = "target,degree,r2\n";
  for (const auto& r : rows) out += r.target + "," + std::to_string(r.degree) + "," + format_real(r.r2) + "\n";
  return out;
}

std::string r2_text(const std::vector<R2Report>& rows) {
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows) {
    cells.push_back({r.target, r.degree == 1 ? "linear" : "quadratic", short_real(r.r2)});
  }
  return text_table({"parameter", "fit", "R2"}, cells);
}

std::string mse_csv(const std::vector<MseTable>& tables) {
  const std::size_t cols = tables.empty() ? 0 : tables[0].mse.size();
  std::string out = "stage";
  for (std::size_t d = 0; d < cols; ++d) out += ",T+" + std::to_string(d);
  out += "\n";
  for (const auto& t : tables) {
    out += to_string(t.stage);
    for (double v : t.mse) out += "," + format_real(v);
    out += "\n";
  }
  return out;
}

std::string mse_text(const std::vector<MseTable>& tables) {
  const std::size_t cols = tables.empty() ? 0 : tables[0].mse.size();
  std::vector<std::string> header{"stage"};
  for (std::size_t d = 0; d < cols; ++d) header.push_back("T+" + std::to_string(d));
  std::vector<std::vector<std::string>> cells;
  for (const auto& t : tables) {
    std::vector<std::string> row{to_string(t.stage)};
    for (double v : t.mse) row.push_back(short_real(v));
    cells.push_back(std::move(row));
  }
  return text_table(header, cells);
}

std::string kl_csv(const std::vector<std::pair<Stage, std::vector<double>>>& rows) {
  const std::size_t cols = rows.empty() ? 0 : rows[0].second.size();
  std::string out = "stage";
  for (std::size_t d = 1; d <= cols; ++d) out += ",kl" + std::to_string(d);
  out += "\n";
  for (const auto& [stage, kl] : rows) {
    out += to_string(stage);
    for (double v : kl) out += "," + format_real(v);
    out += "\n";
  }
  return out;
}

std::string kl_text(const std::vector<std::pair<Stage, std::vector<double>>>& rows) {
  const std::size_t cols = rows.empty() ? 0 : rows[0].second.size();
  std::vector<std::string> header{"stage"};
  for (std::size_t d = 1; d <= cols; ++d) header.push_back("KL" + std::to_string(d));
  std::vector<std::vector<std::string>> cells;
  for (const auto& [stage, kl] : rows) {
    std::vector<std::string> row{to_string(stage)};
    for (double v : kl) row.push_back(short_real(v));
    cells.push_back(std::move(row));
  }
  return text_table(header, cells);
}

}  // namespace neurphy::eval
