#include "neurphy/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "neurphy/error.hpp"
#include "neurphy/io_util.hpp"

namespace neurphy {

using ad::Tensor;
using ad::Var;
using physics::Task;

namespace {

constexpr std::uint64_t kTagFrames = 0x6672616dULL;
constexpr std::uint64_t kTagShuffle = 0x73687566ULL;
constexpr std::uint64_t kTagContext = 0x63747874ULL;
constexpr std::uint64_t kTagNoise = 0x6e6f6973ULL;

// Re-raises a non-finite error with the name of the loss term that produced it.
template <class F>
auto named_term(const std::string& term, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kNonFinite) throw;
    throw Error(ErrorCode::kNonFinite, term + ": " + e.what());
  }
}

LossBreakdown read_terms(const ElboTerms& terms) {
  LossBreakdown out;
  out.recon = terms.recon.value().item();
  for (Var k : terms.kl) out.kl.push_back(k.value().item());
  out.total = terms.total.value().item();
  return out;
}

void add_into(LossBreakdown& acc, const LossBreakdown& x) {
  if (acc.kl.empty()) acc.kl.assign(x.kl.size(), 0.0);
  acc.recon += x.recon;
  acc.total += x.total;
  for (std::size_t d = 0; d < x.kl.size(); ++d) acc.kl[d] += x.kl[d];
}

}  // namespace

double TrainConfig::beta_at(std::size_t d) const {
  if (beta.empty()) return 1.0;
  if (beta.size() == 1) return beta[0];
  return beta.at(d - 1);
}

void TrainConfig::validate() const {
  if (D == 0) throw Error(ErrorCode::kConfig, "D must be at least 1");
  if (!beta.empty() && beta.size() != 1 && beta.size() != D) {
    throw Error(ErrorCode::kConfig, "beta needs 1 or D entries");
  }
  for (double b : beta) {
    if (!(b >= 0)) throw Error(ErrorCode::kConfig, "beta weights must be non-negative");
  }
  if (batch_tasks == 0) throw Error(ErrorCode::kConfig, "batch_tasks must be at least 1");
  if (!(lr > 0)) throw Error(ErrorCode::kConfig, "lr must be positive");
  if (n_c == 0) throw Error(ErrorCode::kConfig, "n_c must be at least 1");
  if (!(target_fraction > 0 && target_fraction < 1)) throw Error(ErrorCode::kConfig, "target_fraction must be in (0,1)");
  if (!(meta_train_ratio > 0 && meta_train_ratio < 1)) throw Error(ErrorCode::kConfig, "meta_train_ratio must be in (0,1)");
  if (!(sigma_obs > 0)) throw Error(ErrorCode::kConfig, "sigma_obs must be positive");
}

std::uint64_t frame_split_seed(std::uint64_t run_seed, const Task& task) {
  return derive_seed(run_seed, {kTagFrames, static_cast<std::uint64_t>(task.task_id)});
}

FrameSplit split_frames(const Task& task, double fraction, std::uint64_t seed, std::size_t D) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw Error(ErrorCode::kConfig, "frame fraction must be in (0, 1)");
  const std::size_t T = task.length();
  std::vector<std::size_t> order(T);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_target = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(T) + 1e-9));

  FrameSplit split;
  for (std::size_t i = 0; i < T; ++i) {
    const std::size_t t = order[i];
    if (t < D + 1) continue;
    (i < n_target ? split.targets : split.heldout).push_back(t);
  }
  std::sort(split.targets.begin(), split.targets.end());
  std::sort(split.heldout.begin(), split.heldout.end());
  if (split.targets.empty()) {
    throw Error(ErrorCode::kDegenerate, "task " + std::to_string(task.task_id) + " has no eligible target frames");
  }
  return split;
}

ElboTerms elbo_terms(const NeurPhyModel& model, const nn::Binding& params, const Task& task,
                     const physics::ContextSet& ctx, std::span<const std::size_t> targets, const TrainConfig& cfg,
                     Rng& rng) {
  cfg.validate();
  if (targets.empty()) throw Error(ErrorCode::kDegenerate, "no target frames");
  for (std::size_t t : targets) {
    if (t < cfg.D + 1 || t >= task.length()) {
      throw Error(ErrorCode::kOutOfRange, "target frame " + std::to_string(t) + " is not eligible for D=" +
                                              std::to_string(cfg.D));
    }
  }
  ad::Tape& tape = params.tape();
  const double inv_n = 1.0 / static_cast<double>(targets.size());

  Var r_c = named_term("context encoding", [&] { return model.encode_context(params, ctx); });

  ElboTerms out;
  const nn::DiagGaussian posterior =
      named_term("recognition at t", [&] { return model.recognize(params, tape.constant(frame_pairs(task, targets))); });
  out.recon = named_term("reconstruction term", [&] {
    Var z_t = nn::reparameterize(posterior, nn::standard_normal(posterior.mean.shape(), rng));
    Var x_hat = model.decode(params, z_t);
    return ad::scale(nn::gaussian_obs_nll(tape.constant(frames(task, targets)), x_hat, cfg.sigma_obs), inv_n);
  });

  Var weighted;
  bool have_weighted = false;
  for (std::size_t d = 1; d <= cfg.D; ++d) {
    Var kl = named_term("KL term d=" + std::to_string(d), [&] {
      nn::DiagGaussian start = model.recognize(params, tape.constant(frame_pairs(task, targets, d)));
      Var z = nn::reparameterize(start, nn::standard_normal(start.mean.shape(), rng));
      if (d > 1) z = model.rollout(params, z, r_c, d - 1, RolloutMode::kSample, &rng).states.back();
      nn::DiagGaussian prior = model.transition(params, z, r_c);
      return ad::scale(nn::kl_diag_gauss(posterior, prior), inv_n);
    });
    out.kl.push_back(kl);
    Var term = ad::scale(kl, cfg.beta_at(d) / static_cast<double>(cfg.D));
    weighted = have_weighted ? ad::add(weighted, term) : term;
    have_weighted = true;
  }
  out.total = ad::add(out.recon, weighted);
  return out;
}

LossBreakdown elbo_loss(const NeurPhyModel& model, const Task& task, const physics::ContextSet& ctx,
                        std::span<const std::size_t> targets, const TrainConfig& cfg, Rng& rng) {
  ad::Tape tape;
  nn::Binding params(tape, model.parameters(), false);
  return read_terms(elbo_terms(model, params, task, ctx, targets, cfg, rng));
}

LossAndGradient elbo_gradient(const NeurPhyModel& model, const Task& task, const physics::ContextSet& ctx,
                              std::span<const std::size_t> targets, const TrainConfig& cfg, Rng& rng) {
  ad::Tape tape;
  nn::Binding params(tape, model.parameters(), true);
  ElboTerms terms = elbo_terms(model, params, task, ctx, targets, cfg, rng);
  tape.backward(terms.total);
  return {read_terms(terms), params.gradients()};
}

TrainResult train(const std::vector<Task>& tasks, const ModelConfig& model_cfg, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  TrainResult result{NeurPhyModel(model_cfg), {}};
  result.history = train_model(result.model, tasks, cfg, on_epoch);
  return result;
}

std::vector<LossBreakdown> train_model(NeurPhyModel& model, const std::vector<Task>& tasks, const TrainConfig& cfg,
                                       const EpochCallback& on_epoch) {
  cfg.validate();
  if (tasks.empty()) throw Error(ErrorCode::kDegenerate, "no training tasks");

  std::vector<std::vector<std::size_t>> targets;
  targets.reserve(tasks.size());
  for (const auto& task : tasks) {
    targets.push_back(split_frames(task, cfg.target_fraction, frame_split_seed(cfg.seed, task), cfg.D).targets);
  }

  nn::AdamState adam = nn::make_adam_state(model.parameters(), {cfg.lr, 0.9, 0.999, 1e-8});
  std::vector<LossBreakdown> history;
  std::vector<std::size_t> order(tasks.size());

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(cfg.seed, {kTagShuffle, epoch}));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    LossBreakdown epoch_sum;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_tasks) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_tasks);
      std::vector<Tensor> grads;
      // Fixed task order inside the batch keeps the gradient sum reproducible.
      for (std::size_t b = begin; b < end; ++b) {
        const Task& task = tasks[order[b]];
        const auto id = static_cast<std::uint64_t>(task.task_id);
        const physics::ContextSet ctx = physics::select_contexts(
            task, cfg.n_c, physics::ContextMode::kTrainRandom, derive_seed(cfg.seed, {kTagContext, epoch, id}));
        Rng noise(derive_seed(cfg.seed, {kTagNoise, epoch, id}));
        LossAndGradient lg = elbo_gradient(model, task, ctx, targets[order[b]], cfg, noise);
        add_into(epoch_sum, lg.loss);
        if (grads.empty()) {
          grads = std::move(lg.grads);
        } else {
          for (std::size_t i = 0; i < grads.size(); ++i) {
            auto dst = grads[i].data();
            auto src = lg.grads[i].data();
            for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
          }
        }
      }
      const double inv_batch = 1.0 / static_cast<double>(end - begin);
      for (auto& g : grads) {
        for (auto& v : g.data()) v *= inv_batch;
      }
      nn::adam_step(model.parameters(), grads, adam);
    }

    const double inv_tasks = 1.0 / static_cast<double>(tasks.size());
    epoch_sum.recon *= inv_tasks;
    epoch_sum.total *= inv_tasks;
    for (auto& k : epoch_sum.kl) k *= inv_tasks;
    history.push_back(std::move(epoch_sum));
    if (on_epoch) on_epoch(epoch, model, history);
  }
  return history;
}

std::string metrics_csv(const std::vector<LossBreakdown>& history, std::size_t D) {
  std::string out = "epoch,recon";
  for (std::size_t d = 1; d <= D; ++d) out += ",kl" + std::to_string(d);
  out += ",total\n";
  for (std::size_t e = 0; e < history.size(); ++e) {
    const auto& h = history[e];
    out += std::to_string(e) + "," + format_real(h.recon);
    for (double k : h.kl) out += "," + format_real(k);
    out += "," + format_real(h.total) + "\n";
  }
  return out;
}

}  // namespace neurphy
