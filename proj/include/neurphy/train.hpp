#pragma once

// Latent-overshooting ELBO and the optimisation loop.
//
// For a target frame t the loss is the reconstruction NLL of x_t under a
// sample from q(z_t | x_{t-1:t}), plus for every overshoot d = 1..D the KL
// between that posterior and the prior reached by sampling
// z_{t-d} ~ q(. | x_{t-d-1:t-d}) and applying the transition d times:
//
//   total = recon + (1/D) * sum_d beta_d * KL_d
//
// Every term uses a single reparameterised sample.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "neurphy/autodiff.hpp"
#include "neurphy/model.hpp"
#include "neurphy/nnet.hpp"
#include "neurphy/physics.hpp"

namespace neurphy {

struct TrainConfig {
  std::size_t D = 5;
  /// Weights beta_1..beta_D; empty means all ones, a single value is broadcast.
  std::vector<double> beta;
  std::size_t batch_tasks = 8;
  std::size_t epochs = 300;
  double lr = 1e-3;
  std::size_t n_c = 20;
  double target_fraction = 0.9;
  double meta_train_ratio = 0.9;
  double sigma_obs = 0.1;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 0;

  /// beta_d for d in 1..D.
  double beta_at(std::size_t d) const;
  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct LossBreakdown {
  double recon = 0.0;
  std::vector<double> kl;  // kl[d-1] for d = 1..D, before beta weighting
  double total = 0.0;

  friend bool operator==(const LossBreakdown&, const LossBreakdown&) = default;
};

struct FrameSplit {
  std::vector<std::size_t> targets;
  std::vector<std::size_t> heldout;
};

/// Seeded assignment of every frame to target (a `fraction` share) or
/// held-out, then restricted to frames t >= D+1 so that x_{t-d-1:t-d} exists
/// for every d <= D. The assignment itself does not depend on D.
FrameSplit split_frames(const physics::Task& task, double fraction, std::uint64_t seed, std::size_t D);

/// Seed of the frame split used for a task inside a run.
std::uint64_t frame_split_seed(std::uint64_t run_seed, const physics::Task& task);

/// Loss terms as tape nodes.
struct ElboTerms {
  ad::Var recon;
  std::vector<ad::Var> kl;
  ad::Var total;
};

ElboTerms elbo_terms(const NeurPhyModel& model, const nn::Binding& params, const physics::Task& task,
                     const physics::ContextSet& ctx, std::span<const std::size_t> targets, const TrainConfig& cfg,
                     Rng& rng);

/// Loss values with frozen parameters. Recon and each KL are means over targets.
LossBreakdown elbo_loss(const NeurPhyModel& model, const physics::Task& task, const physics::ContextSet& ctx,
                        std::span<const std::size_t> targets, const TrainConfig& cfg, Rng& rng);

struct LossAndGradient {
  LossBreakdown loss;
  std::vector<ad::Tensor> grads;  // parameter registration order
};

LossAndGradient elbo_gradient(const NeurPhyModel& model, const physics::Task& task, const physics::ContextSet& ctx,
                              std::span<const std::size_t> targets, const TrainConfig& cfg, Rng& rng);

/// Called after every epoch with the 0-based epoch index.
using EpochCallback = std::function<void(std::size_t epoch, const NeurPhyModel&, const std::vector<LossBreakdown>&)>;

struct TrainResult {
  NeurPhyModel model;
  std::vector<LossBreakdown> history;  // per-epoch mean over tasks
};

/// Trains a freshly initialised model on the given (meta-train) tasks.
TrainResult train(const std::vector<physics::Task>& tasks, const ModelConfig& model_cfg, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

/// Continues training `model` in place; used by train() and by callers
/// that want to start from a given initialisation.
std::vector<LossBreakdown> train_model(NeurPhyModel& model, const std::vector<physics::Task>& tasks,
                                       const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// CSV with header epoch,recon,kl1..klD,total.
std::string metrics_csv(const std::vector<LossBreakdown>& history, std::size_t D);

}  // namespace neurphy
