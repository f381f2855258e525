#pragma once

// The latent state-space model: a context encoder whose per-pair outputs are
// mean-aggregated into a global representation r_c, a recognition network
// reading two consecutive frames, a transition network p(z_t | z_{t-1}, r_c)
// and an observation decoder. All four are MLPs.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "neurphy/autodiff.hpp"
#include "neurphy/nnet.hpp"
#include "neurphy/physics.hpp"
#include "neurphy/rng.hpp"

namespace neurphy {

struct ModelConfig {
  std::size_t obs_dim = 2;
  std::size_t dim_z = 3;
  std::size_t dim_r = 3;
  std::vector<std::size_t> context_widths{128, 128, 64, 16};
  std::vector<std::size_t> recognition_widths{32, 16};
  std::vector<std::size_t> transition_widths{128, 128, 64, 16};
  std::vector<std::size_t> decoder_widths{16, 64, 128, 128};
  std::uint64_t init_seed = 0;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

enum class RolloutMode { kMean, kSample };

struct Rollout {
  /// priors[k] is p(z_{k+1} | z_k, r_c) along the chain.
  std::vector<nn::DiagGaussian> priors;
  /// states[k] is the value fed forward from priors[k]: its mean or a sample.
  std::vector<ad::Var> states;
};

class NeurPhyModel {
 public:
  explicit NeurPhyModel(ModelConfig config);

  const ModelConfig& config() const noexcept { return config_; }
  nn::ParameterStore& parameters() noexcept { return params_; }
  const nn::ParameterStore& parameters() const noexcept { return params_; }

  /// r_c as a [1, dim_r] row. Pairs are encoded in a canonical (sorted)
  /// order, so the result is bit-identical under any permutation of the
  /// context set and under duplicating the whole set.
  ad::Var encode_context(const nn::Binding& params, const physics::ContextSet& ctx) const;

  /// q(z_t | x_{t-1}, x_t) for a batch of frame pairs given as [B, 2*obs_dim]
  /// rows laid out [x_{t-1}, x_t].
  nn::DiagGaussian recognize(const nn::Binding& params, ad::Var frame_pairs) const;

  /// p(z_t | z_{t-1}, r_c) for a batch of latents [B, dim_z] sharing one r_c [1, dim_r].
  nn::DiagGaussian transition(const nn::Binding& params, ad::Var z, ad::Var r_c) const;

  /// Observation mean for a batch of latents.
  ad::Var decode(const nn::Binding& params, ad::Var z) const;

  /// Iterates the transition `steps` times from z0. kMean feeds each mean
  /// forward; kSample draws a reparameterized sample from `rng` at each step.
  Rollout rollout(const nn::Binding& params, ad::Var z0, ad::Var r_c, std::size_t steps, RolloutMode mode,
                  Rng* rng) const;

 private:
  ModelConfig config_;
  nn::ParameterStore params_;
  nn::Mlp context_encoder_;
  nn::Mlp recognition_;
  nn::GaussianHead recognition_head_;
  nn::Mlp transition_;
  nn::GaussianHead transition_head_;
  nn::Mlp decoder_;
};

/// [len(targets), 2*obs_dim] rows [x_{t-lag-1}, x_{t-lag}] for every target t.
ad::Tensor frame_pairs(const physics::Task& task, std::span<const std::size_t> targets, std::size_t lag = 0);

/// Observations x_t for every target t as [len(targets), obs_dim].
ad::Tensor frames(const physics::Task& task, std::span<const std::size_t> targets);

// Value-level conveniences: each runs a private tape with frozen parameters.

std::vector<double> global_representation(const NeurPhyModel& model, const physics::ContextSet& ctx);

struct GaussianValue {
  std::vector<double> mean;
  std::vector<double> std;
};
GaussianValue recognize_frames(const NeurPhyModel& model, const physics::Observation& x_prev,
                               const physics::Observation& x_curr);

/// Reconstruction of x_start followed by `horizon` mean-propagated predictions.
/// Returns horizon + 1 observations; throws kOutOfRange unless
/// 1 <= start_t and start_t + horizon < T.
std::vector<physics::Observation> predict_observations(const NeurPhyModel& model, const physics::Task& task,
                                                       const physics::ContextSet& ctx, std::size_t start_t,
                                                       std::size_t horizon);

}  // namespace neurphy
