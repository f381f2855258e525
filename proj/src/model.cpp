#include "neurphy/model.hpp"

#include <algorithm>
#include <array>
#include <numeric>

#include "neurphy/error.hpp"

namespace neurphy {

using ad::Shape;
using ad::Tensor;
using ad::Var;
using nn::Activation;

namespace {

std::vector<std::size_t> with_output(std::vector<std::size_t> widths, std::size_t out) {
  widths.push_back(out);
  return widths;
}

}  // namespace

NeurPhyModel::NeurPhyModel(ModelConfig config) : config_(std::move(config)) {
  const auto& c = config_;
  if (c.obs_dim == 0 || c.dim_z == 0 || c.dim_r == 0) throw Error(ErrorCode::kConfig, "model dimensions must be positive");
  if (c.recognition_widths.empty() || c.transition_widths.empty()) {
    throw Error(ErrorCode::kConfig, "recognition and transition networks need hidden layers");
  }
  Rng rng(derive_seed(c.init_seed, {0x696e6974ULL}));
  context_encoder_ = nn::make_mlp(params_, "context", 2 * c.obs_dim, with_output(c.context_widths, c.dim_r),
                                  Activation::kRelu, Activation::kIdentity, rng);
  recognition_ = nn::make_mlp(params_, "recognition", 2 * c.obs_dim, c.recognition_widths, Activation::kRelu,
                              Activation::kRelu, rng);
  recognition_head_ = nn::make_gaussian_head(params_, "recognition.head", recognition_.out_width(), c.dim_z, rng);
  transition_ = nn::make_mlp(params_, "transition", c.dim_z + c.dim_r, c.transition_widths, Activation::kRelu,
                             Activation::kRelu, rng);
  transition_head_ = nn::make_gaussian_head(params_, "transition.head", transition_.out_width(), c.dim_z, rng);
  decoder_ = nn::make_mlp(params_, "decoder", c.dim_z, with_output(c.decoder_widths, c.obs_dim), Activation::kRelu,
                          Activation::kIdentity, rng);
}

Var NeurPhyModel::encode_context(const nn::Binding& params, const physics::ContextSet& ctx) const {
  if (ctx.pairs.empty()) throw Error(ErrorCode::kEmptyContext, "context set is empty");
  const std::size_t obs = config_.obs_dim;
  if (obs != 2) throw Error(ErrorCode::kShapeMismatch, "context pairs carry 2-D observations");

  using Row = std::array<double, 4>;
  std::vector<Row> rows;
  rows.reserve(ctx.pairs.size());
  for (const auto& [a, b] : ctx.pairs) rows.push_back({a[0], a[1], b[0], b[1]});
  std::sort(rows.begin(), rows.end());

  Tensor input(Shape{rows.size(), 2 * obs});
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy(rows[i].begin(), rows[i].end(), &input(i, 0));
  Var encoded = context_encoder_.forward(params, params.tape().constant(std::move(input)));
  return ad::mean_rows(encoded);
}

nn::DiagGaussian NeurPhyModel::recognize(const nn::Binding& params, Var frame_pairs) const {
  if (frame_pairs.value().cols() != 2 * config_.obs_dim) {
    throw Error(ErrorCode::kShapeMismatch, "recognition expects rows of width " + std::to_string(2 * config_.obs_dim));
  }
  return recognition_head_.forward(params, recognition_.forward(params, frame_pairs));
}

nn::DiagGaussian NeurPhyModel::transition(const nn::Binding& params, Var z, Var r_c) const {
  const Tensor& zv = z.value();
  if (zv.cols() != config_.dim_z || r_c.value().cols() != config_.dim_r || r_c.value().rows() != 1) {
    throw Error(ErrorCode::kShapeMismatch, "transition got z " + ad::shape_string(z.shape()) + " and r_c " +
                                               ad::shape_string(r_c.shape()));
  }
  // Tile r_c over the batch with a ones column: [B,1] x [1,dim_r].
  Var ones = params.tape().constant(Tensor(Shape{zv.rows(), 1}, 1.0));
  Var tiled = ad::matmul(ones, r_c);
  return transition_head_.forward(params, transition_.forward(params, ad::concat(z, tiled)));
}

Var NeurPhyModel::decode(const nn::Binding& params, Var z) const {
  if (z.value().cols() != config_.dim_z) {
    throw Error(ErrorCode::kShapeMismatch, "decoder expects latents of width " + std::to_string(config_.dim_z));
  }
  return decoder_.forward(params, z);
}

Rollout NeurPhyModel::rollout(const nn::Binding& params, Var z0, Var r_c, std::size_t steps, RolloutMode mode,
                              Rng* rng) const {
  if (steps == 0) throw Error(ErrorCode::kOutOfRange, "rollout needs at least one step");
  if (mode == RolloutMode::kSample && rng == nullptr) throw Error(ErrorCode::kConfig, "sampled rollout needs an rng");
  Rollout out;
  Var z = z0;
  for (std::size_t k = 0; k < steps; ++k) {
    nn::DiagGaussian prior = transition(params, z, r_c);
    z = mode == RolloutMode::kMean ? prior.mean
                                   : nn::reparameterize(prior, nn::standard_normal(prior.mean.shape(), *rng));
    out.priors.push_back(prior);
    out.states.push_back(z);
  }
  return out;
}

Tensor frame_pairs(const physics::Task& task, std::span<const std::size_t> targets, std::size_t lag) {
  Tensor out(Shape{targets.size(), 4});
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const std::size_t t = targets[i];
    if (t < lag + 1 || t >= task.length()) {
      throw Error(ErrorCode::kOutOfRange, "frame " + std::to_string(t) + " with lag " + std::to_string(lag) +
                                              " has no preceding pair");
    }
    const auto& prev = task.observations[t - lag - 1];
    const auto& curr = task.observations[t - lag];
    out(i, 0) = prev[0];
    out(i, 1) = prev[1];
    out(i, 2) = curr[0];
    out(i, 3) = curr[1];
  }
  return out;
}

Tensor frames(const physics::Task& task, std::span<const std::size_t> targets) {
  Tensor out(Shape{targets.size(), 2});
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] >= task.length()) throw Error(ErrorCode::kOutOfRange, "frame index past the end of the task");
    out(i, 0) = task.observations[targets[i]][0];
    out(i, 1) = task.observations[targets[i]][1];
  }
  return out;
}

std::vector<double> global_representation(const NeurPhyModel& model, const physics::ContextSet& ctx) {
  ad::Tape tape;
  nn::Binding params(tape, model.parameters(), false);
  return model.encode_context(params, ctx).value().values();
}

GaussianValue recognize_frames(const NeurPhyModel& model, const physics::Observation& x_prev,
                               const physics::Observation& x_curr) {
  ad::Tape tape;
  nn::Binding params(tape, model.parameters(), false);
  Var input = tape.constant(Tensor::row({x_prev[0], x_prev[1], x_curr[0], x_curr[1]}));
  nn::DiagGaussian q = model.recognize(params, input);
  return {q.mean.value().values(), q.std.value().values()};
}

std::vector<physics::Observation> predict_observations(const NeurPhyModel& model, const physics::Task& task,
                                                       const physics::ContextSet& ctx, std::size_t start_t,
                                                       std::size_t horizon) {
  if (start_t < 1 || start_t + horizon >= task.length()) {
    throw Error(ErrorCode::kOutOfRange, "prediction window start " + std::to_string(start_t) + " horizon " +
                                            std::to_string(horizon) + " does not fit a task of length " +
                                            std::to_string(task.length()));
  }
  ad::Tape tape;
  nn::Binding params(tape, model.parameters(), false);
  Var r_c = model.encode_context(params, ctx);
  const std::array<std::size_t, 1> start{start_t};
  nn::DiagGaussian q = model.recognize(params, tape.constant(frame_pairs(task, start)));

  std::vector<physics::Observation> out;
  auto push = [&out](Var x) { out.push_back({x.value()[0], x.value()[1]}); };
  push(model.decode(params, q.mean));
  if (horizon > 0) {
    Rollout path = model.rollout(params, q.mean, r_c, horizon, RolloutMode::kMean, nullptr);
    for (Var z : path.states) push(model.decode(params, z));
  }
  return out;
}

}  // namespace neurphy
