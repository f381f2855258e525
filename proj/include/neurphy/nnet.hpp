#pragma once

// Network building blocks on top of the autodiff tape: named parameter
// storage, dense layers and MLPs, diagonal-Gaussian heads and the
// distribution math used by the ELBO, plus Adam.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "neurphy/autodiff.hpp"
#include "neurphy/rng.hpp"

namespace neurphy::nn {

/// Lower bound added to every predicted standard deviation.
inline constexpr double kStdFloor = 1e-3;

struct NamedTensor {
  std::string name;
  ad::Tensor value;

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

/// Owns every trainable tensor of a model, in registration order.
class ParameterStore {
 public:
  std::size_t add(std::string name, ad::Tensor value);

  std::size_t size() const noexcept { return entries_.size(); }
  NamedTensor& operator[](std::size_t i) { return entries_[i]; }
  const NamedTensor& operator[](std::size_t i) const { return entries_[i]; }
  /// Index of a parameter by name; throws kOutOfRange if absent.
  std::size_t index_of(const std::string& name) const;
  std::size_t scalar_count() const noexcept;

  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  friend bool operator==(const ParameterStore&, const ParameterStore&) = default;

 private:
  std::vector<NamedTensor> entries_;
};

/// Places every parameter of a store on a tape for one pass.
class Binding {
 public:
  /// `trainable` decides whether gradients are tracked for the parameters.
  Binding(ad::Tape& tape, const ParameterStore& store, bool trainable);

  ad::Tape& tape() const noexcept { return *tape_; }
  ad::Var operator[](std::size_t i) const { return vars_[i]; }
  /// Parameter gradients after tape().backward(); registration order.
  std::vector<ad::Tensor> gradients() const;

 private:
  ad::Tape* tape_;
  std::vector<ad::Var> vars_;
};

enum class Activation { kRelu, kSigmoid, kTanh, kIdentity };

ad::Var activate(Activation act, ad::Var x);

/// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
ad::Tensor init_params(const ad::Shape& shape, std::size_t fan_in, Rng& rng);

/// y = act(x W + b). The weight is stored input-major ([in, out]) so a batch
/// of row vectors multiplies it directly.
struct DenseLayer {
  std::size_t weight = 0;
  std::size_t bias = 0;
  std::size_t in = 0;
  std::size_t out = 0;
  Activation activation = Activation::kIdentity;

  ad::Var forward(const Binding& params, ad::Var x) const;
};

DenseLayer make_dense(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
                      Activation activation, Rng& rng);

struct Mlp {
  std::vector<DenseLayer> layers;

  std::size_t in_width() const { return layers.front().in; }
  std::size_t out_width() const { return layers.back().out; }
  ad::Var forward(const Binding& params, ad::Var x) const;
};

/// Dense chain through `widths`; `hidden` on every layer but the last, which uses `last`.
Mlp make_mlp(ParameterStore& store, const std::string& prefix, std::size_t in, const std::vector<std::size_t>& widths,
             Activation hidden, Activation last, Rng& rng);

/// A batch of diagonal Gaussians, one per row.
struct DiagGaussian {
  ad::Var mean;
  ad::Var std;
};

/// Dense layer to 2*dim outputs: the first half is the mean, the second half
/// goes through softplus plus kStdFloor to give the standard deviation.
struct GaussianHead {
  DenseLayer inner;
  std::size_t dim = 0;

  DiagGaussian forward(const Binding& params, ad::Var features) const;
};

GaussianHead make_gaussian_head(ParameterStore& store, const std::string& name, std::size_t in, std::size_t dim,
                                Rng& rng);

/// mean + std * noise, differentiable in mean and std.
ad::Var reparameterize(const DiagGaussian& g, const ad::Tensor& noise);
/// Standard-normal noise shaped like the Gaussian's mean.
ad::Tensor standard_normal(const ad::Shape& shape, Rng& rng);

/// KL(q || p) summed over every row and dimension.
ad::Var kl_diag_gauss(const DiagGaussian& q, const DiagGaussian& p);

/// Negative log-likelihood of x under N(mean, sigma^2 I), summed over entries.
ad::Var gaussian_obs_nll(ad::Var x, ad::Var mean, double sigma);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<ad::Tensor> m;
  std::vector<ad::Tensor> v;
  std::uint64_t t = 0;
};

AdamState make_adam_state(const ParameterStore& store, AdamConfig config = {});

/// Bias-corrected Adam update. Throws kNonFinite (leaving the parameters
/// untouched) if any gradient entry is NaN or Inf.
void adam_step(ParameterStore& store, std::span<const ad::Tensor> grads, AdamState& state);

}  // namespace neurphy::nn
