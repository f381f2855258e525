#include "neurphy/nnet.hpp"

#include <cmath>
#include <numbers>

#include "neurphy/error.hpp"

namespace neurphy::nn {

using ad::Shape;
using ad::Tensor;
using ad::Var;

std::size_t ParameterStore::add(std::string name, Tensor value) {
  for (const auto& e : entries_) {
    if (e.name == name) throw Error(ErrorCode::kConfig, "duplicate parameter name '" + name + "'");
  }
  entries_.push_back({std::move(name), std::move(value)});
  return entries_.size() - 1;
}

std::size_t ParameterStore::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name == name) return i;
  }
  throw Error(ErrorCode::kOutOfRange, "no parameter named '" + name + "'");
}

std::size_t ParameterStore::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.numel();
  return n;
}

Binding::Binding(ad::Tape& tape, const ParameterStore& store, bool trainable) : tape_(&tape) {
  vars_.reserve(store.size());
  for (const auto& e : store) vars_.push_back(trainable ? tape.variable(e.value) : tape.constant(e.value));
}

std::vector<Tensor> Binding::gradients() const {
  std::vector<Tensor> out;
  out.reserve(vars_.size());
  for (Var v : vars_) out.push_back(tape_->grad(v));
  return out;
}

Var activate(Activation act, Var x) {
  switch (act) {
    case Activation::kRelu: return ad::relu(x);
    case Activation::kSigmoid: return ad::sigmoid(x);
    case Activation::kTanh: return ad::tanh(x);
    case Activation::kIdentity: return x;
  }
  return x;
}

Tensor init_params(const Shape& shape, std::size_t fan_in, Rng& rng) {
  if (fan_in == 0) throw Error(ErrorCode::kConfig, "fan_in must be at least 1");
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(shape);
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

Var DenseLayer::forward(const Binding& params, Var x) const {
  if (x.value().cols() != in) {
    throw Error(ErrorCode::kShapeMismatch, "dense layer expects width " + std::to_string(in) + ", got " +
                                               ad::shape_string(x.shape()));
  }
  return activate(activation, ad::add(ad::matmul(x, params[weight]), params[bias]));
}

DenseLayer make_dense(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
                      Activation activation, Rng& rng) {
  DenseLayer layer;
  layer.in = in;
  layer.out = out;
  layer.activation = activation;
  layer.weight = store.add(name + ".weight", init_params(Shape{in, out}, in, rng));
  layer.bias = store.add(name + ".bias", Tensor(Shape{1, out}, 0.0));
  return layer;
}

Var Mlp::forward(const Binding& params, Var x) const {
  for (const auto& layer : layers) x = layer.forward(params, x);
  return x;
}

Mlp make_mlp(ParameterStore& store, const std::string& prefix, std::size_t in, const std::vector<std::size_t>& widths,
             Activation hidden, Activation last, Rng& rng) {
  if (widths.empty()) throw Error(ErrorCode::kConfig, "MLP '" + prefix + "' needs at least one layer");
  Mlp mlp;
  std::size_t width = in;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const Activation act = i + 1 == widths.size() ? last : hidden;
    mlp.layers.push_back(make_dense(store, prefix + "." + std::to_string(i), width, widths[i], act, rng));
    width = widths[i];
  }
  return mlp;
}

DiagGaussian GaussianHead::forward(const Binding& params, Var features) const {
  Var raw = inner.forward(params, features);
  Var mean = ad::slice(raw, 0, dim);
  Var std = ad::add_scalar(ad::softplus(ad::slice(raw, dim, 2 * dim)), kStdFloor);
  return {mean, std};
}

GaussianHead make_gaussian_head(ParameterStore& store, const std::string& name, std::size_t in, std::size_t dim,
                                Rng& rng) {
  return {make_dense(store, name, in, 2 * dim, Activation::kIdentity, rng), dim};
}

Tensor standard_normal(const Shape& shape, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Tensor t(shape);
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

Var reparameterize(const DiagGaussian& g, const Tensor& noise) {
  if (noise.numel() != g.mean.value().numel()) {
    throw Error(ErrorCode::kShapeMismatch, "noise of shape " + ad::shape_string(noise.shape()) +
                                               " for Gaussian of shape " + ad::shape_string(g.mean.shape()));
  }
  ad::Tape& tape = *g.mean.tape;
  Var eps = tape.constant(Tensor(g.mean.shape(), noise.values()));
  return ad::add(g.mean, ad::mul(g.std, eps));
}

Var kl_diag_gauss(const DiagGaussian& q, const DiagGaussian& p) {
  if (q.mean.shape() != p.mean.shape() || q.std.shape() != p.std.shape()) {
    throw Error(ErrorCode::kShapeMismatch, "KL between Gaussians of shapes " + ad::shape_string(q.mean.shape()) +
                                               " and " + ad::shape_string(p.mean.shape()));
  }
  // Per dimension, with a = ln(q_std / p_std):
  //   KL = (e^{2a} - 1 - 2a)/2 + (q_mean - p_mean)^2 / (2 p_std^2),
  // which equals ln(p/q) + (q^2 + dmu^2)/(2p^2) - 1/2 and is exactly 0 for q = p.
  Var log_p = ad::log(p.std);
  Var a = ad::sub(ad::log(q.std), log_p);
  Var spread = ad::sub(ad::add_scalar(ad::exp(ad::scale(a, 2.0)), -1.0), ad::scale(a, 2.0));
  Var dmu2 = ad::square(ad::sub(q.mean, p.mean));
  Var shift = ad::mul(dmu2, ad::exp(ad::scale(log_p, -2.0)));
  return ad::scale(ad::sum(ad::add(spread, shift)), 0.5);
}

Var gaussian_obs_nll(Var x, Var mean, double sigma) {
  if (x.shape() != mean.shape()) {
    throw Error(ErrorCode::kShapeMismatch,
                "NLL between shapes " + ad::shape_string(x.shape()) + " and " + ad::shape_string(mean.shape()));
  }
  if (!(sigma > 0)) throw Error(ErrorCode::kConfig, "sigma_obs must be positive");
  const auto n = static_cast<double>(x.value().numel());
  const double norm = n * (std::log(sigma) + 0.5 * std::log(2.0 * std::numbers::pi));
  Var sq = ad::sum(ad::square(ad::sub(x, mean)));
  return ad::add_scalar(ad::scale(sq, 1.0 / (2.0 * sigma * sigma)), norm);
}

AdamState make_adam_state(const ParameterStore& store, AdamConfig config) {
  AdamState s;
  s.config = config;
  for (const auto& e : store) {
    s.m.emplace_back(e.value.shape(), 0.0);
    s.v.emplace_back(e.value.shape(), 0.0);
  }
  return s;
}

void adam_step(ParameterStore& store, std::span<const Tensor> grads, AdamState& state) {
  if (grads.size() != store.size() || state.m.size() != store.size()) {
    throw Error(ErrorCode::kShapeMismatch, "gradient list does not match the parameter store");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].shape() != store[i].value.shape()) {
      throw Error(ErrorCode::kShapeMismatch, "gradient shape mismatch for " + store[i].name);
    }
    if (!grads[i].all_finite()) throw Error(ErrorCode::kNonFinite, "non-finite gradient for " + store[i].name);
  }

  state.t += 1;
  const auto& c = state.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < grads.size(); ++i) {
    auto p = store[i].value.data();
    auto g = grads[i].data();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g[k];
      v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g[k] * g[k];
      const double m_hat = m[k] / bc1;
      const double v_hat = v[k] / bc2;
      p[k] -= c.lr * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

}  // namespace neurphy::nn
