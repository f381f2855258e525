#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "neurphy/error.hpp"
#include "neurphy/model.hpp"
#include "neurphy/train.hpp"

using namespace neurphy;
using namespace neurphy::ad;

namespace {

ModelConfig small_config(std::uint64_t seed = 1) {
  ModelConfig c;
  c.context_widths = {16, 8};
  c.recognition_widths = {8, 8};
  c.transition_widths = {16, 8};
  c.decoder_widths = {8, 16};
  c.init_seed = seed;
  return c;
}

physics::Task pendulum(double l = 2.0, std::size_t steps = 101) {
  physics::PendulumParams p;
  p.l = l;
  return physics::pendulum_trajectory(p, steps);
}

}  // namespace

TEST_CASE("default architecture dimensions") {
  NeurPhyModel model{ModelConfig{}};
  const auto& store = model.parameters();
  CHECK(store[store.index_of("context.0.weight")].value.shape() == Shape{4, 128});
  CHECK(store[store.index_of("context.4.weight")].value.shape() == Shape{16, 3});
  CHECK(store[store.index_of("transition.0.weight")].value.shape() == Shape{6, 128});
  CHECK(store[store.index_of("decoder.4.weight")].value.shape() == Shape{128, 2});
  CHECK(store[store.index_of("recognition.head.weight")].value.shape() == Shape{16, 6});
}

TEST_CASE("same init seed gives the same parameters") {
  CHECK(NeurPhyModel(small_config(3)).parameters() == NeurPhyModel(small_config(3)).parameters());
  CHECK_FALSE(NeurPhyModel(small_config(3)).parameters() == NeurPhyModel(small_config(4)).parameters());
}

TEST_CASE("encode_context aggregation") {
  NeurPhyModel model{small_config()};
  const auto task = pendulum();
  auto ctx = physics::select_contexts(task, 12, physics::ContextMode::kTrainRandom, 5);
  const auto r = global_representation(model, ctx);
  CHECK(r.size() == 3);

  SUBCASE("permutation invariance is bit-exact") {
    for (int k = 0; k < 10; ++k) {
      auto shuffled = ctx;
      Rng rng(static_cast<std::uint64_t>(k));
      std::vector<std::size_t> order(ctx.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t i = 0; i < order.size(); ++i) {
        shuffled.pairs[i] = ctx.pairs[order[i]];
        shuffled.indices[i] = ctx.indices[order[i]];
      }
      CHECK(global_representation(model, shuffled) == r);
    }
  }
  SUBCASE("duplicating the set leaves r_c unchanged") {
    auto doubled = ctx;
    doubled.pairs.insert(doubled.pairs.end(), ctx.pairs.begin(), ctx.pairs.end());
    doubled.indices.insert(doubled.indices.end(), ctx.indices.begin(), ctx.indices.end());
    CHECK(global_representation(model, doubled) == r);

    physics::ContextSet one{{ctx.indices[0]}, {ctx.pairs[0]}};
    physics::ContextSet twice{{ctx.indices[0], ctx.indices[0]}, {ctx.pairs[0], ctx.pairs[0]}};
    CHECK(global_representation(model, twice) == global_representation(model, one));
  }
  SUBCASE("a single pair gives its own encoding") {
    physics::ContextSet one{{ctx.indices[0]}, {ctx.pairs[0]}};
    Tape tape;
    nn::Binding params(tape, model.parameters(), false);
    const auto& [a, b] = ctx.pairs[0];
    // Re-run the context MLP by hand on the one row.
    Var h = tape.constant(Tensor::row({a[0], a[1], b[0], b[1]}));
    const auto& store = model.parameters();
    for (std::size_t i = 0; i < 3; ++i) {
      const std::string p = "context." + std::to_string(i);
      h = add(matmul(h, params[store.index_of(p + ".weight")]), params[store.index_of(p + ".bias")]);
      if (i < 2) h = relu(h);
    }
    CHECK(global_representation(model, one) == h.value().values());
  }
  CHECK_THROWS_AS(global_representation(model, physics::ContextSet{}), Error);
}

TEST_CASE("recognition, transition and decoder contracts") {
  NeurPhyModel model{ModelConfig{}};
  const auto task = pendulum();
  const std::vector<std::size_t> ts{1, 2, 50, 100};
  Tape tape;
  nn::Binding params(tape, model.parameters(), false);
  auto q = model.recognize(params, tape.constant(frame_pairs(task, ts)));
  CHECK(q.mean.shape() == Shape{4, 3});
  for (double s : q.std.value().data()) CHECK(s >= nn::kStdFloor);

  Var r_c = model.encode_context(params, physics::select_contexts(task, 20, physics::ContextMode::kTrainRandom, 1));
  auto p1 = model.transition(params, q.mean, r_c);
  auto p2 = model.transition(params, q.mean, r_c);
  CHECK(p1.mean.value() == p2.mean.value());
  CHECK(p1.std.value() == p2.std.value());
  for (double s : p1.std.value().data()) CHECK(s >= nn::kStdFloor);

  Var x1 = model.decode(params, q.mean);
  CHECK(x1.shape() == Shape{4, 2});
  CHECK(model.decode(params, q.mean).value() == x1.value());
  CHECK_THROWS_AS(model.decode(params, tape.constant(Tensor(Shape{1, 2}))), Error);
  CHECK_THROWS_AS(model.recognize(params, tape.constant(Tensor(Shape{1, 3}))), Error);
}

TEST_CASE("sub-networks pass grad_check w.r.t. their inputs") {
  NeurPhyModel model{small_config(9)};
  Rng rng(2);
  const Tensor pairs = nn::standard_normal({3, 4}, rng);
  const Tensor z = nn::standard_normal({3, 3}, rng);
  const Tensor r = nn::standard_normal({1, 3}, rng);
  auto bound = [&](auto&& body) {
    return [&, body](Var v) {
      nn::Binding params(*v.tape, model.parameters(), false);
      return body(params, v);
    };
  };
  CHECK(grad_check(bound([&](const nn::Binding& p, Var v) {
                     auto g = model.recognize(p, v);
                     return sum(add(square(g.mean), g.std));
                   }),
                   pairs) < 1e-4);
  CHECK(grad_check(bound([&](const nn::Binding& p, Var v) {
                     auto g = model.transition(p, v, v.tape->constant(r));
                     return sum(add(square(g.mean), g.std));
                   }),
                   z) < 1e-4);
  CHECK(grad_check(bound([&](const nn::Binding& p, Var v) {
                     auto g = model.transition(p, v.tape->constant(z), v);
                     return sum(add(square(g.mean), g.std));
                   }),
                   r) < 1e-4);
  CHECK(grad_check(bound([&](const nn::Binding& p, Var v) { return sum(square(model.decode(p, v))); }), z) < 1e-4);
}

TEST_CASE("rollout") {
  NeurPhyModel model{small_config()};
  Tape tape;
  nn::Binding params(tape, model.parameters(), false);
  Rng rng(0);
  Var z0 = tape.constant(nn::standard_normal({2, 3}, rng));
  Var r_c = tape.constant(nn::standard_normal({1, 3}, rng));
  const auto one = model.rollout(params, z0, r_c, 1, RolloutMode::kMean, nullptr);
  CHECK(one.states.size() == 1);
  CHECK(one.states[0].value() == model.transition(params, z0, r_c).mean.value());
  const auto a = model.rollout(params, z0, r_c, 5, RolloutMode::kMean, nullptr);
  const auto b = model.rollout(params, z0, r_c, 5, RolloutMode::kMean, nullptr);
  CHECK(a.states.back().value() == b.states.back().value());
  Rng s1(4), s2(4);
  CHECK(model.rollout(params, z0, r_c, 5, RolloutMode::kSample, &s1).states.back().value() ==
        model.rollout(params, z0, r_c, 5, RolloutMode::kSample, &s2).states.back().value());
  CHECK_THROWS_AS(model.rollout(params, z0, r_c, 2, RolloutMode::kSample, nullptr), Error);
}

TEST_CASE("recognition only reads its two frames") {
  NeurPhyModel model{small_config()};
  auto task = pendulum();
  const auto base = recognize_frames(model, task.observations[40], task.observations[41]);
  const std::vector<std::size_t> t{41};
  auto read = [&](const physics::Task& tk) {
    Tape tape;
    nn::Binding params(tape, model.parameters(), false);
    return model.recognize(params, tape.constant(frame_pairs(tk, t))).mean.value().values();
  };
  const auto before = read(task);
  CHECK(before == base.mean);
  for (std::size_t i : {0, 10, 39, 42, 100}) task.observations[i] = {9.0, -9.0};
  CHECK(read(task) == before);
}

TEST_CASE("predict_observations windows") {
  NeurPhyModel model{small_config()};
  const auto task = pendulum();
  const auto ctx = physics::select_contexts(task, 20, physics::ContextMode::kMetatestPrefix, 0);
  CHECK(predict_observations(model, task, ctx, 10, 0).size() == 1);
  CHECK(predict_observations(model, task, ctx, 10, 50).size() == 51);
  const auto a = predict_observations(model, task, ctx, 1, 99);
  CHECK(a.size() == 100);
  CHECK(a == predict_observations(model, task, ctx, 1, 99));
  CHECK_THROWS_AS(predict_observations(model, task, ctx, 0, 5), Error);
  CHECK_THROWS_AS(predict_observations(model, task, ctx, 61, 40), Error);
}

TEST_CASE("full loss gradient matches finite differences on a micro model") {
  ModelConfig c;
  c.dim_z = 2;
  c.context_widths = {8, 8};
  c.recognition_widths = {8, 8};
  c.transition_widths = {8, 8};
  c.decoder_widths = {8, 8};
  c.init_seed = 17;
  NeurPhyModel model{c};
  physics::PendulumParams pp;
  pp.theta0 = 0.7;
  pp.omega0 = 0.3;
  const auto task = physics::pendulum_trajectory(pp, 4);
  const auto ctx = physics::select_contexts(task, 2, physics::ContextMode::kTrainRandom, 3);
  TrainConfig cfg;
  cfg.D = 1;
  cfg.sigma_obs = 0.5;
  const std::vector<std::size_t> targets{2, 3};

  Rng r0(99);
  const auto lg = elbo_gradient(model, task, ctx, targets, cfg, r0);
  const double eps = 1e-5;
  double worst = 0.0;
  for (std::size_t i = 0; i < model.parameters().size(); ++i) {
    auto& value = model.parameters()[i].value;
    for (std::size_t k = 0; k < std::min<std::size_t>(value.numel(), 6); ++k) {
      const double orig = value[k];
      value[k] = orig + eps;
      Rng rp(99);
      const double fp = elbo_loss(model, task, ctx, targets, cfg, rp).total;
      value[k] = orig - eps;
      Rng rm(99);
      const double fm = elbo_loss(model, task, ctx, targets, cfg, rm).total;
      value[k] = orig;
      const double numeric = (fp - fm) / (2 * eps);
      const double analytic = lg.grads[i][k];
      const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
      // Entries whose gradient is at roundoff level carry no signal.
      if (std::max(std::abs(numeric), std::abs(analytic)) < 1e-6) continue;
      worst = std::max(worst, std::abs(numeric - analytic) / denom);
    }
  }
  CHECK(worst < 1e-3);
}
