#include <doctest.h>

#include "ign/gradcheck.hpp"
#include "ign/model.hpp"
#include "ign/objectives.hpp"
#include "test_support.hpp"

using namespace ign;
using ign::testing::op_gradient_error;
using ign::testing::random_tensor;
using V = ag::Var<double>;

TEST_CASE("forward: identity architecture returns its input") {
  const auto arch = build_identity({3, 4, 4});
  const Grid g = ign::testing::random_grid({2, 3, 4, 4}, 1);
  CHECK(forward(ParamSet{}, arch, g) == g);
}

TEST_CASE("forward: zero linear layer maps everything to zero") {
  ArchSpec arch;
  arch.signature = {5};
  Layer l;
  l.name = "fc";
  l.op = LayerOp::linear;
  l.in = 5;
  l.out = 5;
  arch.layers.push_back(l);
  ParamSet ps;
  ps.entries.emplace("fc.weight", Tensor<float>({5, 5}));
  ps.entries.emplace("fc.bias", Tensor<float>({5}));
  const Grid out = forward(ps, arch, ign::testing::random_grid({3, 5}, 2));
  CHECK(out == Grid({3, 5}));
}

TEST_CASE("forward: table encoder reduces a 64px image to a 512x1x1 code") {
  // 64 -> 32 -> 16 -> 8 -> 4 (k4 s2 p1) -> 1 (k4 s1 p0)
  ArchSpec enc = build_dcgan_ae(3, 64, 512);
  std::erase_if(enc.layers, [](const Layer& l) { return l.name.rfind("enc", 0) != 0; });
  const ParamSet ps = init_params(build_dcgan_ae(3, 64, 512), 3);
  const auto out = apply(enc, Instance<float>::frozen(ps), ag::Var<float>::constant(Grid({1, 3, 64, 64})), Mode::train);
  CHECK(out.shape() == Shape{1, 512, 1, 1});
}

TEST_CASE("forward: shape mismatch names the offending layer") {
  ArchSpec arch = build_mlp(2, 8, 3);
  ParamSet ps = init_params(arch, 1);
  ps.entries.at("fc1.weight") = Tensor<float>({8, 7});
  try {
    forward(ps, arch, Grid({4, 2}));
    FAIL("expected a shape error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("fc1") != std::string::npos);
  }
  CHECK_THROWS_AS(forward(init_params(arch, 1), arch, Grid({4, 3})), std::invalid_argument);
}

TEST_CASE("backward: linear functional has its coefficients as gradient") {
  std::mt19937_64 rng(4);
  BasicParamSet<double> ps;
  ps.entries.emplace("theta", random_tensor({3, 4}, rng));
  const auto c = random_tensor({3, 4}, rng);
  const auto live = Instance<double>::live(ps);
  const auto grads = backward(ag::sum(ag::mul(live.param("theta"), V::constant(c))), live);
  CHECK(grads.at("theta") == c);
}

TEST_CASE("backward: loss independent of the parameters gives zeros") {
  const auto arch = build_mlp(2, 4, 2);
  const auto ps = init_params(arch, 5).cast<double>();
  const auto live = Instance<double>::live(ps);
  const auto grads = backward(ag::sum(V::leaf(Tensor<double>({3}, 2.0))), live);
  for (const auto& [name, g] : grads) CHECK(g == Tensor<double>(ps.entries.at(name).shape()));
  // A loss that is a plain constant is allowed as well.
  const auto g2 = backward(V::constant(Tensor<double>::scalar(1.0)), live);
  CHECK(g2.size() == ps.entries.size());
}

TEST_CASE("backward: non-scalar loss is rejected") {
  auto v = V::leaf(Tensor<double>({2}, 1.0));
  CHECK_THROWS_AS(ag::backward(ag::square(v)), std::invalid_argument);
}

TEST_CASE("backward: random two-layer MLP agrees with central differences") {
  const auto arch = build_mlp(3, 7, 2);
  const auto ps = init_params(arch, 11, InitScheme::fan_in).cast<double>();
  std::mt19937_64 rng(12);
  const auto x = V::constant(random_tensor({5, 3}, rng));
  const auto y = V::constant(random_tensor({5, 3}, rng));
  LossFn loss = [&](const ArchSpec& a, const Instance<double>& inst) {
    return distance(apply(a, inst, x, Mode::train), y, Metric::l2);
  };
  const auto report = check_gradients(ps, arch, loss, 1e-5);
  CHECK(report.reliable);
  CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("backward is linear in the loss") {
  const auto arch = build_mlp(2, 6, 3);
  const auto ps = init_params(arch, 21, InitScheme::fan_in).cast<double>();
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 3; ++trial) {
    const auto x = V::constant(random_tensor({4, 2}, rng));
    std::uniform_real_distribution<double> u(-2, 2);
    const double a = u(rng), b = u(rng);
    auto l1 = [&](const Instance<double>& i) { return distance(apply(arch, i, x, Mode::train), x, Metric::l2); };
    auto l2 = [&](const Instance<double>& i) { return ag::mean(ag::tanh(apply(arch, i, x, Mode::train))); };
    const auto i1 = Instance<double>::live(ps), i2 = Instance<double>::live(ps), i3 = Instance<double>::live(ps);
    const auto g1 = backward(l1(i1), i1);
    const auto g2 = backward(l2(i2), i2);
    const auto g = backward(ag::add(ag::scale(l1(i3), a), ag::scale(l2(i3), b)), i3);
    for (const auto& [name, t] : g) {
      for (std::size_t k = 0; k < t.size(); ++k) {
        CHECK(t[k] == doctest::Approx(a * g1.at(name)[k] + b * g2.at(name)[k]).epsilon(1e-12).scale(1.0));
      }
    }
  }
}

TEST_CASE("detach keeps the value and cuts the gradient path") {
  std::mt19937_64 rng(31);
  auto g = V::leaf(random_tensor({2, 3}, rng));
  auto produced = ag::tanh(g);
  auto d = produced.detach();
  CHECK(d.value() == produced.value());
  CHECK_FALSE(d.requires_grad());
  CHECK(produced.requires_grad());

  auto dd = d.detach();
  CHECK(dd.value() == d.value());
  CHECK_FALSE(dd.requires_grad());

  const auto gen = ag::backward(ag::sum(ag::square(ag::sub(ag::tanh(d), d))));
  CHECK(ag::gradient_of(g, gen) == Tensor<double>(g.shape()));
  // The original still differentiates.
  const auto gen2 = ag::backward(ag::sum(produced));
  CHECK(ag::gradient_of(g, gen2) != Tensor<double>(g.shape()));
}

TEST_CASE("detach: drift of a detached model output gives no gradient to the producer") {
  const auto arch = build_mlp(2, 5, 3);
  const auto ps = init_params(arch, 41, InitScheme::fan_in).cast<double>();
  std::mt19937_64 rng(42);
  const auto producer = Instance<double>::live(ps);
  const auto consumer = Instance<double>::live(ps);
  auto g = apply(arch, producer, V::constant(random_tensor({6, 2}, rng)), Mode::train);
  auto dg = g.detach();
  const auto gen = ag::backward(distance(apply(arch, consumer, dg, Mode::train), dg, Metric::l2));
  for (const auto& [name, t] : producer.gradients(gen)) CHECK(t == Tensor<double>(t.shape()));
  bool any = false;
  for (const auto& [name, t] : consumer.gradients(gen)) any = any || t != Tensor<double>(t.shape());
  CHECK(any);
}

TEST_CASE("frozen_eval matches forward and never accumulates parameter gradients") {
  const auto arch = build_dcgan_ae(1, 32, 16, 4);
  const auto ps = init_params(arch, 51);
  const ParamSet clone = ps;
  const Grid z = ign::testing::random_grid({3, 1, 32, 32}, 52);
  for (Mode mode : {Mode::train, Mode::eval}) {
    const auto frozen = Instance<float>::frozen(clone);
    const auto live = Instance<float>::live(ps);
    const auto a = frozen_eval(frozen, arch, ag::Var<float>::constant(z), mode).value();
    const auto b = apply(arch, live, ag::Var<float>::constant(z), mode).value();
    CHECK(a == b);
  }
  const auto frozen = Instance<float>::frozen(clone);
  auto input = ag::Var<float>::leaf(z);
  const auto out = frozen_eval(frozen, arch, input, Mode::train);
  const auto grads = backward(ag::mean(ag::square(out)), frozen);
  for (const auto& [name, t] : grads) CHECK(t == Tensor<float>(t.shape()));
  CHECK_THROWS_AS(frozen_eval(Instance<float>::live(ps), arch, input, Mode::train), std::logic_error);
}

TEST_CASE("check_gradients: linear model with quadratic loss is exact to 1e-6") {
  ArchSpec arch;
  arch.signature = {3};
  Layer l;
  l.name = "lin";
  l.op = LayerOp::linear;
  l.in = 3;
  l.out = 3;
  arch.layers.push_back(l);
  std::mt19937_64 rng(61);
  BasicParamSet<double> ps;
  ps.entries.emplace("lin.weight", random_tensor({3, 3}, rng));
  ps.entries.emplace("lin.bias", random_tensor({3}, rng));
  const auto x = V::constant(random_tensor({8, 3}, rng));
  const auto y = V::constant(random_tensor({8, 3}, rng));
  LossFn loss = [&](const ArchSpec& a, const Instance<double>& i) {
    return ag::mean(ag::square(ag::sub(apply(a, i, x, Mode::eval), y)));
  };
  const auto report = check_gradients(ps, arch, loss, 1e-5);
  CHECK(report.max_rel_error < 1e-6);
  CHECK(report.arrays.size() == 2);

  const auto coarse = check_gradients(ps, arch, loss, 1.0);
  CHECK_FALSE(coarse.reliable);
  CHECK_FALSE(coarse.note.empty());
  CHECK_THROWS_AS(check_gradients(ps, arch, loss, 0.0), std::invalid_argument);
}

TEST_CASE("check_gradients: each objective on a tiny MLP, other copy held fixed") {
  const auto arch = build_mlp(2, 8, 3);
  const auto ps = init_params(arch, 71, InitScheme::fan_in).cast<double>();
  std::mt19937_64 rng(72);
  const auto x = V::constant(random_tensor({6, 2}, rng));
  const auto z = V::constant(random_tensor({6, 2}, rng));
  const auto frozen = Instance<double>::frozen(ps);
  for (Metric m : {Metric::l2, Metric::l1}) {
    LossFn rec = [&](const ArchSpec& a, const Instance<double>& live) { return loss_rec(a, live, x, m, Mode::train); };
    LossFn idem = [&](const ArchSpec& a, const Instance<double>& live) {
      return loss_idem(a, live, frozen, z, m, Mode::train);
    };
    LossFn tight = [&](const ArchSpec& a, const Instance<double>& live) {
      return loss_tight_raw(a, live, frozen, z, m, Mode::train);
    };
    CHECK(check_gradients(ps, arch, rec, 1e-6).max_rel_error < 1e-4);
    CHECK(check_gradients(ps, arch, idem, 1e-6).max_rel_error < 1e-4);
    CHECK(check_gradients(ps, arch, tight, 1e-6).max_rel_error < 1e-4);
  }
}

TEST_CASE("total loss gradient is the weighted sum of the routed terms") {
  const auto arch = build_mlp(2, 8, 3);
  const auto ps = init_params(arch, 73, InitScheme::fan_in).cast<double>();
  std::mt19937_64 rng(74);
  const auto x = V::constant(random_tensor({6, 2}, rng));
  const auto z = V::constant(random_tensor({6, 2}, rng));
  const auto frozen = Instance<double>::frozen(ps);
  LossWeights table_unclamped = LossWeights::table_preset();
  table_unclamped.clamp = false;
  for (const auto& w : {LossWeights::code_preset(), table_unclamped}) {
    auto grad_of = [&](auto&& f) {
      const auto live = Instance<double>::live(ps);
      return backward(f(live), live);
    };
    const auto g_total = grad_of([&](const auto& l) { return total_loss(arch, l, frozen, x, z, w, Mode::train).total; });
    const auto g_rec = grad_of([&](const auto& l) { return loss_rec(arch, l, x, w.metric, Mode::train); });
    const auto g_idem = grad_of([&](const auto& l) { return loss_idem(arch, l, frozen, z, w.metric, Mode::train); });
    const auto g_tight =
        grad_of([&](const auto& l) { return loss_tight_raw(arch, l, frozen, z, w.metric, Mode::train); });
    for (const auto& [name, t] : g_total) {
      Tensor<double> expect(t.shape());
      for (std::size_t k = 0; k < t.size(); ++k) {
        expect[k] = w.lambda_r * g_rec.at(name)[k] + w.lambda_i * g_idem.at(name)[k] + w.lambda_t * g_tight.at(name)[k];
      }
      CHECK(compare_gradients(name, t, expect).max_rel_error < 1e-12);
    }
  }
}

TEST_CASE("primitive ops agree with central differences") {
  std::mt19937_64 rng(81);
  using Ins = std::vector<Tensor<double>>;
  const double tol = 1e-4;

  SUBCASE("elementwise") {
    const Ins two{random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)};
    CHECK(op_gradient_error([](auto& v) { return ag::add(v[0], v[1]); }, two, 1) < tol);
    CHECK(op_gradient_error([](auto& v) { return ag::sub(v[0], v[1]); }, two, 2) < tol);
    CHECK(op_gradient_error([](auto& v) { return ag::mul(v[0], v[1]); }, two, 3) < tol);
    const Ins one{random_tensor({3, 4}, rng)};
    CHECK(op_gradient_error([](auto& v) { return ag::tanh(v[0]); }, one, 4) < tol);
    CHECK(op_gradient_error([](auto& v) { return ag::relu(v[0]); }, one, 5) < tol);
    CHECK(op_gradient_error([](auto& v) { return ag::leaky_relu(v[0], 0.2); }, one, 6) < tol);
    CHECK(op_gradient_error([](auto& v) { return ag::abs(v[0]); }, one, 7) < tol);
    CHECK(op_gradient_error([](auto& v) { return ag::square(v[0]); }, one, 8) < tol);
    CHECK(op_gradient_error([](auto& v) { return ag::scale(v[0], -1.7); }, one, 9) < tol);
    CHECK(op_gradient_error([](auto& v) { return ag::mean(v[0]); }, one, 10) < tol);
    CHECK(op_gradient_error([](auto& v) { return ag::mean_per_sample(v[0]); }, one, 11) < tol);
  }
  SUBCASE("linear") {
    const Ins in{random_tensor({4, 3}, rng), random_tensor({5, 3}, rng), random_tensor({5}, rng)};
    CHECK(op_gradient_error([](auto& v) { return ag::linear(v[0], v[1], v[2]); }, in, 12) < tol);
  }
  SUBCASE("conv2d") {
    const Ins in{random_tensor({2, 3, 6, 6}, rng), random_tensor({4, 3, 4, 4}, rng), random_tensor({4}, rng)};
    CHECK(op_gradient_error([](auto& v) { return ag::conv2d(v[0], v[1], v[2], {4, 2, 1}); }, in, 13) < tol);
    const Ins in2{random_tensor({2, 2, 5, 5}, rng), random_tensor({3, 2, 2, 2}, rng), random_tensor({3}, rng)};
    CHECK(op_gradient_error([](auto& v) { return ag::conv2d(v[0], v[1], v[2], {2, 1, 0}); }, in2, 14) < tol);
  }
  SUBCASE("conv_transpose2d") {
    const Ins in{random_tensor({2, 3, 3, 3}, rng), random_tensor({3, 2, 4, 4}, rng), random_tensor({2}, rng)};
    CHECK(op_gradient_error([](auto& v) { return ag::conv_transpose2d(v[0], v[1], v[2], {4, 2, 1}); }, in, 15) < tol);
    const Ins in2{random_tensor({2, 4, 1, 1}, rng), random_tensor({4, 3, 4, 4}, rng), random_tensor({3}, rng)};
    CHECK(op_gradient_error([](auto& v) { return ag::conv_transpose2d(v[0], v[1], v[2], {4, 1, 0}); }, in2, 16) < tol);
  }
  SUBCASE("batch norm, training statistics") {
    const Ins in{random_tensor({4, 3, 2, 2}, rng), random_tensor({3}, rng), random_tensor({3}, rng)};
    CHECK(op_gradient_error(
              [](auto& v) {
                return ag::batch_norm(v[0], v[1], v[2], static_cast<const Tensor<double>*>(nullptr),
                                      static_cast<const Tensor<double>*>(nullptr), 1e-5,
                                      static_cast<ag::BatchStats<double>*>(nullptr));
              },
              in, 17) < tol);
  }
  SUBCASE("batch norm, running statistics") {
    const Ins in{random_tensor({4, 3, 2, 2}, rng), random_tensor({3}, rng), random_tensor({3}, rng)};
    const Tensor<double> rm = random_tensor({3}, rng);
    const Tensor<double> rv({3}, 1.7);
    CHECK(op_gradient_error(
              [&](auto& v) {
                return ag::batch_norm(v[0], v[1], v[2], &rm, &rv, 1e-5, static_cast<ag::BatchStats<double>*>(nullptr));
              },
              in, 18) < tol);
  }
  SUBCASE("pad and crop") {
    const Ins in{random_tensor({2, 1, 4, 4}, rng)};
    CHECK(op_gradient_error([](auto& v) { return ag::zero_pad2d(v[0], 2); }, in, 19) < tol);
    CHECK(op_gradient_error([](auto& v) { return ag::crop2d(v[0], 1); }, in, 20) < tol);
  }
}

TEST_CASE("batch norm reports batch statistics with an unbiased variance") {
  const Tensor<double> x({4, 1}, std::vector<double>{1, 2, 3, 4});
  ag::BatchStats<double> stats;
  const auto y = ag::batch_norm(V::constant(x), V::constant(Tensor<double>({1}, 1.0)), V::constant(Tensor<double>({1})),
                                static_cast<const Tensor<double>*>(nullptr), static_cast<const Tensor<double>*>(nullptr),
                                0.0, &stats);
  CHECK(stats.mean[0] == doctest::Approx(2.5));
  CHECK(stats.unbiased_var[0] == doctest::Approx(5.0 / 3.0));
  CHECK(ag::mean(y).value().item() == doctest::Approx(0.0));
}
