#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "ign/gradcheck.hpp"
#include "ign/model.hpp"
#include "ign/objectives.hpp"
#include "test_support.hpp"

using namespace ign;

namespace {
std::string read_fixture(const std::string& name) {
  std::ifstream in(std::string(IGN_FIXTURE_DIR) + "/" + name);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}
}  // namespace

TEST_CASE("dcgan autoencoder at default sizes reproduces the published layer table") {
  CHECK(build_dcgan_ae(3, 64, 512).layer_table() == read_fixture("table1_layers.txt"));
}

TEST_CASE("dcgan autoencoder shape chains") {
  SUBCASE("64 px, 3 channels") {
    const auto chain = build_dcgan_ae(3, 64, 512).shape_chain();
    REQUIRE(chain.size() == 11);
    CHECK(chain[0] == Shape{3, 64, 64});
    CHECK(chain[5] == Shape{512, 1, 1});
    CHECK(chain.back() == Shape{3, 64, 64});
  }
  SUBCASE("32 px: 32 -> 16 -> 8 -> 4 -> 2 -> 1 with a 2x2 bottleneck") {
    const auto arch = build_dcgan_ae(1, 32, 512);
    const auto chain = arch.shape_chain();
    CHECK(chain[1] == Shape{64, 16, 16});
    CHECK(chain[4] == Shape{512, 2, 2});
    CHECK(chain[5] == Shape{512, 1, 1});
    CHECK(arch.layers[4].kernel == 2);
    CHECK(chain.back() == Shape{1, 32, 32});
  }
  SUBCASE("28 px is padded to 32 and cropped back") {
    const auto arch = build_dcgan_ae(1, 28, 256, 16);
    const auto chain = arch.shape_chain();
    CHECK(chain[1] == Shape{1, 32, 32});
    CHECK(chain.back() == Shape{1, 28, 28});
    CHECK(arch.signature == Shape{1, 28, 28});
  }
  CHECK_THROWS_WITH_AS(build_dcgan_ae(3, 48, 512), doctest::Contains("28, 32, 64"), std::invalid_argument);
}

TEST_CASE("dcgan bottleneck on a 32 px grid") {
  ArchSpec enc = build_dcgan_ae(1, 32, 512);
  const auto ps = init_params(enc, 1);
  std::erase_if(enc.layers, [](const Layer& l) { return l.name.rfind("enc", 0) != 0; });
  const auto code = apply(enc, Instance<float>::frozen(ps),
                          ag::Var<float>::constant(ign::testing::random_grid({1, 1, 32, 32}, 2)), Mode::eval);
  CHECK(code.shape() == Shape{1, 512, 1, 1});
}

TEST_CASE("dcgan output lies in [-1, 1] and closes under self-application") {
  const auto arch = build_dcgan_ae(1, 28, 32, 8);
  const auto ps = init_params(arch, 3);
  const Grid z = ign::testing::random_grid({4, 1, 28, 28}, 4, 50.0f);
  const Grid y = forward(ps, arch, z, Mode::train);
  for (float v : y.values()) {
    CHECK(v >= -1.0f);
    CHECK(v <= 1.0f);
  }
  CHECK(forward(ps, arch, y, Mode::train).shape() == z.shape());
}

TEST_CASE("mlp maps (B, dim) to (B, dim)") {
  const auto arch = build_mlp(2, 64, 4);
  CHECK(arch.layers.size() == 4);
  CHECK(arch.layers.back().activation == Activation::none);
  CHECK(arch.layers.front().activation == Activation::leaky_relu);
  const auto ps = init_params(arch, 5);
  CHECK(forward(ps, arch, Grid({7, 2})).shape() == Shape{7, 2});
  CHECK_THROWS_AS(build_mlp(2, 8, 1), std::invalid_argument);
  CHECK_THROWS_AS(build_mlp(0, 8, 2), std::invalid_argument);
}

TEST_CASE("mlp with zero weights maps everything to its output bias") {
  const auto arch = build_mlp(2, 8, 3);
  auto ps = init_params(arch, 6);
  for (auto& [name, t] : ps.entries) t.fill(0.0f);
  ps.entries.at("fc2.bias") = Tensor<float>({2}, std::vector<float>{0.25f, -0.5f});
  const Grid out = forward(ps, arch, ign::testing::random_grid({3, 2}, 7));
  for (std::size_t b = 0; b < 3; ++b) {
    CHECK(out[b * 2] == 0.25f);
    CHECK(out[b * 2 + 1] == -0.5f);
  }
}

TEST_CASE("mlp passes the finite-difference check") {
  const auto arch = build_mlp(2, 6, 3);
  const auto ps = init_params(arch, 8, InitScheme::fan_in).cast<double>();
  std::mt19937_64 rng(9);
  const auto x = ag::Var<double>::constant(ign::testing::random_tensor({5, 2}, rng));
  LossFn loss = [&](const ArchSpec& a, const Instance<double>& i) {
    return distance(apply(a, i, x, Mode::train), x, Metric::l2);
  };
  CHECK(check_gradients(ps, arch, loss, 1e-5).max_rel_error < 1e-4);
}

TEST_CASE("dcgan autoencoder passes the finite-difference check on a narrow instance") {
  const auto arch = build_dcgan_ae(1, 32, 4, 2);
  const auto ps = init_params(arch, 10, InitScheme::fan_in).cast<double>();
  std::mt19937_64 rng(11);
  const auto x = ag::Var<double>::constant(ign::testing::random_tensor({3, 1, 32, 32}, rng, 0.5));
  LossFn loss = [&](const ArchSpec& a, const Instance<double>& i) {
    return distance(apply(a, i, x, Mode::train), x, Metric::l2);
  };
  // Biases feeding a batch norm have an exactly zero gradient; their finite
  // differences are pure round-off, so they are checked in absolute terms.
  for (const auto& a : check_gradients(ps, arch, loss, 1e-6).arrays) {
    CAPTURE(a.name);
    if (std::max(a.analytic_max, a.numeric_max) < 1e-8) {
      CHECK(a.max_abs_error < 1e-8);
    } else {
      CHECK(a.max_rel_error < 1e-4);
    }
  }
}

TEST_CASE("init_params: zero biases, weight spread 0.02, deterministic") {
  const auto arch = build_dcgan_ae(3, 64, 512);
  const auto ps = init_params(arch, 12);
  for (const auto& [name, t] : ps.entries) {
    if (name.ends_with(".bias") || name.ends_with(".bn.beta")) {
      for (float v : t.values()) CHECK(v == 0.0f);
    }
  }
  const auto& w = ps.entries.at("enc1.weight");
  REQUIRE(w.size() >= 100000);
  double sum = 0, sq = 0;
  for (float v : w.values()) {
    sum += v;
    sq += double(v) * v;
  }
  const double n = double(w.size());
  const double sd = std::sqrt((sq - sum * sum / n) / (n - 1));
  CHECK(std::abs(sd - 0.02) / 0.02 < 0.05);

  CHECK(init_params(arch, 12) == ps);
  CHECK_FALSE(init_params(arch, 13) == ps);
  CHECK(fingerprint(init_params(arch, 12)) == fingerprint(ps));
}

TEST_CASE("init_params creates running statistics for every batch-norm layer") {
  const auto arch = build_dcgan_ae(1, 32, 16, 4);
  const auto ps = init_params(arch, 14);
  for (const auto& l : arch.layers) {
    if (!l.batch_norm) continue;
    const auto& rm = ps.buffers.at(l.name + ".bn.running_mean");
    const auto& rv = ps.buffers.at(l.name + ".bn.running_var");
    for (float v : rm.values()) CHECK(v == 0.0f);
    for (float v : rv.values()) CHECK(v == 1.0f);
  }
}

TEST_CASE("training mode folds batch statistics into the running buffers") {
  const auto arch = build_dcgan_ae(1, 32, 16, 4);
  const auto ps = init_params(arch, 15);
  TensorMap<float> stats = ps.buffers;
  const auto x = ag::Var<float>::constant(ign::testing::random_grid({4, 1, 32, 32}, 16));
  apply(arch, Instance<float>::frozen(ps), x, Mode::train, &stats);
  CHECK(stats != ps.buffers);
  TensorMap<float> untouched = ps.buffers;
  apply(arch, Instance<float>::frozen(ps), x, Mode::eval, &untouched);
  CHECK(untouched == ps.buffers);
}

TEST_CASE("forward is deterministic") {
  const auto arch = build_dcgan_ae(1, 28, 16, 4);
  const auto ps = init_params(arch, 17);
  const Grid z = ign::testing::random_grid({2, 1, 28, 28}, 18);
  CHECK(forward(ps, arch, z, Mode::train) == forward(ps, arch, z, Mode::train));
  CHECK(forward(ps, arch, z, Mode::eval) == forward(ps, arch, z, Mode::eval));
}

TEST_CASE("canonical string distinguishes architectures") {
  const auto a = build_dcgan_ae(1, 28, 256, 16);
  CHECK(a.canonical() == build_dcgan_ae(1, 28, 256, 16).canonical());
  CHECK(a.canonical() != build_dcgan_ae(1, 28, 128, 16).canonical());
  CHECK(a.canonical().find('\n') == std::string::npos);
}
