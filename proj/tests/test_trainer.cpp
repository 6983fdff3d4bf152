#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "ign/trainer.hpp"
#include "test_support.hpp"

using namespace ign;
namespace fs = std::filesystem;

namespace {
fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ign_test_trainer_" + name);
  fs::remove_all(p);
  return p;
}

TrainConfig toy_config(const std::string& out) {
  TrainConfig c;
  c.arch = "mlp";
  c.mlp_hidden = 16;
  c.mlp_depth = 3;
  c.init = InitScheme::fan_in;
  c.preset = "code";
  c.weights = LossWeights::code_preset();
  c.adam.lr = 1e-3;
  c.batch = 32;
  c.iterations = 100;
  c.seed = 5;
  c.dataset_kind = DatasetKind::toy2d;
  c.output_dir = scratch(out).string();
  return c;
}

TrainConfig image_config(const std::string& out) {
  TrainConfig c;
  c.arch = "dcgan_ae";
  c.channels = 1;
  c.resolution = 32;
  c.latent = 8;
  c.width = 2;
  c.batch = 8;
  c.iterations = 20;
  c.seed = 6;
  c.noise = NoiseMode::spectral;
  c.output_dir = scratch(out).string();
  return c;
}

Grid image_data(std::size_t n) {
  Grid g = ign::testing::random_grid({n, 1, 32, 32}, 77, 0.3f);
  for (float& v : g.values()) v = std::tanh(v);
  return g;
}
}  // namespace

TEST_CASE("zero learning rate leaves the parameters unchanged") {
  auto cfg = toy_config("lr0");
  cfg.adam.lr = 0.0;
  const auto arch = cfg.build_arch();
  TrainState s = init_state(cfg, arch);
  const ParamSet before = s.live;
  const auto r = train_step(s, arch, toy2d(32, 1), cfg);
  CHECK(s.live.entries == before.entries);
  CHECK(r.report.rec > 0);
  CHECK(r.report.idem > 0);
  CHECK(r.report.tight_raw < 0);
  CHECK(s.step == 1);
}

TEST_CASE("identical states and batches give bit-identical steps") {
  const auto cfg = image_config("det");
  const auto arch = cfg.build_arch();
  TrainState a = init_state(cfg, arch);
  a.spectrum = fit_spectrum(image_data(16));
  TrainState b = a;
  const Grid x = image_data(8);
  for (int i = 0; i < 3; ++i) {
    const auto ra = train_step(a, arch, x, cfg);
    const auto rb = train_step(b, arch, x, cfg);
    CHECK(ra.report.total == rb.report.total);
  }
  CHECK(a == b);
}

TEST_CASE("each step syncs the frozen copy first and applies exactly one update") {
  const auto cfg = image_config("sync");
  const auto arch = cfg.build_arch();
  TrainState s = init_state(cfg, arch);
  s.spectrum = fit_spectrum(image_data(16));
  const Grid x = image_data(8);
  for (int i = 0; i < 3; ++i) {
    const ParamSet before = s.live;
    const auto t0 = s.adam_t;
    const auto v0 = s.live.version;
    const auto r = train_step(s, arch, x, cfg);
    // θ′ holds the pre-update θ: synchronized, then untouched by the optimizer.
    CHECK(fingerprint(s.frozen) == fingerprint(before));
    CHECK(s.frozen == before);
    CHECK_FALSE(s.live.entries == before.entries);
    CHECK(s.adam_t == t0 + 1);
    CHECK(s.live.version == v0 + 1);
    const double expect = cfg.weights.lambda_r * r.report.rec + cfg.weights.lambda_i * r.report.idem +
                          cfg.weights.lambda_t * r.report.tight_clamped;
    CHECK(r.report.total == doctest::Approx(expect).epsilon(1e-5));
    CHECK(std::abs(r.report.tight_clamped) <= cfg.weights.clamp_ratio * r.report.rec * (1 + 1e-6));
  }
}

TEST_CASE("a non-finite loss aborts with diagnostics") {
  const auto cfg = toy_config("nan");
  const auto arch = cfg.build_arch();
  TrainState s = init_state(cfg, arch);
  Grid x = toy2d(32, 1);
  x[3] = std::numeric_limits<float>::quiet_NaN();
  try {
    train_step(s, arch, x, cfg);
    FAIL("expected TrainingDiverged");
  } catch (const TrainingDiverged& e) {
    CHECK(std::string(e.what()).find("rec=") != std::string::npos);
    CHECK(std::isnan(e.report().rec));
  }
}

TEST_CASE("adam: first step moves each weight by lr against the gradient sign") {
  ParamSet p;
  p.entries.emplace("w", Tensor<float>({3}, std::vector<float>{1.0f, 2.0f, 3.0f}));
  GradMap g{{"w", Tensor<float>({3}, std::vector<float>{0.5f, -2.0f, 1e-3f})}};
  GradMap m = zero_grads(p), v = zero_grads(p);
  std::uint64_t t = 0;
  AdamConfig cfg;
  cfg.lr = 0.1;
  adam_update(p, g, m, v, t, cfg);
  CHECK(t == 1);
  // m_hat = g, v_hat = g^2, so the update is lr * g / (|g| + eps).
  CHECK(p.entries.at("w")[0] == doctest::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8)));
  CHECK(p.entries.at("w")[1] == doctest::Approx(2.0 + 0.1));
  CHECK(p.entries.at("w")[2] == doctest::Approx(3.0 - 0.1 * 1e-3 / (1e-3 + 1e-8)));
  CHECK(m.at("w")[0] == doctest::Approx(0.5 * 0.5));
  CHECK(v.at("w")[1] == doctest::Approx(0.001 * 4.0));
}

TEST_CASE("gradient clip rescales to the configured norm") {
  auto cfg = toy_config("clip");
  cfg.grad_clip = 1e-6;
  cfg.adam.lr = 0.0;
  const auto arch = cfg.build_arch();
  TrainState s = init_state(cfg, arch);
  const auto r = train_step(s, arch, toy2d(32, 1), cfg);
  CHECK(r.clipped);
  CHECK(r.grad_norm > 1e-6);
}

TEST_CASE("epoch order is a seeded permutation") {
  const auto a = epoch_order(1000, 3, 0);
  CHECK(std::set<std::size_t>(a.begin(), a.end()).size() == 1000);
  CHECK(a == epoch_order(1000, 3, 0));
  CHECK(a != epoch_order(1000, 3, 1));
  CHECK(a != epoch_order(1000, 4, 0));
}

TEST_CASE("batches walk the permutation and start a new epoch when it runs out") {
  auto cfg = toy_config("batches");
  cfg.batch = 40;
  const Grid data = toy2d(100, 2);
  TrainState s = init_state(cfg, cfg.build_arch());
  const auto order = epoch_order(100, cfg.seed, 0);
  const Grid b0 = next_batch(s, data, cfg);
  CHECK(b0[0] == data[2 * order[0]]);
  next_batch(s, data, cfg);
  CHECK(s.epoch == 0);
  CHECK(s.cursor == 80);
  next_batch(s, data, cfg);
  CHECK(s.epoch == 1);
  CHECK(s.cursor == 40);
  cfg.batch = 101;
  CHECK_THROWS_AS(next_batch(s, data, cfg), std::invalid_argument);
}

TEST_CASE("zero iterations write the initialization as the final checkpoint") {
  auto cfg = toy_config("zero");
  cfg.iterations = 0;
  const auto result = train(cfg, toy2d(256, 1));
  const auto ck = load_checkpoint(result.final_checkpoint);
  CHECK(params_from_checkpoint(ck) == init_params(cfg.build_arch(), cfg.seed, cfg.init));
  CHECK(ck.step == 0);
}

TEST_CASE("metrics log has one row per step") {
  auto cfg = toy_config("metrics");
  cfg.iterations = 7;
  train(cfg, toy2d(256, 1));
  std::ifstream in(fs::path(cfg.output_dir) / "metrics.tsv");
  std::string line;
  int rows = 0, comments = 0;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.starts_with("#")) ++comments;
    else if (line == LossReport::tsv_header()) header = true;
    else ++rows;
  }
  CHECK(header);
  CHECK(comments >= 1);
  CHECK(rows == 7);
}

TEST_CASE("resume: 100 steps equal 50 + save + load + 50, bit for bit") {
  SUBCASE("toy mlp") {
    auto full_cfg = toy_config("resume_full");
    const Grid data = toy2d(256, 3);
    const auto full = train(full_cfg, data);

    auto half_cfg = toy_config("resume_half");
    half_cfg.iterations = 50;
    const auto half = train(half_cfg, data);
    half_cfg.iterations = 100;
    const auto ck = load_checkpoint(half.final_checkpoint);
    const auto resumed = train(half_cfg, data, {}, from_checkpoint(ck, half_cfg.build_arch()));
    CHECK(resumed.state.live == full.state.live);
    CHECK(resumed.state == full.state);
  }
  SUBCASE("autoencoder with batch norm and spectral noise") {
    auto full_cfg = image_config("resume_img_full");
    full_cfg.checkpoint_every = 10;
    const Grid data = image_data(24);
    const auto full = train(full_cfg, data);
    CHECK(fs::exists(fs::path(full_cfg.output_dir) / "ckpt-10.ign"));

    const auto ck = load_checkpoint(fs::path(full_cfg.output_dir) / "ckpt-10.ign");
    auto cfg = image_config("resume_img_half");
    const auto resumed = train(cfg, data, {}, from_checkpoint(ck, cfg.build_arch()));
    CHECK(resumed.state == full.state);
  }
}

TEST_CASE("checkpoint container round trips bit-exactly and rejects damage") {
  const auto cfg = image_config("ckpt");
  const auto arch = cfg.build_arch();
  TrainState s = init_state(cfg, arch);
  s.spectrum = fit_spectrum(image_data(4));
  train_step(s, arch, image_data(8), cfg);
  const Checkpoint c = to_checkpoint(s, arch, cfg);
  const std::string bytes = encode_checkpoint(c);
  CHECK(decode_checkpoint(bytes) == c);
  CHECK(encode_checkpoint(decode_checkpoint(bytes)) == bytes);
  // The frozen copy is resynced before every step, so it is not stored.
  TrainState expected = s;
  expected.frozen = expected.live;
  CHECK(from_checkpoint(c, arch) == expected);

  const fs::path file = scratch("ckpt_file") / "a.ign";
  save_checkpoint(file, c);
  CHECK(load_checkpoint(file) == c);

  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), CheckpointError);
  CHECK_THROWS_AS(decode_checkpoint("NOTACKPT" + bytes.substr(8)), CheckpointError);
  CHECK_THROWS_AS(decode_checkpoint(bytes + "x"), CheckpointError);
  auto other = image_config("ckpt");
  other.latent = 16;
  try {
    from_checkpoint(c, other.build_arch());
    FAIL("expected an architecture mismatch");
  } catch (const CheckpointError& e) {
    CHECK(std::string(e.what()).find(arch.canonical()) != std::string::npos);
    CHECK(std::string(e.what()).find(other.build_arch().canonical()) != std::string::npos);
  }
  CHECK(config_from_checkpoint(c).to_map() == cfg.to_map());
}

TEST_CASE("config maps round trip and reject unknown keys") {
  TrainConfig c;
  c.seed = 99;
  c.adam.lr = 3e-4;
  c.weights.lambda_t = 0.7;
  CHECK(TrainConfig::from_map(c.to_map()).to_map() == c.to_map());
  try {
    TrainConfig::from_map({{"lamda_t", "1"}});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "lamda_t");
  }
  CHECK_THROWS_AS(TrainConfig::from_map({{"batch", "-3"}}), ConfigError);
  CHECK_THROWS_AS(TrainConfig::from_map({{"lr", "fast"}}), ConfigError);
  CHECK_THROWS_AS(TrainConfig::from_map({{"noise", "pink"}}), ConfigError);
  const auto code = TrainConfig::from_map({{"lambda_t", "0.5"}, {"preset", "code"}});
  CHECK(code.weights.lambda_t == 0.5);
  CHECK(code.weights.lambda_r == 1.0);
  CHECK(code.weights.metric == Metric::l2);
  TrainConfig bad;
  bad.adam.beta2 = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = TrainConfig{};
  bad.batch = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK(TrainConfig::keys().size() == TrainConfig{}.to_map().size());
}
