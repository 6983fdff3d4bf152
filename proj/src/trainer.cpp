#include "ign/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace ign {

std::string to_string(NoiseMode m) { return m == NoiseMode::gaussian ? "gaussian" : "spectral"; }

NoiseMode noise_mode_from_string(const std::string& s) {
  if (s == "gaussian") return NoiseMode::gaussian;
  if (s == "spectral") return NoiseMode::spectral;
  throw std::invalid_argument("unknown noise mode '" + s + "' (expected gaussian or spectral)");
}

// ---------------------------------------------------------------- config

ArchSpec TrainConfig::build_arch() const {
  if (arch == "dcgan_ae") return build_dcgan_ae(channels, resolution, latent, width);
  if (arch == "mlp") return build_mlp(mlp_dim, mlp_hidden, mlp_depth);
  throw ConfigError("arch", "unknown architecture '" + arch + "' (expected dcgan_ae or mlp)");
}

void TrainConfig::validate() const {
  if (!(adam.lr > 0)) throw ConfigError("lr", "must be > 0");
  if (!(adam.beta1 >= 0 && adam.beta1 < 1)) throw ConfigError("beta1", "must lie in [0, 1)");
  if (!(adam.beta2 >= 0 && adam.beta2 < 1)) throw ConfigError("beta2", "must lie in [0, 1)");
  if (!(adam.eps > 0)) throw ConfigError("adam_eps", "must be > 0");
  if (!(grad_clip >= 0)) throw ConfigError("grad_clip", "must be >= 0");
  if (batch < 1) throw ConfigError("batch", "must be >= 1");
  try {
    weights.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("lambda_*", e.what());
  }
  if (noise == NoiseMode::spectral && arch != "dcgan_ae") throw ConfigError("noise", "spectral noise needs images");
  if (noise == NoiseMode::spectral && spectral_fit_count < 2) throw ConfigError("spectral_fit_count", "must be >= 2");
  build_arch();
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string fmt(bool v) { return v ? "true" : "false"; }

template <typename T>
T parse_number(const std::string& key, const std::string& s) {
  std::istringstream is(s);
  T v{};
  is >> v;
  if (!is || !(is >> std::ws).eof()) throw ConfigError(key, "cannot parse '" + s + "' as a number");
  if constexpr (std::is_unsigned_v<T>) {
    if (s.find('-') != std::string::npos) throw ConfigError(key, "must be non-negative");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError(key, "cannot parse '" + s + "' as a boolean");
}

template <typename F>
auto wrap(const std::string& key, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key, e.what());
  }
}

}  // namespace

const std::vector<std::string>& TrainConfig::keys() {
  static const std::vector<std::string> k{
      "arch",        "channels",   "resolution",      "latent",         "width",
      "mlp_dim",     "mlp_hidden", "mlp_depth",       "init",           "preset",
      "lambda_r",    "lambda_i",   "lambda_t",        "clamp",          "clamp_ratio",
      "metric",      "per_sample_clamp",              "lr",             "beta1",
      "beta2",       "adam_eps",   "grad_clip",       "batch",          "iterations",
      "epochs",      "seed",       "noise",           "spectral_fit_count",
      "eval_every",  "checkpoint_every",              "sample_every",   "dataset_kind",
      "dataset_path", "toy_count", "output_dir"};
  return k;
}

std::map<std::string, std::string> TrainConfig::to_map() const {
  return {{"arch", arch},
          {"channels", std::to_string(channels)},
          {"resolution", std::to_string(resolution)},
          {"latent", std::to_string(latent)},
          {"width", std::to_string(width)},
          {"mlp_dim", std::to_string(mlp_dim)},
          {"mlp_hidden", std::to_string(mlp_hidden)},
          {"mlp_depth", std::to_string(mlp_depth)},
          {"init", to_string(init)},
          {"preset", preset},
          {"lambda_r", fmt(weights.lambda_r)},
          {"lambda_i", fmt(weights.lambda_i)},
          {"lambda_t", fmt(weights.lambda_t)},
          {"clamp", fmt(weights.clamp)},
          {"clamp_ratio", fmt(weights.clamp_ratio)},
          {"metric", to_string(weights.metric)},
          {"per_sample_clamp", fmt(weights.per_sample_clamp)},
          {"lr", fmt(adam.lr)},
          {"beta1", fmt(adam.beta1)},
          {"beta2", fmt(adam.beta2)},
          {"adam_eps", fmt(adam.eps)},
          {"grad_clip", fmt(grad_clip)},
          {"batch", std::to_string(batch)},
          {"iterations", std::to_string(iterations)},
          {"epochs", std::to_string(epochs)},
          {"seed", std::to_string(seed)},
          {"noise", to_string(noise)},
          {"spectral_fit_count", std::to_string(spectral_fit_count)},
          {"eval_every", std::to_string(eval_every)},
          {"checkpoint_every", std::to_string(checkpoint_every)},
          {"sample_every", std::to_string(sample_every)},
          {"dataset_kind", to_string(dataset_kind)},
          {"dataset_path", dataset_path},
          {"toy_count", std::to_string(toy_count)},
          {"output_dir", output_dir}};
}

TrainConfig TrainConfig::from_map(const std::map<std::string, std::string>& kv, TrainConfig c) {
  for (const auto& [k, _] : kv) {
    if (std::find(keys().begin(), keys().end(), k) == keys().end()) throw ConfigError(k, "unknown key");
  }
  if (auto it = kv.find("preset"); it != kv.end()) {
    c.preset = it->second;
    c.weights = wrap("preset", [&] { return LossWeights::preset(it->second); });
  }
  for (const auto& [k, v] : kv) {
    using U = std::uint64_t;
    using Z = std::size_t;
    if (k == "preset") continue;
    else if (k == "arch") c.arch = v;
    else if (k == "channels") c.channels = parse_number<Z>(k, v);
    else if (k == "resolution") c.resolution = parse_number<Z>(k, v);
    else if (k == "latent") c.latent = parse_number<Z>(k, v);
    else if (k == "width") c.width = parse_number<Z>(k, v);
    else if (k == "mlp_dim") c.mlp_dim = parse_number<Z>(k, v);
    else if (k == "mlp_hidden") c.mlp_hidden = parse_number<Z>(k, v);
    else if (k == "mlp_depth") c.mlp_depth = parse_number<Z>(k, v);
    else if (k == "init") c.init = wrap(k, [&] { return init_scheme_from_string(v); });
    else if (k == "lambda_r") c.weights.lambda_r = parse_number<double>(k, v);
    else if (k == "lambda_i") c.weights.lambda_i = parse_number<double>(k, v);
    else if (k == "lambda_t") c.weights.lambda_t = parse_number<double>(k, v);
    else if (k == "clamp") c.weights.clamp = parse_bool(k, v);
    else if (k == "clamp_ratio") c.weights.clamp_ratio = parse_number<double>(k, v);
    else if (k == "metric") c.weights.metric = wrap(k, [&] { return metric_from_string(v); });
    else if (k == "per_sample_clamp") c.weights.per_sample_clamp = parse_bool(k, v);
    else if (k == "lr") c.adam.lr = parse_number<double>(k, v);
    else if (k == "beta1") c.adam.beta1 = parse_number<double>(k, v);
    else if (k == "beta2") c.adam.beta2 = parse_number<double>(k, v);
    else if (k == "adam_eps") c.adam.eps = parse_number<double>(k, v);
    else if (k == "grad_clip") c.grad_clip = parse_number<double>(k, v);
    else if (k == "batch") c.batch = parse_number<Z>(k, v);
    else if (k == "iterations") c.iterations = parse_number<U>(k, v);
    else if (k == "epochs") c.epochs = parse_number<U>(k, v);
    else if (k == "seed") c.seed = parse_number<U>(k, v);
    else if (k == "noise") c.noise = wrap(k, [&] { return noise_mode_from_string(v); });
    else if (k == "spectral_fit_count") c.spectral_fit_count = parse_number<Z>(k, v);
    else if (k == "eval_every") c.eval_every = parse_number<U>(k, v);
    else if (k == "checkpoint_every") c.checkpoint_every = parse_number<U>(k, v);
    else if (k == "sample_every") c.sample_every = parse_number<U>(k, v);
    else if (k == "dataset_kind") c.dataset_kind = wrap(k, [&] { return dataset_kind_from_string(v); });
    else if (k == "dataset_path") c.dataset_path = v;
    else if (k == "toy_count") c.toy_count = parse_number<Z>(k, v);
    else if (k == "output_dir") c.output_dir = v;
  }
  return c;
}

// ---------------------------------------------------------------- state

TrainState init_state(const TrainConfig& cfg, const ArchSpec& arch) {
  TrainState s;
  s.live = init_params(arch, cfg.seed, cfg.init);
  s.frozen = s.live;
  s.adam_m = zero_grads(s.live);
  s.adam_v = zero_grads(s.live);
  // The training stream is decorrelated from the initialization stream.
  std::seed_seq seq{std::uint32_t(cfg.seed), std::uint32_t(cfg.seed >> 32), 0x7261696eu};
  s.rng.seed(seq);
  return s;
}

Grid draw_noise(TrainState& state, const TrainConfig& cfg, const Shape& like) {
  if (cfg.noise == NoiseMode::spectral) {
    if (state.spectrum.empty()) throw std::logic_error("spectral noise requested before fitting statistics");
    return sample_spectral(state.spectrum, like.at(0), state.rng);
  }
  Grid z(like);
  fill_gaussian(z, state.rng);
  return z;
}

void adam_update(ParamSet& params, const GradMap& grads, GradMap& m, GradMap& v, std::uint64_t& t,
                 const AdamConfig& cfg) {
  ++t;
  const double bc1 = 1.0 - std::pow(cfg.beta1, double(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, double(t));
  const float b1 = float(cfg.beta1), b2 = float(cfg.beta2);
  const float step_size = float(cfg.lr / bc1);
  const float sqrt_bc2 = float(std::sqrt(bc2));
  const float eps = float(cfg.eps);
  for (auto& [name, p] : params.entries) {
    const auto& g = grads.at(name);
    auto& mm = m.at(name);
    auto& vv = v.at(name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      mm[i] = b1 * mm[i] + (1.0f - b1) * g[i];
      vv[i] = b2 * vv[i] + (1.0f - b2) * g[i] * g[i];
      p[i] -= step_size * mm[i] / (std::sqrt(vv[i]) / sqrt_bc2 + eps);
    }
  }
  ++params.version;
}

namespace {

std::string diagnostics(const LossReport& r, const GradMap* grads) {
  std::ostringstream os;
  os << "rec=" << r.rec << " idem=" << r.idem << " tight_raw=" << r.tight_raw << " tight_clamped=" << r.tight_clamped
     << " total=" << r.total;
  if (grads != nullptr) {
    os << "; grad norms:";
    for (const auto& [name, g] : *grads) {
      double s = 0;
      for (float v : g.values()) s += double(v) * v;
      os << ' ' << name << '=' << std::sqrt(s);
    }
  }
  return os.str();
}

bool finite(const LossReport& r) {
  return std::isfinite(r.rec) && std::isfinite(r.idem) && std::isfinite(r.tight_raw) &&
         std::isfinite(r.tight_clamped) && std::isfinite(r.total);
}

}  // namespace

StepResult train_step(TrainState& state, const ArchSpec& arch, const Grid& batch_x, const TrainConfig& cfg) {
  // θ′ ← θ, including batch-norm running statistics.
  state.frozen = state.live;
  const Grid z = draw_noise(state, cfg, batch_x.shape());

  const auto live = Instance<float>::live(state.live);
  const auto frozen = Instance<float>::frozen(state.frozen);
  TensorMap<float> running = state.live.buffers;
  const auto loss = total_loss(arch, live, frozen, ag::Var<float>::constant(batch_x), ag::Var<float>::constant(z),
                               cfg.weights, Mode::train, &running);

  StepResult out;
  out.report = loss.report;
  if (!finite(out.report)) {
    throw TrainingDiverged("non-finite loss at step " + std::to_string(state.step) + ": " +
                               diagnostics(out.report, nullptr),
                           out.report);
  }
  GradMap grads = backward(loss.total, live);
  out.grad_norm = global_norm(grads);
  if (!std::isfinite(out.grad_norm)) {
    throw TrainingDiverged("non-finite gradient at step " + std::to_string(state.step) + ": " +
                               diagnostics(out.report, &grads),
                           out.report);
  }
  if (cfg.grad_clip > 0 && out.grad_norm > cfg.grad_clip) {
    const float s = float(cfg.grad_clip / out.grad_norm);
    for (auto& [_, g] : grads) {
      for (float& v : g.values()) v *= s;
    }
    out.clipped = true;
  }
  adam_update(state.live, grads, state.adam_m, state.adam_v, state.adam_t, cfg.adam);
  state.live.buffers = std::move(running);
  ++state.step;
  return out;
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::uint64_t epoch) {
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(epoch), std::uint32_t(epoch >> 32)};
  std::mt19937_64 rng(seq);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  // Fisher-Yates with an explicit modulo-free draw keeps the permutation
  // independent of the standard library's distribution implementation.
  for (std::size_t i = n; i > 1; --i) {
    const std::uint64_t bound = i;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t r;
    do r = rng();
    while (r >= limit);
    std::swap(order[i - 1], order[r % bound]);
  }
  return order;
}

Grid next_batch(TrainState& state, const Grid& data, const TrainConfig& cfg) {
  const std::size_t n = data.dim(0);
  if (cfg.batch > n) {
    throw std::invalid_argument("batch " + std::to_string(cfg.batch) + " exceeds dataset size " + std::to_string(n));
  }
  if (state.cursor + cfg.batch > n) {
    ++state.epoch;
    state.cursor = 0;
  }
  thread_local struct {
    std::size_t n = 0;
    std::uint64_t seed = 0, epoch = 0;
    std::vector<std::size_t> order;
  } cache;
  if (cache.order.empty() || cache.n != n || cache.seed != cfg.seed || cache.epoch != state.epoch) {
    cache.order = epoch_order(n, cfg.seed, state.epoch);
    cache.n = n;
    cache.seed = cfg.seed;
    cache.epoch = state.epoch;
  }
  const std::span<const std::size_t> idx(cache.order.data() + state.cursor, cfg.batch);
  state.cursor += cfg.batch;
  return gather_batch(data, idx);
}

// ---------------------------------------------------------------- checkpoints

namespace {
const std::string kParam = "param/";
const std::string kBuffer = "buffer/";
const std::string kAdamM = "adam.m/";
const std::string kAdamV = "adam.v/";
const std::string kSpectrum = "spectrum/";
const std::string kConfig = "config.";

std::string join_shape(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out;
}

Shape split_shape(const std::string& s) {
  Shape out;
  std::istringstream is(s);
  std::string part;
  while (std::getline(is, part, ',')) out.push_back(std::stoull(part));
  return out;
}

const std::string& meta_at(const Checkpoint& c, const std::string& key) {
  auto it = c.meta.find(key);
  if (it == c.meta.end()) throw CheckpointError("checkpoint lacks '" + key + "'");
  return it->second;
}
}  // namespace

Checkpoint to_checkpoint(const TrainState& s, const ArchSpec& arch, const TrainConfig& cfg) {
  Checkpoint c;
  c.arch = arch.canonical();
  c.step = s.step;
  std::ostringstream rng;
  rng << s.rng;
  c.rng_state = rng.str();
  for (const auto& [k, v] : cfg.to_map()) c.meta[kConfig + k] = v;
  c.meta["adam_t"] = std::to_string(s.adam_t);
  c.meta["epoch"] = std::to_string(s.epoch);
  c.meta["cursor"] = std::to_string(s.cursor);
  for (const auto& [k, t] : s.live.entries) c.f32.emplace(kParam + k, t);
  for (const auto& [k, t] : s.live.buffers) c.f32.emplace(kBuffer + k, t);
  for (const auto& [k, t] : s.adam_m) c.f32.emplace(kAdamM + k, t);
  for (const auto& [k, t] : s.adam_v) c.f32.emplace(kAdamV + k, t);
  if (!s.spectrum.empty()) {
    c.meta["spectrum.shape"] = join_shape(s.spectrum.image_shape);
    c.f64.emplace(kSpectrum + "mean_re", s.spectrum.mean_re);
    c.f64.emplace(kSpectrum + "var_re", s.spectrum.var_re);
    c.f64.emplace(kSpectrum + "mean_im", s.spectrum.mean_im);
    c.f64.emplace(kSpectrum + "var_im", s.spectrum.var_im);
  }
  return c;
}

ParamSet params_from_checkpoint(const Checkpoint& c) {
  ParamSet p;
  p.entries = entries_with_prefix(c.f32, kParam);
  p.buffers = entries_with_prefix(c.f32, kBuffer);
  p.version = c.step;
  return p;
}

TrainConfig config_from_checkpoint(const Checkpoint& c) {
  std::map<std::string, std::string> kv;
  for (const auto& [k, v] : c.meta) {
    if (k.starts_with(kConfig)) kv.emplace(k.substr(kConfig.size()), v);
  }
  return TrainConfig::from_map(kv);
}

TrainState from_checkpoint(const Checkpoint& c, const ArchSpec& arch) {
  if (c.arch != arch.canonical()) {
    throw CheckpointError("architecture mismatch:\n  checkpoint: " + c.arch + "\n  expected:   " + arch.canonical());
  }
  TrainState s;
  s.live = params_from_checkpoint(c);
  s.frozen = s.live;
  s.adam_m = entries_with_prefix(c.f32, kAdamM);
  s.adam_v = entries_with_prefix(c.f32, kAdamV);
  s.adam_t = std::stoull(meta_at(c, "adam_t"));
  s.epoch = std::stoull(meta_at(c, "epoch"));
  s.cursor = std::stoull(meta_at(c, "cursor"));
  s.step = c.step;
  std::istringstream rng(c.rng_state);
  rng >> s.rng;
  if (!rng) throw CheckpointError("malformed generator state");
  if (auto it = c.meta.find("spectrum.shape"); it != c.meta.end()) {
    s.spectrum.image_shape = split_shape(it->second);
    s.spectrum.mean_re = c.f64.at(kSpectrum + "mean_re");
    s.spectrum.var_re = c.f64.at(kSpectrum + "var_re");
    s.spectrum.mean_im = c.f64.at(kSpectrum + "mean_im");
    s.spectrum.var_im = c.f64.at(kSpectrum + "var_im");
  }
  return s;
}

// ---------------------------------------------------------------- loop

std::uint64_t planned_steps(const TrainConfig& cfg, std::size_t n) {
  if (cfg.epochs > 0) return cfg.epochs * (n / cfg.batch);
  return cfg.iterations;
}

TrainResult train(const TrainConfig& cfg, const Grid& data, const TrainHooks& hooks, std::optional<TrainState> resume) {
  cfg.validate();
  const ArchSpec arch = cfg.build_arch();
  if (data.rank() < 2 || sample_shape(data.shape()) != arch.signature) {
    throw std::invalid_argument("dataset samples " + shape_to_string(data.rank() ? sample_shape(data.shape()) : Shape{}) +
                                " do not match the model signature " + shape_to_string(arch.signature));
  }
  const std::size_t n = data.dim(0);
  if (cfg.batch > n) {
    throw std::invalid_argument("batch " + std::to_string(cfg.batch) + " exceeds dataset size " + std::to_string(n));
  }

  const bool resuming = resume.has_value();
  TrainResult result{resuming ? std::move(*resume) : init_state(cfg, arch), {}, {}};
  TrainState& state = result.state;
  if (cfg.noise == NoiseMode::spectral && state.spectrum.empty()) {
    state.spectrum = fit_spectrum(slice_batch(data, 0, std::min(n, cfg.spectral_fit_count)));
  }

  const std::filesystem::path out_dir(cfg.output_dir);
  std::filesystem::create_directories(out_dir);
  const auto metrics_path = out_dir / "metrics.tsv";
  const bool fresh_log = !resuming || !std::filesystem::exists(metrics_path);
  std::ofstream metrics(metrics_path, fresh_log ? std::ios::trunc : std::ios::app);
  if (!metrics) throw std::runtime_error("cannot write " + metrics_path.string());
  if (fresh_log) {
    metrics << "# seed=" << cfg.seed << " batch=" << cfg.batch << " samples=" << n
            << " order=per-epoch permutation of mt19937_64(seed_seq{seed, epoch})\n";
    metrics << LossReport::tsv_header() << '\n';
  }

  const std::uint64_t total = planned_steps(cfg, n);
  while (state.step < total) {
    const Grid x = next_batch(state, data, cfg);
    const StepResult step = train_step(state, arch, x, cfg);
    metrics << step.report.to_tsv(state.step) << '\n';
    result.reports.push_back(step.report);
    if (step.clipped) metrics << "# step " << state.step << ": gradient norm " << step.grad_norm << " clipped\n";
    if (hooks.on_step) hooks.on_step(state, step);
    if (cfg.eval_every > 0 && state.step % cfg.eval_every == 0 && hooks.on_eval) hooks.on_eval(state);
    if (cfg.sample_every > 0 && state.step % cfg.sample_every == 0 && hooks.on_sample) hooks.on_sample(state);
    if (cfg.checkpoint_every > 0 && state.step % cfg.checkpoint_every == 0) {
      metrics.flush();
      save_checkpoint(out_dir / ("ckpt-" + std::to_string(state.step) + ".ign"), to_checkpoint(state, arch, cfg));
    }
  }
  metrics.flush();
  result.final_checkpoint = out_dir / "last.ign";
  save_checkpoint(result.final_checkpoint, to_checkpoint(state, arch, cfg));
  if (hooks.on_sample) hooks.on_sample(state);
  return result;
}

}  // namespace ign
