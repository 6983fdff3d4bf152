#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ign/checkpoint.hpp"
#include "ign/data.hpp"
#include "ign/model.hpp"
#include "ign/noise.hpp"
#include "ign/objectives.hpp"

namespace ign {

enum class NoiseMode { gaussian, spectral };
std::string to_string(NoiseMode m);
NoiseMode noise_mode_from_string(const std::string& s);

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Everything a run needs. Keys of to_map()/from_map() double as config-file
/// keys and command-line flags.
struct TrainConfig {
  std::string arch = "dcgan_ae";  // dcgan_ae | mlp
  std::size_t channels = 1;
  std::size_t resolution = 28;
  std::size_t latent = 256;
  std::size_t width = 64;
  std::size_t mlp_dim = 2;
  std::size_t mlp_hidden = 64;
  std::size_t mlp_depth = 4;
  InitScheme init = InitScheme::dcgan;

  std::string preset = "table";
  LossWeights weights = LossWeights::table_preset();

  AdamConfig adam;
  /// Global-norm gradient clip; 0 disables it.
  double grad_clip = 0.0;

  std::size_t batch = 256;
  /// Optimizer steps; when `epochs` > 0 it takes precedence.
  std::uint64_t iterations = 1000;
  std::uint64_t epochs = 0;
  std::uint64_t seed = 0;

  NoiseMode noise = NoiseMode::gaussian;
  std::size_t spectral_fit_count = 10000;

  std::uint64_t eval_every = 0;
  std::uint64_t checkpoint_every = 0;
  std::uint64_t sample_every = 0;

  DatasetKind dataset_kind = DatasetKind::idx;
  std::string dataset_path;
  std::size_t toy_count = 8192;

  std::string output_dir = "runs/default";

  ArchSpec build_arch() const;
  void validate() const;

  /// Flat key -> value snapshot; from_map(to_map()) reproduces the config.
  std::map<std::string, std::string> to_map() const;
  /// Applies keys on top of `base`. `preset` is applied before any explicit
  /// loss weight. Unknown keys and malformed values throw ConfigError.
  static TrainConfig from_map(const std::map<std::string, std::string>& kv, TrainConfig base);
  static TrainConfig from_map(const std::map<std::string, std::string>& kv) { return from_map(kv, TrainConfig{}); }
  static const std::vector<std::string>& keys();
};

class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& key, const std::string& why)
      : std::invalid_argument("config key '" + key + "': " + why), key_(key) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

struct TrainState {
  ParamSet live;
  /// θ′: overwritten from `live` at the start of every step.
  ParamSet frozen;
  GradMap adam_m;
  GradMap adam_v;
  std::uint64_t adam_t = 0;
  std::uint64_t step = 0;
  std::mt19937_64 rng;
  std::uint64_t epoch = 0;
  /// Position within the current epoch's permutation.
  std::size_t cursor = 0;
  SpectrumStats spectrum;

  bool operator==(const TrainState&) const = default;
};

/// A step produced a non-finite loss or gradient. The message carries the
/// step's loss report and per-array gradient norms.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, LossReport report)
      : std::runtime_error(what), report_(report) {}
  const LossReport& report() const noexcept { return report_; }

 private:
  LossReport report_;
};

TrainState init_state(const TrainConfig& cfg, const ArchSpec& arch);

/// Draws one batch of source noise shaped like `like` from the state's
/// generator.
Grid draw_noise(TrainState& state, const TrainConfig& cfg, const Shape& like);

struct StepResult {
  LossReport report;
  double grad_norm = 0;
  bool clipped = false;
};

/// One IGN update: sync θ′ ← θ; draw z; f(x), f(z); idem through the frozen
/// outer copy, tightness through the detached inner f(z); one Adam step on θ.
StepResult train_step(TrainState& state, const ArchSpec& arch, const Grid& batch_x, const TrainConfig& cfg);

/// Adam with bias correction, applied in place.
void adam_update(ParamSet& params, const GradMap& grads, GradMap& m, GradMap& v, std::uint64_t& t,
                 const AdamConfig& cfg);

/// Permutation of [0, n) for an epoch; depends only on (seed, epoch).
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::uint64_t epoch);

/// Next training batch by the state's epoch cursor, advancing it.
Grid next_batch(TrainState& state, const Grid& data, const TrainConfig& cfg);

Checkpoint to_checkpoint(const TrainState& state, const ArchSpec& arch, const TrainConfig& cfg);
/// Restores a state; throws CheckpointError if the architecture differs.
TrainState from_checkpoint(const Checkpoint& c, const ArchSpec& arch);
/// Just the trained parameters of a checkpoint.
ParamSet params_from_checkpoint(const Checkpoint& c);
/// The run configuration recorded in a checkpoint.
TrainConfig config_from_checkpoint(const Checkpoint& c);

struct TrainHooks {
  /// Called after every step.
  std::function<void(const TrainState&, const StepResult&)> on_step;
  /// Called every cfg.sample_every steps and at the end.
  std::function<void(const TrainState&)> on_sample;
  /// Called every cfg.eval_every steps.
  std::function<void(const TrainState&)> on_eval;
};

struct TrainResult {
  TrainState state;
  std::filesystem::path final_checkpoint;
  std::vector<LossReport> reports;
};

/// Total steps the config asks for on a dataset of `n` samples.
std::uint64_t planned_steps(const TrainConfig& cfg, std::size_t n);

/// Runs train_step until the planned step count, writing
/// `<output_dir>/metrics.tsv`, periodic `ckpt-<step>.ign` and a final
/// `last.ign`. With `resume`, continues from that state instead of
/// initializing and appends to the metrics log.
TrainResult train(const TrainConfig& cfg, const Grid& data, const TrainHooks& hooks = {},
                  std::optional<TrainState> resume = std::nullopt);

}  // namespace ign
