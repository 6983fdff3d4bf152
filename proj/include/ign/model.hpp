#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ign/ops.hpp"
#include "ign/param_set.hpp"

namespace ign {

enum class ArchKind { identity, mlp, dcgan_ae, custom };
enum class LayerOp { linear, conv, conv_transpose, zero_pad, crop };
enum class Activation { none, relu, leaky_relu, tanh };

std::string to_string(ArchKind k);
std::string to_string(LayerOp op);
std::string to_string(Activation a);

struct Layer {
  std::string name;
  LayerOp op = LayerOp::linear;
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;
  bool batch_norm = false;
  Activation activation = Activation::none;
};

/// Layer list of a model mapping a space to itself.
struct ArchSpec {
  ArchKind kind = ArchKind::custom;
  /// Per-sample shape of both input and output: (C, H, W) or (features).
  Shape signature;
  std::vector<Layer> layers;
  float leaky_slope = 0.2f;

  /// Single-line text used in checkpoint headers for compatibility checks.
  std::string canonical() const;
  /// Human-readable table: operation, kernel, strides, padding, feature maps,
  /// BN, nonlinearity.
  std::string layer_table() const;
  /// Per-sample shape after each layer; throws naming the first layer whose
  /// input does not fit, or if the final shape differs from the signature.
  std::vector<Shape> shape_chain() const;

  bool operator==(const ArchSpec&) const = default;
};

bool operator==(const Layer& a, const Layer& b);

ArchSpec build_identity(Shape signature);

/// DCGAN-style autoencoder. `width` is the first encoder feature-map count
/// (doubling to 8*width); 64 is the full-size 64x64 network. Resolution 28 is
/// zero-padded to 32 on entry and cropped back on exit; at 32 the bottleneck
/// kernel shrinks to 2x2.
ArchSpec build_dcgan_ae(std::size_t channels, std::size_t resolution, std::size_t latent, std::size_t width = 64);

/// dim -> hidden -> ... -> dim with `depth` linear layers, leaky-ReLU between
/// them and a linear output.
ArchSpec build_mlp(std::size_t dim, std::size_t hidden, std::size_t depth);

enum class InitScheme {
  /// Weights ~ N(0, 0.02^2), biases 0, batch-norm scale ~ N(1, 0.02^2).
  dcgan,
  /// Weights ~ N(0, 1/fan_in), biases 0.
  fan_in,
};

std::string to_string(InitScheme s);
InitScheme init_scheme_from_string(const std::string& s);

ParamSet init_params(const ArchSpec& arch, std::uint64_t seed, InitScheme scheme = InitScheme::dcgan);

enum class Mode { train, eval };

/// Evaluates one instantiation of f. In training mode batch norm uses batch
/// statistics and, if `running_stats` is given, folds them into it with
/// momentum 0.1; in eval mode the instance's running statistics are used.
template <typename T>
ag::Var<T> apply(const ArchSpec& arch, const Instance<T>& inst, const ag::Var<T>& input, Mode mode,
                 TensorMap<T>* running_stats = nullptr);

/// f_theta(input) as a plain value.
Grid forward(const ParamSet& params, const ArchSpec& arch, const Grid& input, Mode mode = Mode::eval);

/// Outer application through a frozen copy: the result depends on `input`
/// differentiably, but no gradient ever reaches `frozen`'s parameters.
template <typename T>
ag::Var<T> frozen_eval(const Instance<T>& frozen, const ArchSpec& arch, const ag::Var<T>& input, Mode mode);

constexpr float kBatchNormEps = 1e-5f;
constexpr float kBatchNormMomentum = 0.1f;

}  // namespace ign
