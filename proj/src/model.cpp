#include "ign/model.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace ign {

std::string to_string(ArchKind k) {
  switch (k) {
    case ArchKind::identity: return "identity";
    case ArchKind::mlp: return "mlp";
    case ArchKind::dcgan_ae: return "dcgan_ae";
    case ArchKind::custom: return "custom";
  }
  return "?";
}

std::string to_string(LayerOp op) {
  switch (op) {
    case LayerOp::linear: return "linear";
    case LayerOp::conv: return "conv";
    case LayerOp::conv_transpose: return "conv_transpose";
    case LayerOp::zero_pad: return "zero_pad";
    case LayerOp::crop: return "crop";
  }
  return "?";
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::none: return "none";
    case Activation::relu: return "relu";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::tanh: return "tanh";
  }
  return "?";
}

std::string to_string(InitScheme s) { return s == InitScheme::dcgan ? "dcgan" : "fan_in"; }

InitScheme init_scheme_from_string(const std::string& s) {
  if (s == "dcgan") return InitScheme::dcgan;
  if (s == "fan_in") return InitScheme::fan_in;
  throw std::invalid_argument("unknown init scheme '" + s + "' (expected dcgan or fan_in)");
}

bool operator==(const Layer& a, const Layer& b) {
  return a.name == b.name && a.op == b.op && a.in == b.in && a.out == b.out && a.kernel == b.kernel &&
         a.stride == b.stride && a.padding == b.padding && a.batch_norm == b.batch_norm &&
         a.activation == b.activation;
}

namespace {

bool has_params(const Layer& l) {
  return l.op == LayerOp::linear || l.op == LayerOp::conv || l.op == LayerOp::conv_transpose;
}

Shape layer_output(const Layer& l, const Shape& in) {
  auto fail = [&](const std::string& why) {
    throw std::invalid_argument("layer '" + l.name + "': " + why + " (input " + shape_to_string(in) + ")");
  };
  switch (l.op) {
    case LayerOp::linear:
      if (in.size() != 1 || in[0] != l.in) fail("expected (" + std::to_string(l.in) + ")");
      return {l.out};
    case LayerOp::conv:
    case LayerOp::conv_transpose: {
      if (in.size() != 3 || in[0] != l.in) fail("expected " + std::to_string(l.in) + " channels");
      const ag::ConvGeometry g{l.kernel, l.stride, l.padding};
      if (l.op == LayerOp::conv) {
        if (in[1] + 2 * l.padding < l.kernel || in[2] + 2 * l.padding < l.kernel) fail("input smaller than kernel");
        return {l.out, ag::conv_out_size(in[1], g), ag::conv_out_size(in[2], g)};
      }
      return {l.out, ag::conv_transpose_out_size(in[1], g), ag::conv_transpose_out_size(in[2], g)};
    }
    case LayerOp::zero_pad:
      if (in.size() != 3) fail("expected (C, H, W)");
      return {in[0], in[1] + 2 * l.padding, in[2] + 2 * l.padding};
    case LayerOp::crop:
      if (in.size() != 3 || in[1] <= 2 * l.padding || in[2] <= 2 * l.padding) fail("crop exceeds extent");
      return {in[0], in[1] - 2 * l.padding, in[2] - 2 * l.padding};
  }
  return in;
}

std::string dims_x(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
  return out;
}

std::string table_activation(Activation a) {
  switch (a) {
    case Activation::none: return "None";
    case Activation::relu: return "ReLU";
    case Activation::leaky_relu: return "Leaky ReLU";
    case Activation::tanh: return "Tanh";
  }
  return "?";
}

std::string table_op(LayerOp op) {
  switch (op) {
    case LayerOp::linear: return "Linear";
    case LayerOp::conv: return "Convolution";
    case LayerOp::conv_transpose: return "Transposed Convolution";
    case LayerOp::zero_pad: return "Zero padding";
    case LayerOp::crop: return "Crop";
  }
  return "?";
}

Layer conv_layer(std::string name, LayerOp op, std::size_t in, std::size_t out, std::size_t k, std::size_t s,
                 std::size_t p, bool bn, Activation act) {
  Layer l;
  l.name = std::move(name);
  l.op = op;
  l.in = in;
  l.out = out;
  l.kernel = k;
  l.stride = s;
  l.padding = p;
  l.batch_norm = bn;
  l.activation = act;
  return l;
}

}  // namespace

std::vector<Shape> ArchSpec::shape_chain() const {
  std::vector<Shape> chain{signature};
  for (const auto& l : layers) chain.push_back(layer_output(l, chain.back()));
  if (chain.back() != signature) {
    throw std::invalid_argument("architecture output " + shape_to_string(chain.back()) + " differs from signature " +
                                shape_to_string(signature));
  }
  return chain;
}

std::string ArchSpec::canonical() const {
  std::ostringstream os;
  os << "kind=" << to_string(kind) << ";sig=" << dims_x(signature) << ";slope=" << leaky_slope;
  for (const auto& l : layers) {
    os << '|' << l.name << ':' << to_string(l.op) << ',' << l.in << "->" << l.out << ",k" << l.kernel << ",s"
       << l.stride << ",p" << l.padding << ",bn" << (l.batch_norm ? 1 : 0) << ',' << to_string(l.activation);
  }
  return os.str();
}

std::string ArchSpec::layer_table() const {
  const auto chain = shape_chain();
  std::ostringstream os;
  bool in_encoder = false, in_decoder = false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& l = layers[i];
    if (l.name.rfind("enc", 0) == 0 && !in_encoder) {
      os << "Encoder -- " << dims_x(chain[i]) << " input\n";
      in_encoder = true;
    } else if (l.name.rfind("dec", 0) == 0 && !in_decoder) {
      os << "Decoder -- " << dims_x(chain[i]) << " input\n";
      in_decoder = true;
    }
    const bool spatial = l.op == LayerOp::conv || l.op == LayerOp::conv_transpose;
    os << table_op(l.op) << " | "
       << (spatial ? std::to_string(l.kernel) + "x" + std::to_string(l.kernel) : "-") << " | "
       << (spatial ? std::to_string(l.stride) + "x" + std::to_string(l.stride) : "-") << " | "
       << (l.op == LayerOp::linear ? "-" : std::to_string(l.padding)) << " | " << chain[i + 1][0] << " | "
       << (l.batch_norm ? "yes" : "no") << " | " << table_activation(l.activation) << '\n';
  }
  return os.str();
}

ArchSpec build_identity(Shape signature) {
  ArchSpec a;
  a.kind = ArchKind::identity;
  a.signature = std::move(signature);
  return a;
}

ArchSpec build_dcgan_ae(std::size_t channels, std::size_t resolution, std::size_t latent, std::size_t width) {
  if (channels != 1 && channels != 3) {
    throw std::invalid_argument("dcgan_ae: channels must be 1 or 3, got " + std::to_string(channels));
  }
  if (resolution != 28 && resolution != 32 && resolution != 64) {
    throw std::invalid_argument("dcgan_ae: unsupported resolution " + std::to_string(resolution) +
                                " (supported: 28, 32, 64)");
  }
  if (latent == 0 || width == 0) throw std::invalid_argument("dcgan_ae: latent and width must be positive");

  ArchSpec a;
  a.kind = ArchKind::dcgan_ae;
  a.signature = {channels, resolution, resolution};
  const std::size_t pad = resolution == 28 ? 2 : 0;
  const std::size_t bottleneck = resolution == 64 ? 4 : 2;
  if (pad) a.layers.push_back(conv_layer("pad", LayerOp::zero_pad, channels, channels, 0, 1, pad, false, Activation::none));

  const std::size_t maps[] = {width, 2 * width, 4 * width, 8 * width};
  std::size_t in = channels;
  for (std::size_t i = 0; i < 4; ++i) {
    a.layers.push_back(conv_layer("enc" + std::to_string(i), LayerOp::conv, in, maps[i], 4, 2, 1, i > 0,
                                  Activation::leaky_relu));
    in = maps[i];
  }
  a.layers.push_back(conv_layer("enc4", LayerOp::conv, in, latent, bottleneck, 1, 0, false, Activation::none));

  a.layers.push_back(conv_layer("dec0", LayerOp::conv_transpose, latent, maps[3], bottleneck, 1, 0, true,
                                Activation::relu));
  for (std::size_t i = 1; i < 4; ++i) {
    a.layers.push_back(conv_layer("dec" + std::to_string(i), LayerOp::conv_transpose, maps[4 - i], maps[3 - i], 4, 2,
                                  1, true, Activation::relu));
  }
  a.layers.push_back(conv_layer("dec4", LayerOp::conv_transpose, maps[0], channels, 4, 2, 1, false, Activation::tanh));
  if (pad) a.layers.push_back(conv_layer("crop", LayerOp::crop, channels, channels, 0, 1, pad, false, Activation::none));
  a.shape_chain();
  return a;
}

ArchSpec build_mlp(std::size_t dim, std::size_t hidden, std::size_t depth) {
  if (dim < 1 || hidden < 1) throw std::invalid_argument("mlp: dim and hidden must be positive");
  if (depth < 2) throw std::invalid_argument("mlp: depth must be at least 2, got " + std::to_string(depth));
  ArchSpec a;
  a.kind = ArchKind::mlp;
  a.signature = {dim};
  for (std::size_t i = 0; i < depth; ++i) {
    Layer l;
    l.name = "fc" + std::to_string(i);
    l.op = LayerOp::linear;
    l.in = i == 0 ? dim : hidden;
    l.out = i + 1 == depth ? dim : hidden;
    l.activation = i + 1 == depth ? Activation::none : Activation::leaky_relu;
    a.layers.push_back(l);
  }
  return a;
}

ParamSet init_params(const ArchSpec& arch, std::uint64_t seed, InitScheme scheme) {
  arch.shape_chain();
  std::mt19937_64 rng(seed);
  ParamSet ps;
  for (const auto& l : arch.layers) {
    if (!has_params(l)) continue;
    Shape wshape;
    std::size_t fan_in = 0;
    switch (l.op) {
      case LayerOp::linear: wshape = {l.out, l.in}; fan_in = l.in; break;
      case LayerOp::conv: wshape = {l.out, l.in, l.kernel, l.kernel}; fan_in = l.in * l.kernel * l.kernel; break;
      case LayerOp::conv_transpose:
        wshape = {l.in, l.out, l.kernel, l.kernel};
        fan_in = l.out * l.kernel * l.kernel;
        break;
      default: break;
    }
    const double sigma = scheme == InitScheme::dcgan ? 0.02 : 1.0 / std::sqrt(static_cast<double>(fan_in));
    Tensor<float> w(wshape);
    std::normal_distribution<double> wdist(0.0, sigma);
    for (auto& v : w.values()) v = static_cast<float>(wdist(rng));
    ps.entries.emplace(l.name + ".weight", std::move(w));
    ps.entries.emplace(l.name + ".bias", Tensor<float>(Shape{l.out}));
    if (l.batch_norm) {
      Tensor<float> gamma(Shape{l.out}, 1.0f);
      if (scheme == InitScheme::dcgan) {
        std::normal_distribution<double> gdist(1.0, 0.02);
        for (auto& v : gamma.values()) v = static_cast<float>(gdist(rng));
      }
      ps.entries.emplace(l.name + ".bn.gamma", std::move(gamma));
      ps.entries.emplace(l.name + ".bn.beta", Tensor<float>(Shape{l.out}));
      ps.buffers.emplace(l.name + ".bn.running_mean", Tensor<float>(Shape{l.out}));
      ps.buffers.emplace(l.name + ".bn.running_var", Tensor<float>(Shape{l.out}, 1.0f));
    }
  }
  return ps;
}

template <typename T>
ag::Var<T> apply(const ArchSpec& arch, const Instance<T>& inst, const ag::Var<T>& input, Mode mode,
                 TensorMap<T>* running_stats) {
  if (input.shape().size() != arch.signature.size() + 1 || sample_shape(input.shape()) != arch.signature) {
    throw std::invalid_argument("input shape " + shape_to_string(input.shape()) + " does not match signature " +
                                shape_to_string(arch.signature));
  }
  ag::Var<T> h = input;
  for (const Layer& l : arch.layers) {
    try {
      switch (l.op) {
        case LayerOp::linear:
          h = ag::linear(h, inst.param(l.name + ".weight"), inst.param(l.name + ".bias"));
          break;
        case LayerOp::conv:
          h = ag::conv2d(h, inst.param(l.name + ".weight"), inst.param(l.name + ".bias"), {l.kernel, l.stride, l.padding});
          break;
        case LayerOp::conv_transpose:
          h = ag::conv_transpose2d(h, inst.param(l.name + ".weight"), inst.param(l.name + ".bias"),
                                   {l.kernel, l.stride, l.padding});
          break;
        case LayerOp::zero_pad: h = ag::zero_pad2d(h, l.padding); break;
        case LayerOp::crop: h = ag::crop2d(h, l.padding); break;
      }
      if (l.batch_norm) {
        const std::string bn = l.name + ".bn.";
        const auto& gamma = inst.param(bn + "gamma");
        const auto& beta = inst.param(bn + "beta");
        if (mode == Mode::eval) {
          h = ag::batch_norm(h, gamma, beta, &inst.buffer(bn + "running_mean"), &inst.buffer(bn + "running_var"),
                             T(kBatchNormEps), static_cast<ag::BatchStats<T>*>(nullptr));
        } else {
          ag::BatchStats<T> stats;
          h = ag::batch_norm(h, gamma, beta, static_cast<const Tensor<T>*>(nullptr), static_cast<const Tensor<T>*>(nullptr),
                             T(kBatchNormEps), &stats);
          if (running_stats) {
            const T m = T(kBatchNormMomentum);
            auto& rm = running_stats->at(bn + "running_mean");
            auto& rv = running_stats->at(bn + "running_var");
            for (std::size_t c = 0; c < rm.size(); ++c) {
              rm[c] = (T(1) - m) * rm[c] + m * stats.mean[c];
              rv[c] = (T(1) - m) * rv[c] + m * stats.unbiased_var[c];
            }
          }
        }
      }
      switch (l.activation) {
        case Activation::none: break;
        case Activation::relu: h = ag::relu(h); break;
        case Activation::leaky_relu: h = ag::leaky_relu(h, T(arch.leaky_slope)); break;
        case Activation::tanh: h = ag::tanh(h); break;
      }
    } catch (const std::out_of_range& e) {
      throw std::invalid_argument("layer '" + l.name + "': " + e.what());
    } catch (const std::invalid_argument& e) {
      const std::string what = e.what();
      if (what.rfind("layer '", 0) == 0) throw;
      throw std::invalid_argument("layer '" + l.name + "': " + what);
    }
  }
  return h;
}

Grid forward(const ParamSet& params, const ArchSpec& arch, const Grid& input, Mode mode) {
  const auto inst = Instance<float>::frozen(params);
  return apply(arch, inst, ag::Var<float>::constant(input), mode).value();
}

template <typename T>
ag::Var<T> frozen_eval(const Instance<T>& frozen, const ArchSpec& arch, const ag::Var<T>& input, Mode mode) {
  if (frozen.is_live()) throw std::logic_error("frozen_eval needs a frozen instance");
  return apply(arch, frozen, input, mode);
}

template ag::Var<float> apply(const ArchSpec&, const Instance<float>&, const ag::Var<float>&, Mode, TensorMap<float>*);
template ag::Var<double> apply(const ArchSpec&, const Instance<double>&, const ag::Var<double>&, Mode,
                               TensorMap<double>*);
template ag::Var<float> frozen_eval(const Instance<float>&, const ArchSpec&, const ag::Var<float>&, Mode);
template ag::Var<double> frozen_eval(const Instance<double>&, const ArchSpec&, const ag::Var<double>&, Mode);

}  // namespace ign
