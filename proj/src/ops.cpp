#include "ign/ops.hpp"

#include <Eigen/Core>
#include <cmath>
#include <stdexcept>

namespace ign::ag {

namespace {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<Mat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const Mat<T>>;

template <typename T>
T* grad_of(Node<T>& parent) {
  return parent.requires_grad ? parent.grad_buffer().data() : nullptr;
}

void require_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (a != b) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_to_string(a) + " vs " +
                                shape_to_string(b));
  }
}

template <typename T, typename Fwd, typename Deriv>
Var<T> unary(const Var<T>& a, Fwd fwd, Deriv deriv) {
  Tensor<T> out(a.shape());
  const auto& in = a.value();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  return make_result<T>(std::move(out), {a}, [deriv](Node<T>& self) {
    Node<T>& p = *self.parents[0];
    T* g = grad_of(p);
    if (!g) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * deriv(p.value[i], self.value[i]);
  });
}

struct Im2ColGeometry {
  std::size_t batch, channels, height, width, kernel, stride, padding, out_h, out_w;
};

// cols has shape (C*k*k, B*out_h*out_w).
template <typename T>
void im2col(const T* img, const Im2ColGeometry& g, T* cols) {
  const std::size_t out_plane = g.out_h * g.out_w;
  const std::size_t ncols = g.batch * out_plane;
  const auto pad = static_cast<std::ptrdiff_t>(g.padding);
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ki = 0; ki < g.kernel; ++ki) {
      for (std::size_t kj = 0; kj < g.kernel; ++kj) {
        T* row = cols + ((c * g.kernel + ki) * g.kernel + kj) * ncols;
        for (std::size_t b = 0; b < g.batch; ++b) {
          const T* plane = img + (b * g.channels + c) * g.height * g.width;
          T* dst = row + b * out_plane;
          for (std::size_t oh = 0; oh < g.out_h; ++oh) {
            const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * g.stride + ki) - pad;
            const bool row_ok = ih >= 0 && ih < static_cast<std::ptrdiff_t>(g.height);
            for (std::size_t ow = 0; ow < g.out_w; ++ow) {
              const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * g.stride + kj) - pad;
              const bool ok = row_ok && iw >= 0 && iw < static_cast<std::ptrdiff_t>(g.width);
              dst[oh * g.out_w + ow] = ok ? plane[ih * static_cast<std::ptrdiff_t>(g.width) + iw] : T(0);
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters cols back into img (accumulating).
template <typename T>
void col2im(const T* cols, const Im2ColGeometry& g, T* img) {
  const std::size_t out_plane = g.out_h * g.out_w;
  const std::size_t ncols = g.batch * out_plane;
  const auto pad = static_cast<std::ptrdiff_t>(g.padding);
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ki = 0; ki < g.kernel; ++ki) {
      for (std::size_t kj = 0; kj < g.kernel; ++kj) {
        const T* row = cols + ((c * g.kernel + ki) * g.kernel + kj) * ncols;
        for (std::size_t b = 0; b < g.batch; ++b) {
          T* plane = img + (b * g.channels + c) * g.height * g.width;
          const T* src = row + b * out_plane;
          for (std::size_t oh = 0; oh < g.out_h; ++oh) {
            const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * g.stride + ki) - pad;
            if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.height)) continue;
            for (std::size_t ow = 0; ow < g.out_w; ++ow) {
              const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * g.stride + kj) - pad;
              if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.width)) continue;
              plane[ih * static_cast<std::ptrdiff_t>(g.width) + iw] += src[oh * g.out_w + ow];
            }
          }
        }
      }
    }
  }
}

// (B, C, P) <-> (C, B*P) reshuffles.
template <typename T>
void batch_major_to_channel_major(const T* src, std::size_t batch, std::size_t channels, std::size_t plane,
                                  T* dst) {
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < channels; ++c)
      std::copy_n(src + (b * channels + c) * plane, plane, dst + (c * batch + b) * plane);
}

template <typename T>
void channel_major_to_batch_major(const T* src, std::size_t batch, std::size_t channels, std::size_t plane,
                                  T* dst) {
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < channels; ++c)
      std::copy_n(src + (c * batch + b) * plane, plane, dst + (b * channels + c) * plane);
}

void require_rank(const Shape& s, std::size_t rank, const char* op) {
  if (s.size() != rank) {
    throw std::invalid_argument(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                                shape_to_string(s));
  }
}

}  // namespace

std::size_t conv_out_size(std::size_t in, ConvGeometry g) {
  if (in + 2 * g.padding < g.kernel) {
    throw std::invalid_argument("conv: input extent " + std::to_string(in) + " smaller than kernel " +
                                std::to_string(g.kernel));
  }
  return (in + 2 * g.padding - g.kernel) / g.stride + 1;
}

std::size_t conv_transpose_out_size(std::size_t in, ConvGeometry g) {
  const std::size_t full = (in - 1) * g.stride + g.kernel;
  if (full <= 2 * g.padding) throw std::invalid_argument("conv_transpose: padding consumes the whole output");
  return full - 2 * g.padding;
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& self) {
    for (int k = 0; k < 2; ++k) {
      if (T* g = grad_of(*self.parents[k]))
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.shape(), b.shape(), "sub");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& self) {
    if (T* g = grad_of(*self.parents[0]))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    if (T* g = grad_of(*self.parents[1]))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.shape(), b.shape(), "mul");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& self) {
    Node<T>& pa = *self.parents[0];
    Node<T>& pb = *self.parents[1];
    if (T* g = grad_of(pa))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * pb.value[i];
    if (T* g = grad_of(pb))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * pa.value[i];
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T factor) {
  return unary(a, [factor](T v) { return v * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
Var<T> abs(const Var<T>& a) {
  return unary(
      a, [](T v) { return std::abs(v); }, [](T in, T) { return in > T(0) ? T(1) : (in < T(0) ? T(-1) : T(0)); });
}

template <typename T>
Var<T> square(const Var<T>& a) {
  return unary(a, [](T v) { return v * v; }, [](T in, T) { return T(2) * in; });
}

template <typename T>
Var<T> tanh(const Var<T>& a) {
  return unary(a, [](T v) { return std::tanh(v); }, [](T, T out) { return T(1) - out * out; });
}

template <typename T>
Var<T> relu(const Var<T>& a) {
  return unary(a, [](T v) { return v > T(0) ? v : T(0); }, [](T in, T) { return in > T(0) ? T(1) : T(0); });
}

template <typename T>
Var<T> leaky_relu(const Var<T>& a, T slope) {
  return unary(
      a, [slope](T v) { return v > T(0) ? v : slope * v; }, [slope](T in, T) { return in > T(0) ? T(1) : slope; });
}

template <typename T>
Var<T> sum(const Var<T>& a) {
  T total = 0;
  for (T v : a.value().values()) total += v;
  return make_result<T>(Tensor<T>::scalar(total), {a}, [](Node<T>& self) {
    if (T* g = grad_of(*self.parents[0])) {
      const T up = self.grad[0];
      for (std::size_t i = 0; i < self.parents[0]->value.size(); ++i) g[i] += up;
    }
  });
}

template <typename T>
Var<T> mean(const Var<T>& a) {
  const auto n = static_cast<T>(a.value().size());
  T total = 0;
  for (T v : a.value().values()) total += v;
  return make_result<T>(Tensor<T>::scalar(total / n), {a}, [n](Node<T>& self) {
    if (T* g = grad_of(*self.parents[0])) {
      const T up = self.grad[0] / n;
      for (std::size_t i = 0; i < self.parents[0]->value.size(); ++i) g[i] += up;
    }
  });
}

template <typename T>
Var<T> mean_per_sample(const Var<T>& a) {
  if (a.shape().empty()) throw std::invalid_argument("mean_per_sample on a rank-0 tensor");
  const std::size_t batch = a.shape()[0];
  const std::size_t per = a.value().size() / batch;
  Tensor<T> out(Shape{batch});
  for (std::size_t b = 0; b < batch; ++b) {
    T acc = 0;
    for (std::size_t i = 0; i < per; ++i) acc += a.value()[b * per + i];
    out[b] = acc / static_cast<T>(per);
  }
  return make_result<T>(std::move(out), {a}, [batch, per](Node<T>& self) {
    if (T* g = grad_of(*self.parents[0]))
      for (std::size_t b = 0; b < batch; ++b) {
        const T up = self.grad[b] / static_cast<T>(per);
        for (std::size_t i = 0; i < per; ++i) g[b * per + i] += up;
      }
  });
}

template <typename T>
Var<T> reshape(const Var<T>& a, Shape shape) {
  if (shape_numel(shape) != a.value().size()) {
    throw std::invalid_argument("reshape " + shape_to_string(a.shape()) + " -> " + shape_to_string(shape));
  }
  Tensor<T> out(std::move(shape), a.value().storage());
  return make_result<T>(std::move(out), {a}, [](Node<T>& self) {
    if (T* g = grad_of(*self.parents[0]))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

template <typename T>
Var<T> zero_pad2d(const Var<T>& a, std::size_t pad) {
  require_rank(a.shape(), 4, "zero_pad2d");
  const auto& s = a.shape();
  const std::size_t planes = s[0] * s[1], h = s[2], w = s[3], oh = h + 2 * pad, ow = w + 2 * pad;
  Tensor<T> out(Shape{s[0], s[1], oh, ow});
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t i = 0; i < h; ++i)
      std::copy_n(a.value().data() + (p * h + i) * w, w, out.data() + (p * oh + i + pad) * ow + pad);
  return make_result<T>(std::move(out), {a}, [planes, h, w, oh, ow, pad](Node<T>& self) {
    if (T* g = grad_of(*self.parents[0]))
      for (std::size_t p = 0; p < planes; ++p)
        for (std::size_t i = 0; i < h; ++i)
          for (std::size_t j = 0; j < w; ++j) g[(p * h + i) * w + j] += self.grad[(p * oh + i + pad) * ow + j + pad];
  });
}

template <typename T>
Var<T> crop2d(const Var<T>& a, std::size_t crop) {
  require_rank(a.shape(), 4, "crop2d");
  const auto& s = a.shape();
  if (s[2] <= 2 * crop || s[3] <= 2 * crop) throw std::invalid_argument("crop2d: crop exceeds extent");
  const std::size_t planes = s[0] * s[1], h = s[2], w = s[3], oh = h - 2 * crop, ow = w - 2 * crop;
  Tensor<T> out(Shape{s[0], s[1], oh, ow});
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t i = 0; i < oh; ++i)
      std::copy_n(a.value().data() + (p * h + i + crop) * w + crop, ow, out.data() + (p * oh + i) * ow);
  return make_result<T>(std::move(out), {a}, [planes, h, w, oh, ow, crop](Node<T>& self) {
    if (T* g = grad_of(*self.parents[0]))
      for (std::size_t p = 0; p < planes; ++p)
        for (std::size_t i = 0; i < oh; ++i)
          for (std::size_t j = 0; j < ow; ++j) g[(p * h + i + crop) * w + j + crop] += self.grad[(p * oh + i) * ow + j];
  });
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
  require_rank(x.shape(), 2, "linear input");
  require_rank(weight.shape(), 2, "linear weight");
  const std::size_t batch = x.shape()[0], in = x.shape()[1], out_dim = weight.shape()[0];
  if (weight.shape()[1] != in || bias.value().size() != out_dim) {
    throw std::invalid_argument("linear: input " + shape_to_string(x.shape()) + " incompatible with weight " +
                                shape_to_string(weight.shape()));
  }
  Tensor<T> out(Shape{batch, out_dim});
  {
    ConstMatMap<T> X(x.value().data(), batch, in);
    ConstMatMap<T> W(weight.value().data(), out_dim, in);
    MatMap<T> Y(out.data(), batch, out_dim);
    Y.noalias() = X * W.transpose();
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t o = 0; o < out_dim; ++o) Y(b, o) += bias.value()[o];
  }
  return make_result<T>(std::move(out), {x, weight, bias}, [batch, in, out_dim](Node<T>& self) {
    ConstMatMap<T> G(self.grad.data(), batch, out_dim);
    Node<T>& px = *self.parents[0];
    Node<T>& pw = *self.parents[1];
    if (T* g = grad_of(px)) {
      MatMap<T> dX(g, batch, in);
      dX.noalias() += G * ConstMatMap<T>(pw.value.data(), out_dim, in);
    }
    if (T* g = grad_of(pw)) {
      MatMap<T> dW(g, out_dim, in);
      dW.noalias() += G.transpose() * ConstMatMap<T>(px.value.data(), batch, in);
    }
    if (T* g = grad_of(*self.parents[2]))
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t o = 0; o < out_dim; ++o) g[o] += G(b, o);
  });
}

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, ConvGeometry geo) {
  require_rank(x.shape(), 4, "conv2d input");
  require_rank(weight.shape(), 4, "conv2d weight");
  const auto& xs = x.shape();
  const auto& ws = weight.shape();
  const std::size_t batch = xs[0], channels = xs[1], out_ch = ws[0];
  if (ws[1] != channels || ws[2] != geo.kernel || ws[3] != geo.kernel || bias.value().size() != out_ch) {
    throw std::invalid_argument("conv2d: input " + shape_to_string(xs) + " incompatible with weight " +
                                shape_to_string(ws));
  }
  const Im2ColGeometry g{batch, channels, xs[2], xs[3], geo.kernel, geo.stride, geo.padding,
                         conv_out_size(xs[2], geo), conv_out_size(xs[3], geo)};
  const std::size_t K = channels * geo.kernel * geo.kernel;
  const std::size_t P = g.out_h * g.out_w;
  const std::size_t N = batch * P;

  auto cols = std::make_shared<AlignedVector<T>>(K * N);
  im2col(x.value().data(), g, cols->data());
  AlignedVector<T> y(out_ch * N);
  MatMap<T>(y.data(), out_ch, N).noalias() =
      ConstMatMap<T>(weight.value().data(), out_ch, K) * ConstMatMap<T>(cols->data(), K, N);
  Tensor<T> out(Shape{batch, out_ch, g.out_h, g.out_w});
  channel_major_to_batch_major(y.data(), batch, out_ch, P, out.data());
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t o = 0; o < out_ch; ++o) {
      T* plane = out.data() + (b * out_ch + o) * P;
      const T bo = bias.value()[o];
      for (std::size_t p = 0; p < P; ++p) plane[p] += bo;
    }

  return make_result<T>(std::move(out), {x, weight, bias}, [g, K, P, N, out_ch, cols](Node<T>& self) {
    AlignedVector<T> dy(out_ch * N);
    batch_major_to_channel_major(self.grad.data(), g.batch, out_ch, P, dy.data());
    ConstMatMap<T> dY(dy.data(), out_ch, N);
    Node<T>& px = *self.parents[0];
    Node<T>& pw = *self.parents[1];
    if (T* gw = grad_of(pw)) MatMap<T>(gw, out_ch, K).noalias() += dY * ConstMatMap<T>(cols->data(), K, N).transpose();
    if (T* gb = grad_of(*self.parents[2])) {
      for (std::size_t o = 0; o < out_ch; ++o) {
        const T* row = dy.data() + o * N;
        T acc = 0;
        for (std::size_t i = 0; i < N; ++i) acc += row[i];
        gb[o] += acc;
      }
    }
    if (T* gx = grad_of(px)) {
      AlignedVector<T> dcols(K * N);
      MatMap<T>(dcols.data(), K, N).noalias() = ConstMatMap<T>(pw.value.data(), out_ch, K).transpose() * dY;
      col2im(dcols.data(), g, gx);
    }
  });
}

template <typename T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, ConvGeometry geo) {
  require_rank(x.shape(), 4, "conv_transpose2d input");
  require_rank(weight.shape(), 4, "conv_transpose2d weight");
  const auto& xs = x.shape();
  const auto& ws = weight.shape();
  const std::size_t batch = xs[0], in_ch = xs[1], out_ch = ws[1];
  if (ws[0] != in_ch || ws[2] != geo.kernel || ws[3] != geo.kernel || bias.value().size() != out_ch) {
    throw std::invalid_argument("conv_transpose2d: input " + shape_to_string(xs) + " incompatible with weight " +
                                shape_to_string(ws));
  }
  const std::size_t oh = conv_transpose_out_size(xs[2], geo), ow = conv_transpose_out_size(xs[3], geo);
  // The adjoint view: a convolution from the (oh, ow) output back to (h, w).
  const Im2ColGeometry g{batch, out_ch, oh, ow, geo.kernel, geo.stride, geo.padding, xs[2], xs[3]};
  const std::size_t K = out_ch * geo.kernel * geo.kernel;
  const std::size_t P = xs[2] * xs[3];
  const std::size_t N = batch * P;

  auto xm = std::make_shared<AlignedVector<T>>(in_ch * N);
  batch_major_to_channel_major(x.value().data(), batch, in_ch, P, xm->data());
  AlignedVector<T> cols(K * N);
  MatMap<T>(cols.data(), K, N).noalias() =
      ConstMatMap<T>(weight.value().data(), in_ch, K).transpose() * ConstMatMap<T>(xm->data(), in_ch, N);
  Tensor<T> out(Shape{batch, out_ch, oh, ow});
  col2im(cols.data(), g, out.data());
  const std::size_t OP = oh * ow;
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t o = 0; o < out_ch; ++o) {
      T* plane = out.data() + (b * out_ch + o) * OP;
      const T bo = bias.value()[o];
      for (std::size_t p = 0; p < OP; ++p) plane[p] += bo;
    }

  return make_result<T>(std::move(out), {x, weight, bias}, [g, K, P, N, in_ch, out_ch, OP, xm](Node<T>& self) {
    AlignedVector<T> dcols(K * N);
    im2col(self.grad.data(), g, dcols.data());
    ConstMatMap<T> dC(dcols.data(), K, N);
    Node<T>& pw = *self.parents[1];
    if (T* gx = grad_of(*self.parents[0])) {
      AlignedVector<T> dx(in_ch * N);
      MatMap<T>(dx.data(), in_ch, N).noalias() = ConstMatMap<T>(pw.value.data(), in_ch, K) * dC;
      AlignedVector<T> back(in_ch * N);
      channel_major_to_batch_major(dx.data(), g.batch, in_ch, P, back.data());
      for (std::size_t i = 0; i < back.size(); ++i) gx[i] += back[i];
    }
    if (T* gw = grad_of(pw)) MatMap<T>(gw, in_ch, K).noalias() += ConstMatMap<T>(xm->data(), in_ch, N) * dC.transpose();
    if (T* gb = grad_of(*self.parents[2])) {
      for (std::size_t b = 0; b < g.batch; ++b)
        for (std::size_t o = 0; o < out_ch; ++o) {
          const T* plane = self.grad.data() + (b * out_ch + o) * OP;
          T acc = 0;
          for (std::size_t p = 0; p < OP; ++p) acc += plane[p];
          gb[o] += acc;
        }
    }
  });
}

template <typename T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, const Tensor<T>* running_mean,
                  const Tensor<T>* running_var, T eps, BatchStats<T>* observed) {
  const auto& s = x.shape();
  if (s.size() < 2) throw std::invalid_argument("batch_norm: expected (B, C, ...), got " + shape_to_string(s));
  const std::size_t batch = s[0], channels = s[1], plane = x.value().size() / (batch * channels);
  if (gamma.value().size() != channels || beta.value().size() != channels) {
    throw std::invalid_argument("batch_norm: " + std::to_string(channels) + " channels but affine size " +
                                std::to_string(gamma.value().size()));
  }
  const std::size_t count = batch * plane;
  const bool use_batch = running_mean == nullptr;
  if (use_batch && count < 2) throw std::invalid_argument("batch_norm: batch statistics need at least 2 values");

  Tensor<T> mu(Shape{channels}), inv_std(Shape{channels});
  const T* in = x.value().data();
  if (use_batch) {
    Tensor<T> unbiased(Shape{channels});
    for (std::size_t c = 0; c < channels; ++c) {
      T acc = 0;
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t p = 0; p < plane; ++p) acc += in[(b * channels + c) * plane + p];
      const T m = acc / static_cast<T>(count);
      T sq = 0;
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t p = 0; p < plane; ++p) {
          const T d = in[(b * channels + c) * plane + p] - m;
          sq += d * d;
        }
      mu[c] = m;
      inv_std[c] = T(1) / std::sqrt(sq / static_cast<T>(count) + eps);
      unbiased[c] = sq / static_cast<T>(count - 1);
    }
    if (observed) *observed = BatchStats<T>{mu, unbiased};
  } else {
    for (std::size_t c = 0; c < channels; ++c) {
      mu[c] = (*running_mean)[c];
      inv_std[c] = T(1) / std::sqrt((*running_var)[c] + eps);
    }
  }

  auto xhat = std::make_shared<Tensor<T>>(s);
  Tensor<T> out(s);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t off = (b * channels + c) * plane;
      for (std::size_t p = 0; p < plane; ++p) {
        const T h = (in[off + p] - mu[c]) * inv_std[c];
        (*xhat)[off + p] = h;
        out[off + p] = gamma.value()[c] * h + beta.value()[c];
      }
    }

  return make_result<T>(std::move(out), {x, gamma, beta},
                        [batch, channels, plane, count, use_batch, inv_std, xhat](Node<T>& self) {
                          Node<T>& pg = *self.parents[1];
                          T* gx = grad_of(*self.parents[0]);
                          T* gg = grad_of(pg);
                          T* gb = grad_of(*self.parents[2]);
                          const T* dy = self.grad.data();
                          for (std::size_t c = 0; c < channels; ++c) {
                            T sum_dy = 0, sum_dy_xhat = 0;
                            for (std::size_t b = 0; b < batch; ++b) {
                              const std::size_t off = (b * channels + c) * plane;
                              for (std::size_t p = 0; p < plane; ++p) {
                                sum_dy += dy[off + p];
                                sum_dy_xhat += dy[off + p] * (*xhat)[off + p];
                              }
                            }
                            if (gg) gg[c] += sum_dy_xhat;
                            if (gb) gb[c] += sum_dy;
                            if (!gx) continue;
                            const T scale_c = pg.value[c] * inv_std[c];
                            const T n = static_cast<T>(count);
                            for (std::size_t b = 0; b < batch; ++b) {
                              const std::size_t off = (b * channels + c) * plane;
                              for (std::size_t p = 0; p < plane; ++p) {
                                if (use_batch) {
                                  gx[off + p] += scale_c * (dy[off + p] - sum_dy / n - (*xhat)[off + p] * sum_dy_xhat / n);
                                } else {
                                  gx[off + p] += scale_c * dy[off + p];
                                }
                              }
                            }
                          }
                        });
}

#define IGN_INSTANTIATE_OPS(T)                                                                               \
  template Var<T> add(const Var<T>&, const Var<T>&);                                                          \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                                          \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                                          \
  template Var<T> scale(const Var<T>&, T);                                                                    \
  template Var<T> abs(const Var<T>&);                                                                         \
  template Var<T> square(const Var<T>&);                                                                      \
  template Var<T> tanh(const Var<T>&);                                                                        \
  template Var<T> relu(const Var<T>&);                                                                        \
  template Var<T> leaky_relu(const Var<T>&, T);                                                               \
  template Var<T> sum(const Var<T>&);                                                                         \
  template Var<T> mean(const Var<T>&);                                                                        \
  template Var<T> mean_per_sample(const Var<T>&);                                                             \
  template Var<T> reshape(const Var<T>&, Shape);                                                              \
  template Var<T> zero_pad2d(const Var<T>&, std::size_t);                                                     \
  template Var<T> crop2d(const Var<T>&, std::size_t);                                                         \
  template Var<T> linear(const Var<T>&, const Var<T>&, const Var<T>&);                                        \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, const Var<T>&, ConvGeometry);                          \
  template Var<T> conv_transpose2d(const Var<T>&, const Var<T>&, const Var<T>&, ConvGeometry);                \
  template Var<T> batch_norm(const Var<T>&, const Var<T>&, const Var<T>&, const Tensor<T>*, const Tensor<T>*, \
                             T, BatchStats<T>*);

IGN_INSTANTIATE_OPS(float)
IGN_INSTANTIATE_OPS(double)

}  // namespace ign::ag
