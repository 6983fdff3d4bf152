#pragma once

#include "ign/autograd.hpp"

// Differentiable primitives. All are templated on the scalar type and
// explicitly instantiated for float (training) and double (gradient oracle).
namespace ign::ag {

// -- elementwise ----------------------------------------------------------
template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> scale(const Var<T>& a, T factor);
template <typename T> Var<T> neg(const Var<T>& a) { return scale(a, T(-1)); }
template <typename T> Var<T> abs(const Var<T>& a);
template <typename T> Var<T> square(const Var<T>& a);
template <typename T> Var<T> tanh(const Var<T>& a);
template <typename T> Var<T> relu(const Var<T>& a);
template <typename T> Var<T> leaky_relu(const Var<T>& a, T slope);

// -- reductions (to a one-element tensor) ---------------------------------
template <typename T> Var<T> sum(const Var<T>& a);
template <typename T> Var<T> mean(const Var<T>& a);
/// (B, ...) -> (B): mean over everything but the leading dimension.
template <typename T> Var<T> mean_per_sample(const Var<T>& a);

// -- shape ---------------------------------------------------------------
template <typename T> Var<T> reshape(const Var<T>& a, Shape shape);
/// Zero-pads the two trailing (spatial) dims of a (B, C, H, W) tensor.
template <typename T> Var<T> zero_pad2d(const Var<T>& a, std::size_t pad);
/// Removes `crop` pixels from each border of the two trailing dims.
template <typename T> Var<T> crop2d(const Var<T>& a, std::size_t crop);

// -- layers --------------------------------------------------------------
/// x: (B, in), weight: (out, in), bias: (out) -> (B, out)
template <typename T> Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias);

struct ConvGeometry {
  std::size_t kernel = 4;
  std::size_t stride = 1;
  std::size_t padding = 0;
};

/// x: (B, C, H, W), weight: (O, C, k, k), bias: (O)
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, ConvGeometry g);

/// x: (B, C, H, W), weight: (C, O, k, k), bias: (O). Output side is
/// (H - 1) * stride - 2 * padding + kernel.
template <typename T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, ConvGeometry g);

std::size_t conv_out_size(std::size_t in, ConvGeometry g);
std::size_t conv_transpose_out_size(std::size_t in, ConvGeometry g);

/// Batch statistics observed by a training-mode batch norm, for running
/// averages.
template <typename T>
struct BatchStats {
  Tensor<T> mean;
  Tensor<T> unbiased_var;
};

/// Per-channel batch norm over (B, C, ...). With `running_mean` and
/// `running_var` null the batch statistics are used and reported through
/// `observed`; otherwise the given running statistics normalize the input.
template <typename T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, const Tensor<T>* running_mean,
                  const Tensor<T>* running_var, T eps, BatchStats<T>* observed);

}  // namespace ign::ag
