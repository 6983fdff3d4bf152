#include "ign/tensor.hpp"

#include <algorithm>
#include <sstream>

namespace ign {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

template <typename T>
Tensor<T> slice_batch(const Tensor<T>& batch, std::size_t first, std::size_t count) {
  if (batch.rank() == 0 || first + count > batch.dim(0)) {
    throw std::out_of_range("slice [" + std::to_string(first) + ", " + std::to_string(first + count) +
                            ") outside batch of shape " + shape_to_string(batch.shape()));
  }
  const Shape sample = sample_shape(batch.shape());
  const std::size_t stride = shape_numel(sample);
  AlignedVector<T> out(batch.data() + first * stride, batch.data() + (first + count) * stride);
  return Tensor<T>(with_batch(count, sample), std::move(out));
}

template <typename T>
Tensor<T> gather_batch(const Tensor<T>& batch, std::span<const std::size_t> indices) {
  const Shape sample = sample_shape(batch.shape());
  const std::size_t stride = shape_numel(sample);
  AlignedVector<T> out;
  out.reserve(indices.size() * stride);
  for (std::size_t idx : indices) {
    if (idx >= batch.dim(0)) throw std::out_of_range("gather index " + std::to_string(idx) + " out of range");
    out.insert(out.end(), batch.data() + idx * stride, batch.data() + (idx + 1) * stride);
  }
  return Tensor<T>(with_batch(indices.size(), sample), std::move(out));
}

template <typename T>
Tensor<T> concat_batch(std::span<const Tensor<T>> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_batch of nothing");
  const Shape sample = sample_shape(parts.front().shape());
  AlignedVector<T> out;
  std::size_t n = 0;
  for (const auto& p : parts) {
    if (sample_shape(p.shape()) != sample) {
      throw std::invalid_argument("concat_batch sample shape mismatch: " + shape_to_string(p.shape()));
    }
    out.insert(out.end(), p.values().begin(), p.values().end());
    n += p.dim(0);
  }
  return Tensor<T>(with_batch(n, sample), std::move(out));
}

template Tensor<float> slice_batch(const Tensor<float>&, std::size_t, std::size_t);
template Tensor<double> slice_batch(const Tensor<double>&, std::size_t, std::size_t);
template Tensor<float> gather_batch(const Tensor<float>&, std::span<const std::size_t>);
template Tensor<double> gather_batch(const Tensor<double>&, std::span<const std::size_t>);
template Tensor<float> concat_batch(std::span<const Tensor<float>>);
template Tensor<double> concat_batch(std::span<const Tensor<double>>);

}  // namespace ign
