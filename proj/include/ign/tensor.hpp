#pragma once

#include <cmath>
#include <cstddef>
#include <new>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ign {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_to_string(const Shape& shape);

/// Cache-line aligned storage. Vectorized kernels peel differently depending
/// on the start address, so a fixed alignment keeps results bit-reproducible
/// from run to run.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }
  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

/// Dense row-major array with a fixed shape.
///
/// The shape is set at construction and never changes; operations that need a
/// different shape produce a new tensor.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0)) : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}
  Tensor(Shape shape, AlignedVector<T> data) : shape_(std::move(shape)), data_(std::move(data)) { check_payload(); }
  Tensor(Shape shape, const std::vector<T>& data) : shape_(std::move(shape)), data_(data.begin(), data.end()) {
    check_payload();
  }

  static Tensor scalar(T v) { return Tensor(Shape{1}, AlignedVector<T>{v}); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  const AlignedVector<T>& storage() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  T item() const {
    if (data_.size() != 1) throw std::logic_error("item() on a tensor of shape " + shape_to_string(shape_));
    return data_[0];
  }

  template <typename U>
  Tensor<U> cast() const {
    AlignedVector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  /// Elementwise equality including shape; NaNs compare unequal.
  bool operator==(const Tensor& other) const = default;

  bool all_finite() const {
    for (T v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

 private:
  void check_payload() const {
    if (data_.size() != shape_numel(shape_)) {
      throw std::invalid_argument("tensor payload of " + std::to_string(data_.size()) +
                                  " elements does not fit shape " + shape_to_string(shape_));
    }
  }

  Shape shape_;
  AlignedVector<T> data_;
};

/// A batch of samples: (batch, channels, height, width) for images or
/// (batch, features) for vectors. Both data and noise live in this type.
using Grid = Tensor<float>;

/// Per-sample shape of a batched tensor (drops the leading batch dimension).
inline Shape sample_shape(const Shape& batched) { return Shape(batched.begin() + 1, batched.end()); }

inline Shape with_batch(std::size_t batch, const Shape& sample) {
  Shape s{batch};
  s.insert(s.end(), sample.begin(), sample.end());
  return s;
}

/// Copies samples [first, first + count) out of a batch.
template <typename T>
Tensor<T> slice_batch(const Tensor<T>& batch, std::size_t first, std::size_t count);

/// Gathers the listed samples into a new batch, in order.
template <typename T>
Tensor<T> gather_batch(const Tensor<T>& batch, std::span<const std::size_t> indices);

/// Concatenates batches along the leading dimension.
template <typename T>
Tensor<T> concat_batch(std::span<const Tensor<T>> parts);

}  // namespace ign
