#pragma once

#include <cstdint>
#include <random>

#include "ign/tensor.hpp"

namespace ign {

/// Per-frequency moments of the real FFT of (C, H, W) images. Every array
/// has the half-spectrum shape (C, H, W/2 + 1).
struct SpectrumStats {
  Tensor<double> mean_re;
  Tensor<double> var_re;
  Tensor<double> mean_im;
  Tensor<double> var_im;
  /// Image shape (C, H, W) the statistics were fitted on.
  Shape image_shape;

  bool empty() const noexcept { return image_shape.empty(); }
  bool operator==(const SpectrumStats&) const = default;
};

/// Shape (C, H, W/2 + 1) of the half spectrum of (C, H, W) images.
Shape half_spectrum_shape(const Shape& image_shape);

/// Unnormalized forward real FFT of one (C, H, W) image per channel,
/// returned as real and imaginary half-spectrum planes.
void real_fft(const float* image, const Shape& image_shape, Tensor<double>& re, Tensor<double>& im);

/// Mean and unbiased variance of every FFT coefficient over a (N, C, H, W)
/// batch. Needs N >= 2.
SpectrumStats fit_spectrum(const Grid& images);

/// Draws `batch` images whose half-spectrum coefficients are independent
/// Gaussians with the fitted moments. Columns 0 and W/2 are completed by
/// conjugate symmetry and self-conjugate bins get a zero imaginary part, so
/// the inverse transform is exactly real.
Grid sample_spectral(const SpectrumStats& stats, std::size_t batch, std::mt19937_64& rng);
Grid sample_spectral(const SpectrumStats& stats, std::size_t batch, std::uint64_t seed);

/// I.i.d. standard normal entries.
void fill_gaussian(Grid& out, std::mt19937_64& rng);
Grid sample_gaussian(const Shape& shape, std::uint64_t seed);

}  // namespace ign
