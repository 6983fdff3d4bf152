#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ign/model.hpp"

namespace ign {

/// [f(x), f(f(x)), ..., f^n(x)] in inference mode. Needs n >= 1.
std::vector<Grid> apply_n(const ParamSet& params, const ArchSpec& arch, const Grid& input, std::size_t n);

/// For t_i = i / (steps - 1), rows z_t, f(z_t), f^2(z_t), f^3(z_t) with
/// z_t = (1 - t) z0 + t z1. Returns a (steps * 4, ...) batch in row-major
/// sheet order. z0 and z1 hold one sample each.
Grid interpolate(const ParamSet& params, const ArchSpec& arch, const Grid& z0, const Grid& z1, std::size_t steps);
constexpr std::size_t kInterpolationColumns = 4;

/// f((z_pos - z_neg) + z).
Grid latent_arithmetic(const ParamSet& params, const ArchSpec& arch, const Grid& z_pos, const Grid& z_neg,
                       const Grid& z);
/// Same with z_pos and z_neg replaced by the means of k latents each; `z`
/// may hold any batch.
Grid latent_arithmetic_mean(const ParamSet& params, const ArchSpec& arch, const Grid& pos_k, const Grid& neg_k,
                            const Grid& z);

enum class DegradationKind { none, noise, grayscale, sketch, mask_noise };
std::string to_string(DegradationKind k);
DegradationKind degradation_kind_from_string(const std::string& s);

struct MaskRect {
  std::size_t x = 0, y = 0, width = 0, height = 0;
};

struct DegradationSpec {
  DegradationKind kind = DegradationKind::none;
  /// Standard deviation of additive noise.
  double sigma = 0.15;
  /// Gaussian blur kernel size of the sketch; odd, >= 3.
  std::size_t kernel = 21;
  MaskRect mask;
  /// Standard deviation of the noise that fills the mask.
  double mask_sigma = 1.0;

  void validate(const Shape& image_shape) const;
};

/// Default standard deviation for a blur kernel size: 0.3 ((k - 1) / 2 - 1) + 0.8.
double default_blur_sigma(std::size_t kernel);

/// Normalized 1-D Gaussian weights exp(-i^2 / (2 sigma^2)), i = -(k-1)/2 .. (k-1)/2.
std::vector<double> gaussian_kernel(std::size_t kernel, double sigma);

/// Separable Gaussian blur of every (H, W) plane with mirror padding that
/// does not repeat the edge pixel.
Grid gaussian_blur(const Grid& x, std::size_t kernel);

/// Channel mean replicated to every channel.
Grid grayscale(const Grid& x);

/// g(x+1) / (blur(g(x+1)) + 1e-10) - 1.
Grid sketch(const Grid& x, std::size_t kernel);

/// Applies a degradation to (N, C, H, W) images in [-1, 1]. Never reads
/// model parameters.
Grid degrade(const Grid& x, const DegradationSpec& spec, std::uint64_t seed);

/// apply_n on a degraded input.
std::vector<Grid> project(const ParamSet& params, const ArchSpec& arch, const Grid& degraded, std::size_t n);

/// Lays out `cells` (N, C, H, W) row-major in `cols` columns with 2-pixel
/// white gutters and writes a lossless PNG. Throws on non-finite values.
void write_sheet(const std::filesystem::path& path, const Grid& cells, std::size_t cols);
constexpr int kGutter = 2;

/// Interleaves equally sized batches column-wise: row i is
/// parts[0][i], parts[1][i], ...
Grid interleave_columns(const std::vector<Grid>& parts);

}  // namespace ign
