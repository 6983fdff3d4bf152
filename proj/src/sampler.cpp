#include "ign/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "ign/data.hpp"

namespace ign {

std::vector<Grid> apply_n(const ParamSet& params, const ArchSpec& arch, const Grid& input, std::size_t n) {
  if (n < 1) throw std::invalid_argument("apply_n needs n >= 1");
  std::vector<Grid> out;
  out.reserve(n);
  const Grid* prev = &input;
  for (std::size_t k = 0; k < n; ++k) {
    out.push_back(forward(params, arch, *prev, Mode::eval));
    prev = &out.back();
  }
  return out;
}

Grid interpolate(const ParamSet& params, const ArchSpec& arch, const Grid& z0, const Grid& z1, std::size_t steps) {
  if (steps < 2) throw std::invalid_argument("interpolate needs steps >= 2");
  if (z0.shape() != z1.shape() || z0.dim(0) != 1) {
    throw std::invalid_argument("interpolate needs two single-sample latents of equal shape");
  }
  // Row by row, so every row equals apply_n on its own latent bit for bit.
  const std::size_t m = z0.size();
  std::vector<Grid> cols(kInterpolationColumns, Grid(with_batch(steps, sample_shape(z0.shape()))));
  for (std::size_t i = 0; i < steps; ++i) {
    const float t = float(double(i) / double(steps - 1));
    Grid zt(z0.shape());
    for (std::size_t j = 0; j < m; ++j) zt[j] = (1.0f - t) * z0[j] + t * z1[j];
    const auto seq = apply_n(params, arch, zt, kInterpolationColumns - 1);
    std::copy_n(zt.data(), m, cols[0].data() + i * m);
    for (std::size_t k = 0; k < seq.size(); ++k) std::copy_n(seq[k].data(), m, cols[k + 1].data() + i * m);
  }
  return interleave_columns(cols);
}

namespace {
Grid combine(const Grid& pos, const Grid& neg, const Grid& z) {
  Grid out(z.shape());
  const std::size_t m = pos.size();
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = (pos[i % m] - neg[i % m]) + z[i];
  return out;
}

Grid batch_mean(const Grid& k) {
  Grid out(with_batch(1, sample_shape(k.shape())));
  const std::size_t m = out.size(), n = k.dim(0);
  for (std::size_t j = 0; j < m; ++j) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += k[i * m + j];
    out[j] = float(s / double(n));
  }
  return out;
}
}  // namespace

Grid latent_arithmetic(const ParamSet& params, const ArchSpec& arch, const Grid& z_pos, const Grid& z_neg,
                       const Grid& z) {
  if (z_pos.shape() != z_neg.shape() || z_pos.shape() != z.shape()) {
    throw std::invalid_argument("latent arithmetic needs latents of one shape");
  }
  return forward(params, arch, combine(z_pos, z_neg, z), Mode::eval);
}

Grid latent_arithmetic_mean(const ParamSet& params, const ArchSpec& arch, const Grid& pos_k, const Grid& neg_k,
                            const Grid& z) {
  if (pos_k.rank() < 2 || sample_shape(pos_k.shape()) != sample_shape(z.shape()) ||
      sample_shape(neg_k.shape()) != sample_shape(z.shape())) {
    throw std::invalid_argument("latent arithmetic needs latents of one sample shape");
  }
  return forward(params, arch, combine(batch_mean(pos_k), batch_mean(neg_k), z), Mode::eval);
}

std::string to_string(DegradationKind k) {
  switch (k) {
    case DegradationKind::none: return "none";
    case DegradationKind::noise: return "noise";
    case DegradationKind::grayscale: return "grayscale";
    case DegradationKind::sketch: return "sketch";
    case DegradationKind::mask_noise: return "mask_noise";
  }
  return "?";
}

DegradationKind degradation_kind_from_string(const std::string& s) {
  for (auto k : {DegradationKind::none, DegradationKind::noise, DegradationKind::grayscale, DegradationKind::sketch,
                 DegradationKind::mask_noise}) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown degradation '" + s + "' (expected none, noise, grayscale, sketch or mask_noise)");
}

void DegradationSpec::validate(const Shape& image_shape) const {
  if (!(sigma >= 0) || !(mask_sigma >= 0)) throw std::invalid_argument("degradation sigma must be >= 0");
  if (kind == DegradationKind::sketch && (kernel < 3 || kernel % 2 == 0)) {
    throw std::invalid_argument("blur kernel must be odd and >= 3, got " + std::to_string(kernel));
  }
  if (kind == DegradationKind::mask_noise) {
    if (image_shape.size() != 3) throw std::invalid_argument("mask needs (C, H, W) images");
    if (mask.width == 0 || mask.height == 0 || mask.x + mask.width > image_shape[2] ||
        mask.y + mask.height > image_shape[1]) {
      throw std::invalid_argument("mask rectangle lies outside the " + std::to_string(image_shape[1]) + "x" +
                                  std::to_string(image_shape[2]) + " image");
    }
  }
}

double default_blur_sigma(std::size_t kernel) { return 0.3 * ((double(kernel) - 1.0) * 0.5 - 1.0) + 0.8; }

std::vector<double> gaussian_kernel(std::size_t kernel, double sigma) {
  const cv::Mat k = cv::getGaussianKernel(int(kernel), sigma, CV_64F);
  return std::vector<double>(k.begin<double>(), k.end<double>());
}

namespace {
void check_images(const Grid& x) {
  if (x.rank() != 4) throw std::invalid_argument("degradations need (N, C, H, W) images, got " + shape_to_string(x.shape()));
}

// Blurs one plane in double precision.
cv::Mat blur_plane(const cv::Mat& plane, const std::vector<double>& k) {
  const cv::Mat kern(int(k.size()), 1, CV_64F, const_cast<double*>(k.data()));
  cv::Mat out;
  cv::sepFilter2D(plane, out, CV_64F, kern, kern, cv::Point(-1, -1), 0.0, cv::BORDER_REFLECT_101);
  return out;
}
}  // namespace

Grid gaussian_blur(const Grid& x, std::size_t kernel) {
  check_images(x);
  if (kernel < 3 || kernel % 2 == 0) throw std::invalid_argument("blur kernel must be odd and >= 3");
  const std::size_t h = x.dim(2), w = x.dim(3);
  if (kernel / 2 >= std::min(h, w)) throw std::invalid_argument("blur kernel larger than the image");
  const auto k = gaussian_kernel(kernel, default_blur_sigma(kernel));
  Grid out(x.shape());
  for (std::size_t p = 0; p < x.dim(0) * x.dim(1); ++p) {
    cv::Mat plane(int(h), int(w), CV_64F);
    for (std::size_t i = 0; i < h * w; ++i) plane.at<double>(int(i)) = x[p * h * w + i];
    const cv::Mat b = blur_plane(plane, k);
    for (std::size_t i = 0; i < h * w; ++i) out[p * h * w + i] = float(b.at<double>(int(i)));
  }
  return out;
}

Grid grayscale(const Grid& x) {
  check_images(x);
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  Grid out(x.shape());
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t i = 0; i < hw; ++i) {
      // Double accumulation keeps the mean of equal values exact.
      double s = 0;
      for (std::size_t ch = 0; ch < c; ++ch) s += x[(b * c + ch) * hw + i];
      const float m = float(s / double(c));
      for (std::size_t ch = 0; ch < c; ++ch) out[(b * c + ch) * hw + i] = m;
    }
  }
  return out;
}

Grid sketch(const Grid& x, std::size_t kernel) {
  Grid shifted(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) shifted[i] = x[i] + 1.0f;
  const Grid g = grayscale(shifted);
  const Grid blurred = gaussian_blur(g, kernel);
  Grid out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = float(double(g[i]) / (double(blurred[i]) + 1e-10) - 1.0);
  return out;
}

Grid degrade(const Grid& x, const DegradationSpec& spec, std::uint64_t seed) {
  check_images(x);
  spec.validate(sample_shape(x.shape()));
  std::mt19937_64 rng(seed);
  switch (spec.kind) {
    case DegradationKind::none: return x;
    case DegradationKind::noise: {
      Grid out = x;
      std::normal_distribution<float> n(0.0f, float(spec.sigma));
      for (float& v : out.values()) v += n(rng);
      return out;
    }
    case DegradationKind::grayscale: return grayscale(x);
    case DegradationKind::sketch: return sketch(x, spec.kernel);
    case DegradationKind::mask_noise: {
      Grid out = x;
      std::normal_distribution<float> n(0.0f, float(spec.mask_sigma));
      const std::size_t c = x.dim(1), h = x.dim(2), w = x.dim(3);
      for (std::size_t p = 0; p < x.dim(0) * c; ++p) {
        for (std::size_t y = spec.mask.y; y < spec.mask.y + spec.mask.height; ++y) {
          for (std::size_t xx = spec.mask.x; xx < spec.mask.x + spec.mask.width; ++xx) out[(p * h + y) * w + xx] = n(rng);
        }
      }
      return out;
    }
  }
  throw std::logic_error("unreachable");
}

std::vector<Grid> project(const ParamSet& params, const ArchSpec& arch, const Grid& degraded, std::size_t n) {
  return apply_n(params, arch, degraded, n);
}

Grid interleave_columns(const std::vector<Grid>& parts) {
  if (parts.empty()) throw std::invalid_argument("nothing to interleave");
  const Shape s = parts[0].shape();
  for (const auto& p : parts) {
    if (p.shape() != s) throw std::invalid_argument("interleaved batches must share a shape");
  }
  const std::size_t rows = s[0], m = shape_numel(sample_shape(s)), cols = parts.size();
  Grid out(with_batch(rows * cols, sample_shape(s)));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      std::copy_n(parts[c].data() + r * m, m, out.data() + (r * cols + c) * m);
    }
  }
  return out;
}

void write_sheet(const std::filesystem::path& path, const Grid& cells, std::size_t cols) {
  check_images(cells);
  if (!cells.all_finite()) throw std::runtime_error("refusing to render non-finite values to " + path.string());
  if (cols == 0) throw std::invalid_argument("sheet needs at least one column");
  const std::size_t n = cells.dim(0), c = cells.dim(1), h = cells.dim(2), w = cells.dim(3);
  if (c != 1 && c != 3) throw std::invalid_argument("sheets need 1 or 3 channels");
  const std::size_t rows = (n + cols - 1) / cols;
  const int H = int(rows * h) + kGutter * int(rows + 1);
  const int W = int(cols * w) + kGutter * int(cols + 1);
  cv::Mat sheet(H, W, CV_8UC3, cv::Scalar(255, 255, 255));
  for (std::size_t i = 0; i < n; ++i) {
    const int y0 = kGutter + int((i / cols) * (h + kGutter));
    const int x0 = kGutter + int((i % cols) * (w + kGutter));
    for (std::size_t y = 0; y < h; ++y) {
      auto* row = sheet.ptr<cv::Vec3b>(y0 + int(y));
      for (std::size_t x = 0; x < w; ++x) {
        cv::Vec3b px;
        for (int ch = 0; ch < 3; ++ch) {
          const std::size_t src = c == 1 ? 0 : std::size_t(2 - ch);  // RGB -> BGR
          px[ch] = quantize_pixel(cells[((i * c + src) * h + y) * w + x]);
        }
        row[x0 + int(x)] = px;
      }
    }
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), sheet)) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace ign
