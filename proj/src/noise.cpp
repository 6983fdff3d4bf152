#include "ign/noise.hpp"

#include <fftw3.h>

#include <cmath>
#include <memory>
#include <stdexcept>

namespace ign {

namespace {

struct PlanDeleter {
  void operator()(fftw_plan_s* p) const { fftw_destroy_plan(p); }
};
using Plan = std::unique_ptr<fftw_plan_s, PlanDeleter>;

template <typename T>
struct FftwDeleter {
  void operator()(T* p) const { fftw_free(p); }
};
template <typename T>
using FftwBuffer = std::unique_ptr<T[], FftwDeleter<T>>;

template <typename T>
FftwBuffer<T> fftw_buffer(std::size_t n) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * n));
  if (p == nullptr) throw std::bad_alloc();
  return FftwBuffer<T>(p);
}

void check_image_shape(const Shape& s) {
  if (s.size() != 3 || s[0] == 0 || s[1] == 0 || s[2] == 0) {
    throw std::invalid_argument("spectral noise needs (C, H, W) images, got " + shape_to_string(s));
  }
}

// Row `k` of a conjugate-symmetric column: true when it is the mirror of row
// H - k and carries no independent value.
bool mirrored_row(std::size_t k, std::size_t h) { return k > h / 2 && h - k < k; }
bool self_conjugate_row(std::size_t k, std::size_t h) { return k == 0 || (h % 2 == 0 && k == h / 2); }
bool symmetric_column(std::size_t c, std::size_t w) { return c == 0 || (w % 2 == 0 && c == w / 2); }

// Forward real-to-complex transform of one H x W plane, reused across calls.
class ForwardFft {
 public:
  ForwardFft(std::size_t h, std::size_t w)
      : h_(h), w_(w), in_(fftw_buffer<double>(h * w)), out_(fftw_buffer<fftw_complex>(h * (w / 2 + 1))) {
    plan_.reset(fftw_plan_dft_r2c_2d(int(h), int(w), in_.get(), out_.get(), FFTW_ESTIMATE));
  }
  const fftw_complex* run(const float* plane) {
    for (std::size_t i = 0; i < h_ * w_; ++i) in_[i] = plane[i];
    fftw_execute(plan_.get());
    return out_.get();
  }

 private:
  std::size_t h_, w_;
  FftwBuffer<double> in_;
  FftwBuffer<fftw_complex> out_;
  Plan plan_;
};

class InverseFft {
 public:
  InverseFft(std::size_t h, std::size_t w)
      : h_(h), w_(w), in_(fftw_buffer<fftw_complex>(h * (w / 2 + 1))), out_(fftw_buffer<double>(h * w)) {
    plan_.reset(fftw_plan_dft_c2r_2d(int(h), int(w), in_.get(), out_.get(), FFTW_ESTIMATE));
  }
  fftw_complex* input() { return in_.get(); }
  // c2r destroys its input; callers refill it before every run.
  void run(float* plane) {
    fftw_execute(plan_.get());
    const double norm = 1.0 / double(h_ * w_);
    for (std::size_t i = 0; i < h_ * w_; ++i) plane[i] = float(out_[i] * norm);
  }

 private:
  std::size_t h_, w_;
  FftwBuffer<fftw_complex> in_;
  FftwBuffer<double> out_;
  Plan plan_;
};

}  // namespace

Shape half_spectrum_shape(const Shape& image_shape) {
  check_image_shape(image_shape);
  return {image_shape[0], image_shape[1], image_shape[2] / 2 + 1};
}

void real_fft(const float* image, const Shape& image_shape, Tensor<double>& re, Tensor<double>& im) {
  const Shape hs = half_spectrum_shape(image_shape);
  const std::size_t c = image_shape[0], h = image_shape[1], w = image_shape[2], wh = hs[2];
  re = Tensor<double>(hs);
  im = Tensor<double>(hs);
  ForwardFft fft(h, w);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const fftw_complex* out = fft.run(image + ch * h * w);
    for (std::size_t i = 0; i < h * wh; ++i) {
      re[ch * h * wh + i] = out[i][0];
      im[ch * h * wh + i] = out[i][1];
    }
  }
}

SpectrumStats fit_spectrum(const Grid& images) {
  if (images.rank() != 4) throw std::invalid_argument("fit_spectrum needs a (N, C, H, W) batch");
  const std::size_t n = images.dim(0);
  if (n < 2) throw std::invalid_argument("fit_spectrum needs at least 2 images, got " + std::to_string(n));
  const Shape image_shape = sample_shape(images.shape());
  const Shape hs = half_spectrum_shape(image_shape);
  const std::size_t c = hs[0], h = hs[1], wh = hs[2], w = image_shape[2];

  SpectrumStats s{Tensor<double>(hs), Tensor<double>(hs), Tensor<double>(hs), Tensor<double>(hs), image_shape};
  // Welford accumulation keeps the zero-variance case exact.
  ForwardFft fft(h, w);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const fftw_complex* out = fft.run(images.data() + (i * c + ch) * h * w);
      for (std::size_t f = 0; f < h * wh; ++f) {
        const std::size_t k = ch * h * wh + f;
        const double dre = out[f][0] - s.mean_re[k];
        s.mean_re[k] += dre / double(i + 1);
        s.var_re[k] += dre * (out[f][0] - s.mean_re[k]);
        const double dim = out[f][1] - s.mean_im[k];
        s.mean_im[k] += dim / double(i + 1);
        s.var_im[k] += dim * (out[f][1] - s.mean_im[k]);
      }
    }
  }
  for (auto* v : {&s.var_re, &s.var_im}) {
    for (double& x : v->values()) x = std::max(0.0, x / double(n - 1));
  }
  return s;
}

Grid sample_spectral(const SpectrumStats& stats, std::size_t batch, std::mt19937_64& rng) {
  if (stats.empty()) throw std::invalid_argument("sample_spectral needs fitted statistics");
  const Shape& is = stats.image_shape;
  const std::size_t c = is[0], h = is[1], w = is[2], wh = w / 2 + 1;
  Grid out(with_batch(batch, is));
  InverseFft ifft(h, w);
  fftw_complex* spec = ifft.input();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t base = ch * h * wh;
      // Draw order: rows, then columns, real before imaginary; mirrored bins
      // draw nothing and self-conjugate bins draw only the real part.
      for (std::size_t k = 0; k < h; ++k) {
        for (std::size_t col = 0; col < wh; ++col) {
          const bool sym = symmetric_column(col, w);
          if (sym && mirrored_row(k, h)) continue;
          const std::size_t f = k * wh + col;
          std::normal_distribution<double> n01(0.0, 1.0);
          spec[f][0] = stats.mean_re[base + f] + std::sqrt(stats.var_re[base + f]) * n01(rng);
          if (sym && self_conjugate_row(k, h)) {
            spec[f][1] = 0.0;
          } else {
            std::normal_distribution<double> n01i(0.0, 1.0);
            spec[f][1] = stats.mean_im[base + f] + std::sqrt(stats.var_im[base + f]) * n01i(rng);
          }
        }
      }
      for (std::size_t col : {std::size_t{0}, w / 2}) {
        if (!symmetric_column(col, w)) continue;
        for (std::size_t k = 0; k < h; ++k) {
          if (!mirrored_row(k, h)) continue;
          const std::size_t src = (h - k) * wh + col, dst = k * wh + col;
          spec[dst][0] = spec[src][0];
          spec[dst][1] = -spec[src][1];
        }
      }
      ifft.run(out.data() + (b * c + ch) * h * w);
    }
  }
  return out;
}

Grid sample_spectral(const SpectrumStats& stats, std::size_t batch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_spectral(stats, batch, rng);
}

void fill_gaussian(Grid& out, std::mt19937_64& rng) {
  // A fresh distribution per call leaves no cached draw behind, so the
  // generator state alone determines the stream.
  std::normal_distribution<float> n01(0.0f, 1.0f);
  for (float& v : out.values()) v = n01(rng);
}

Grid sample_gaussian(const Shape& shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Grid out(shape);
  fill_gaussian(out, rng);
  return out;
}

}  // namespace ign
