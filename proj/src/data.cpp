#include "ign/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "ign/param_set.hpp"

namespace ign {

std::string to_string(DatasetKind k) {
  switch (k) {
    case DatasetKind::idx: return "idx";
    case DatasetKind::image_dir: return "image_dir";
    case DatasetKind::toy2d: return "toy2d";
  }
  return "?";
}

DatasetKind dataset_kind_from_string(const std::string& s) {
  if (s == "idx") return DatasetKind::idx;
  if (s == "image_dir") return DatasetKind::image_dir;
  if (s == "toy2d") return DatasetKind::toy2d;
  throw std::invalid_argument("unknown dataset kind '" + s + "' (expected idx, image_dir or toy2d)");
}

std::uint8_t quantize_pixel(float v) {
  const float p = std::round((std::clamp(v, -1.0f, 1.0f) + 1.0f) * 127.5f);
  return static_cast<std::uint8_t>(p);
}

namespace {

std::uint32_t read_be32(const std::vector<std::uint8_t>& b, std::size_t at) {
  if (at + 4 > b.size()) {
    throw DataError("IDX: truncated header at byte offset " + std::to_string(at), at);
  }
  return (std::uint32_t(b[at]) << 24) | (std::uint32_t(b[at + 1]) << 16) | (std::uint32_t(b[at + 2]) << 8) |
         std::uint32_t(b[at + 3]);
}

void put_be32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) b.push_back(std::uint8_t(v >> s));
}

// Validates the magic word and returns the dimension sizes.
std::vector<std::size_t> idx_header(const std::vector<std::uint8_t>& b, std::uint8_t ndims) {
  const std::uint32_t magic = read_be32(b, 0);
  const std::uint32_t expected = 0x00000800u | ndims;
  if (magic != expected) {
    // Report the first byte that differs from the expected magic.
    std::size_t off = 0;
    for (; off < 4; ++off) {
      if (b[off] != std::uint8_t(expected >> (24 - 8 * off))) break;
    }
    std::ostringstream os;
    os << "IDX: bad magic 0x" << std::hex << magic << " (expected 0x" << expected << ") at byte offset " << std::dec
       << off;
    throw DataError(os.str(), off);
  }
  std::vector<std::size_t> dims;
  for (std::size_t i = 0; i < ndims; ++i) dims.push_back(read_be32(b, 4 + 4 * i));
  const std::size_t header = 4 + 4 * std::size_t(ndims);
  std::size_t payload = 1;
  for (auto d : dims) payload *= d;
  if (b.size() != header + payload) {
    const std::size_t at = std::min(b.size(), header + payload);
    throw DataError("IDX: payload of " + std::to_string(b.size() - header) + " bytes, expected " +
                        std::to_string(payload) + " (byte offset " + std::to_string(at) + ")",
                    at);
  }
  return dims;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw DataError("cannot write " + path.string());
}

// Converts a decoded 8-bit image to (C, R, R) in [-1, 1], RGB channel order.
void mat_to_grid(const cv::Mat& decoded, std::size_t channels, std::size_t resolution, float* dst) {
  cv::Mat img;
  if (channels == 1) {
    if (decoded.channels() == 1) img = decoded;
    else cv::cvtColor(decoded, img, decoded.channels() == 4 ? cv::COLOR_BGRA2GRAY : cv::COLOR_BGR2GRAY);
  } else {
    if (decoded.channels() == 1) cv::cvtColor(decoded, img, cv::COLOR_GRAY2RGB);
    else cv::cvtColor(decoded, img, decoded.channels() == 4 ? cv::COLOR_BGRA2RGB : cv::COLOR_BGR2RGB);
  }
  const int side = std::min(img.rows, img.cols);
  const cv::Rect crop((img.cols - side) / 2, (img.rows - side) / 2, side, side);
  cv::Mat square = img(crop), sized;
  const int r = int(resolution);
  cv::resize(square, sized, cv::Size(r, r), 0, 0, side > r ? cv::INTER_AREA : cv::INTER_LINEAR);
  for (int y = 0; y < r; ++y) {
    const std::uint8_t* row = sized.ptr<std::uint8_t>(y);
    for (int x = 0; x < r; ++x) {
      for (std::size_t c = 0; c < channels; ++c) {
        dst[(c * resolution + std::size_t(y)) * resolution + std::size_t(x)] = rescale_pixel(row[x * channels + c]);
      }
    }
  }
}

cv::Mat decode(const std::filesystem::path& file) {
  if (file.extension() == ".idx" || file.extension() == ".ubyte") return {};
  return cv::imread(file.string(), cv::IMREAD_UNCHANGED);
}

cv::Mat to_8bit(const cv::Mat& m) {
  if (m.depth() == CV_8U) return m;
  cv::Mat out;
  m.convertTo(out, CV_8U, m.depth() == CV_16U ? 1.0 / 257.0 : 1.0);
  return out;
}

}  // namespace

Grid parse_idx_images(const std::vector<std::uint8_t>& bytes) {
  const auto dims = idx_header(bytes, 3);
  const std::size_t n = dims[0], h = dims[1], w = dims[2];
  Grid out({n, 1, h, w});
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = rescale_pixel(bytes[16 + i]);
  return out;
}

Grid read_idx_images(const std::filesystem::path& path) {
  try {
    return parse_idx_images(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what(), e.offset());
  }
}

std::vector<std::uint8_t> parse_idx_labels(const std::vector<std::uint8_t>& bytes) {
  idx_header(bytes, 1);
  return std::vector<std::uint8_t>(bytes.begin() + 8, bytes.end());
}

std::vector<std::uint8_t> encode_idx_images(const std::vector<std::uint8_t>& pixels, std::size_t n, std::size_t h,
                                            std::size_t w) {
  if (pixels.size() != n * h * w) throw std::invalid_argument("IDX: pixel count does not match dimensions");
  std::vector<std::uint8_t> b;
  b.reserve(16 + pixels.size());
  put_be32(b, 0x00000803u);
  put_be32(b, std::uint32_t(n));
  put_be32(b, std::uint32_t(h));
  put_be32(b, std::uint32_t(w));
  b.insert(b.end(), pixels.begin(), pixels.end());
  return b;
}

std::vector<std::uint8_t> encode_idx_labels(const std::vector<std::uint8_t>& labels) {
  std::vector<std::uint8_t> b;
  put_be32(b, 0x00000801u);
  put_be32(b, std::uint32_t(labels.size()));
  b.insert(b.end(), labels.begin(), labels.end());
  return b;
}

Grid load_image(const std::filesystem::path& file, std::size_t channels, std::size_t resolution) {
  if (channels != 1 && channels != 3) throw std::invalid_argument("channels must be 1 or 3");
  cv::Mat m = decode(file);
  if (m.empty()) throw DataError("cannot decode image " + file.string());
  Grid out({1, channels, resolution, resolution});
  mat_to_grid(to_8bit(m), channels, resolution, out.data());
  return out;
}

Grid load_image_dir(const std::filesystem::path& dir, std::size_t channels, std::size_t resolution,
                    std::vector<std::string>* skipped) {
  if (!std::filesystem::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Grid> images;
  for (const auto& f : files) {
    try {
      images.push_back(load_image(f, channels, resolution));
    } catch (const DataError&) {
      if (skipped != nullptr) skipped->push_back(f.string());
    }
  }
  if (images.empty()) throw DataError("no decodable images in " + dir.string());
  return concat_batch<float>(images);
}

std::array<std::array<double, 2>, kToyModes> toy_modes() {
  std::array<std::array<double, 2>, kToyModes> m{};
  for (std::size_t k = 0; k < kToyModes; ++k) {
    const double a = 2.0 * std::numbers::pi * double(k) / double(kToyModes);
    m[k] = {kToyRadius * std::cos(a), kToyRadius * std::sin(a)};
  }
  return m;
}

Grid toy2d(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, kToyModes - 1);
  const auto modes = toy_modes();
  Grid out({n, 2});
  for (std::size_t i = 0; i < n; ++i) {
    const auto& m = modes[pick(rng)];
    std::normal_distribution<double> g(0.0, kToySigma);
    const double dx = g(rng);
    const double dy = g(rng);
    out[2 * i] = float(m[0] + dx);
    out[2 * i + 1] = float(m[1] + dy);
  }
  return out;
}

namespace {

using Stroke = std::vector<cv::Point2d>;

Stroke arc(double cx, double cy, double rx, double ry, double from_deg, double to_deg) {
  Stroke s;
  const int steps = 24;
  for (int i = 0; i <= steps; ++i) {
    const double a = (from_deg + (to_deg - from_deg) * i / steps) * std::numbers::pi / 180.0;
    s.emplace_back(cx + rx * std::cos(a), cy + ry * std::sin(a));
  }
  return s;
}

Stroke line(std::initializer_list<cv::Point2d> pts) { return Stroke(pts); }

Stroke join(Stroke a, const Stroke& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// Unit-square strokes per digit; y grows downward.
std::vector<Stroke> digit_strokes(int d) {
  switch (d) {
    case 0: return {arc(0.5, 0.5, 0.2, 0.32, 0, 360)};
    case 1: return {line({{0.40, 0.28}, {0.52, 0.18}, {0.52, 0.82}})};
    case 2: return {join(arc(0.5, 0.35, 0.18, 0.16, 180, 390), line({{0.30, 0.82}, {0.72, 0.82}}))};
    case 3: return {arc(0.5, 0.34, 0.17, 0.15, 200, 450), arc(0.5, 0.65, 0.19, 0.17, 270, 520)};
    case 4: return {line({{0.62, 0.82}, {0.62, 0.18}, {0.30, 0.62}, {0.74, 0.62}})};
    case 5: return {join(line({{0.68, 0.18}, {0.38, 0.18}, {0.366, 0.50}}), arc(0.5, 0.63, 0.19, 0.18, 225, 500))};
    case 6: return {line({{0.64, 0.18}, {0.36, 0.56}}), arc(0.5, 0.64, 0.17, 0.18, 0, 360)};
    case 7: return {line({{0.30, 0.18}, {0.70, 0.18}, {0.44, 0.82}})};
    case 8: return {arc(0.5, 0.34, 0.15, 0.15, 0, 360), arc(0.5, 0.66, 0.18, 0.17, 0, 360)};
    default: return {arc(0.5, 0.36, 0.17, 0.17, 0, 360), line({{0.67, 0.36}, {0.60, 0.82}})};
  }
}

}  // namespace

DigitSet synthetic_digits(std::size_t n, std::uint64_t seed) {
  constexpr int kScale = 4;
  constexpr int kCanvas = int(kDigitSize) * kScale;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> label(0, 9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  DigitSet set;
  set.count = n;
  set.pixels.resize(n * kDigitSize * kDigitSize);
  set.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int d = label(rng);
    const double rot = 0.2 * u(rng);
    const double shear = 0.25 * u(rng);
    const double scale = 0.92 + 0.1 * u(rng);
    const double tx = 0.06 * u(rng), ty = 0.05 * u(rng);
    const int thickness = int(std::lround(kScale * (2.2 + 0.8 * u(rng))));
    cv::Mat canvas = cv::Mat::zeros(kCanvas, kCanvas, CV_8U);
    for (const auto& stroke : digit_strokes(d)) {
      std::vector<cv::Point> pts;
      for (const auto& p : stroke) {
        const double x0 = p.x - 0.5 + shear * (p.y - 0.5), y0 = p.y - 0.5;
        const double x = scale * (std::cos(rot) * x0 - std::sin(rot) * y0) + 0.5 + tx;
        const double y = scale * (std::sin(rot) * x0 + std::cos(rot) * y0) + 0.5 + ty;
        pts.emplace_back(int(std::lround(x * kCanvas)), int(std::lround(y * kCanvas)));
      }
      cv::polylines(canvas, pts, false, cv::Scalar(255), thickness, cv::LINE_AA);
    }
    cv::Mat small;
    cv::resize(canvas, small, cv::Size(int(kDigitSize), int(kDigitSize)), 0, 0, cv::INTER_AREA);
    std::copy(small.datastart, small.dataend, set.pixels.begin() + std::ptrdiff_t(i * kDigitSize * kDigitSize));
    set.labels[i] = std::uint8_t(d);
  }
  return set;
}

void write_digit_idx(const DigitSet& set, const std::filesystem::path& dir, const std::string& prefix) {
  std::filesystem::create_directories(dir);
  write_file(dir / (prefix + "-images-idx3-ubyte"), encode_idx_images(set.pixels, set.count, kDigitSize, kDigitSize));
  write_file(dir / (prefix + "-labels-idx1-ubyte"), encode_idx_labels(set.labels));
}

Grid ingest_dataset(const std::filesystem::path& path, DatasetKind kind, std::size_t channels,
                    std::size_t resolution, std::size_t toy_count, std::uint64_t seed,
                    std::vector<std::string>* skipped) {
  switch (kind) {
    case DatasetKind::toy2d: return toy2d(toy_count, seed);
    case DatasetKind::idx: {
      if (!std::filesystem::exists(path)) throw DataError("dataset path does not exist: " + path.string());
      Grid g = read_idx_images(path);
      if (channels != 1) throw DataError("IDX data has 1 channel, config asks for " + std::to_string(channels));
      if (resolution != g.dim(2) || resolution != g.dim(3)) {
        throw DataError("IDX images are " + std::to_string(g.dim(2)) + "x" + std::to_string(g.dim(3)) +
                        ", config resolution is " + std::to_string(resolution));
      }
      return g;
    }
    case DatasetKind::image_dir:
      if (!std::filesystem::exists(path)) throw DataError("dataset path does not exist: " + path.string());
      return load_image_dir(path, channels, resolution, skipped);
  }
  throw std::logic_error("unreachable");
}

DatasetFingerprint dataset_fingerprint(const Grid& data) {
  DatasetFingerprint fp;
  fp.count = data.rank() > 0 ? data.dim(0) : 0;
  fp.hash = fnv1a(data.data(), data.size() * sizeof(float));
  return fp;
}

}  // namespace ign
