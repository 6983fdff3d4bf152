#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ign/tensor.hpp"

namespace ign {

enum class DatasetKind { idx, image_dir, toy2d };

std::string to_string(DatasetKind k);
DatasetKind dataset_kind_from_string(const std::string& s);

/// Error raised for unreadable or malformed input data. Carries the byte
/// offset of the problem when it is known.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what, std::size_t offset = npos)
      : std::runtime_error(what), offset_(offset) {}
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// 8-bit pixel p maps to p / 127.5 - 1.
inline float rescale_pixel(std::uint8_t p) { return float(p) / 127.5f - 1.0f; }
std::uint8_t quantize_pixel(float v);

/// Parses an unsigned-byte IDX image file (magic 0x00000803, dims N x H x W,
/// big-endian) into a (N, 1, H, W) grid in [-1, 1].
Grid parse_idx_images(const std::vector<std::uint8_t>& bytes);
Grid read_idx_images(const std::filesystem::path& path);

/// Labels file (magic 0x00000801).
std::vector<std::uint8_t> parse_idx_labels(const std::vector<std::uint8_t>& bytes);

std::vector<std::uint8_t> encode_idx_images(const std::vector<std::uint8_t>& pixels, std::size_t n, std::size_t h,
                                            std::size_t w);
std::vector<std::uint8_t> encode_idx_labels(const std::vector<std::uint8_t>& labels);

/// Decodes every raster in `dir` (sorted by file name), center-crops to a
/// square and resizes to `resolution`. Undecodable files are listed in
/// `skipped` instead of failing the load.
Grid load_image_dir(const std::filesystem::path& dir, std::size_t channels, std::size_t resolution,
                    std::vector<std::string>* skipped = nullptr);

/// Loads one image file the same way as load_image_dir; throws DataError.
Grid load_image(const std::filesystem::path& file, std::size_t channels, std::size_t resolution);

/// 8-mode Gaussian mixture on the unit circle with per-mode sigma 0.05.
constexpr std::size_t kToyModes = 8;
constexpr double kToyRadius = 1.0;
constexpr double kToySigma = 0.05;
std::array<std::array<double, 2>, kToyModes> toy_modes();
Grid toy2d(std::size_t n, std::uint64_t seed);

/// Procedurally drawn handwritten-style digits, 28 x 28 grayscale, 8-bit.
struct DigitSet {
  std::vector<std::uint8_t> pixels;  // n * 28 * 28, row-major
  std::vector<std::uint8_t> labels;
  std::size_t count = 0;
};
constexpr std::size_t kDigitSize = 28;
DigitSet synthetic_digits(std::size_t n, std::uint64_t seed);

/// Writes `<dir>/<prefix>-images-idx3-ubyte` and `-labels-idx1-ubyte`.
void write_digit_idx(const DigitSet& set, const std::filesystem::path& dir, const std::string& prefix);

/// Loads a dataset of the given kind. `toy_count` and `seed` apply to toy2d.
Grid ingest_dataset(const std::filesystem::path& path, DatasetKind kind, std::size_t channels,
                    std::size_t resolution, std::size_t toy_count, std::uint64_t seed,
                    std::vector<std::string>* skipped = nullptr);

/// Sample count and content hash of a dataset.
struct DatasetFingerprint {
  std::size_t count = 0;
  std::uint64_t hash = 0;
};
DatasetFingerprint dataset_fingerprint(const Grid& data);

}  // namespace ign
