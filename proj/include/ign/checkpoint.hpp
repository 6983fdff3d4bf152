#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "ign/tensor.hpp"

namespace ign {

/// Self-describing binary container.
///
/// Layout, little-endian throughout:
///   "IGNCKPT1"                      8-byte magic
///   u32 format version
///   str arch                        canonical architecture string
///   u64 step
///   str rng                         textual generator state
///   u32 count, then (str key, str value) metadata pairs
///   u32 count, then entries: str name, u8 dtype (1 = f32, 2 = f64),
///       u32 rank, u64 dims[rank], row-major payload
/// where str is a u32 byte length followed by the bytes.
struct Checkpoint {
  static constexpr std::uint32_t kFormatVersion = 1;

  std::uint32_t format_version = kFormatVersion;
  std::string arch;
  std::uint64_t step = 0;
  std::string rng_state;
  std::map<std::string, std::string> meta;
  std::map<std::string, Tensor<float>> f32;
  std::map<std::string, Tensor<double>> f64;

  bool operator==(const Checkpoint&) const = default;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string encode_checkpoint(const Checkpoint& c);
Checkpoint decode_checkpoint(const std::string& bytes);

/// Writes through a temporary file and a rename, so a crash never leaves a
/// truncated checkpoint under the final name.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Entries whose names start with `prefix`, with the prefix removed.
template <typename T>
std::map<std::string, Tensor<T>> entries_with_prefix(const std::map<std::string, Tensor<T>>& all,
                                                     const std::string& prefix) {
  std::map<std::string, Tensor<T>> out;
  for (auto it = all.lower_bound(prefix); it != all.end() && it->first.starts_with(prefix); ++it) {
    out.emplace(it->first.substr(prefix.size()), it->second);
  }
  return out;
}

}  // namespace ign
