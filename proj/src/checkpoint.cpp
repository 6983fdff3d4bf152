#include "ign/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace ign {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'I', 'G', 'N', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint8_t kDtypeF32 = 1;
constexpr std::uint8_t kDtypeF64 = 2;

class Writer {
 public:
  template <typename T>
  void pod(T v) {
    out_.append(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void str(const std::string& s) {
    pod(std::uint32_t(s.size()));
    out_.append(s);
  }
  void raw(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  template <typename T>
  void tensor(const std::string& name, std::uint8_t dtype, const Tensor<T>& t) {
    str(name);
    pod(dtype);
    pod(std::uint32_t(t.rank()));
    for (auto d : t.shape()) pod(std::uint64_t(d));
    raw(t.data(), t.size() * sizeof(T));
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}
  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) {
      throw CheckpointError("checkpoint truncated at byte offset " + std::to_string(pos_) + " (needed " +
                            std::to_string(n) + " more bytes)");
    }
  }
  template <typename T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint32_t>();
    need(n);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  template <typename T>
  Tensor<T> payload(Shape shape) {
    const std::size_t n = shape_numel(shape);
    need(n * sizeof(T));
    std::vector<T> data(n);
    std::memcpy(data.data(), in_.data() + pos_, n * sizeof(T));
    pos_ += n * sizeof(T);
    return Tensor<T>(std::move(shape), std::move(data));
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == in_.size(); }

 private:
  const std::string& in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const Checkpoint& c) {
  Writer w;
  w.raw(kMagic, sizeof(kMagic));
  w.pod(c.format_version);
  w.str(c.arch);
  w.pod(c.step);
  w.str(c.rng_state);
  w.pod(std::uint32_t(c.meta.size()));
  for (const auto& [k, v] : c.meta) {
    w.str(k);
    w.str(v);
  }
  w.pod(std::uint32_t(c.f32.size() + c.f64.size()));
  for (const auto& [name, t] : c.f32) w.tensor(name, kDtypeF32, t);
  for (const auto& [name, t] : c.f64) w.tensor(name, kDtypeF64, t);
  return w.take();
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  r.need(sizeof(kMagic));
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) throw CheckpointError("not a checkpoint (bad magic)");
  for (std::size_t i = 0; i < sizeof(kMagic); ++i) r.pod<char>();
  Checkpoint c;
  c.format_version = r.pod<std::uint32_t>();
  if (c.format_version != Checkpoint::kFormatVersion) {
    throw CheckpointError("unsupported checkpoint format version " + std::to_string(c.format_version));
  }
  c.arch = r.str();
  c.step = r.pod<std::uint64_t>();
  c.rng_state = r.str();
  const auto n_meta = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = r.str();
    c.meta[k] = r.str();
  }
  const auto n_entries = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_entries; ++i) {
    std::string name = r.str();
    const auto at = r.pos();
    const auto dtype = r.pod<std::uint8_t>();
    const auto rank = r.pod<std::uint32_t>();
    Shape shape(rank);
    for (auto& d : shape) d = std::size_t(r.pod<std::uint64_t>());
    if (dtype == kDtypeF32) c.f32.emplace(name, r.payload<float>(shape));
    else if (dtype == kDtypeF64) c.f64.emplace(name, r.payload<double>(shape));
    else throw CheckpointError("entry '" + name + "': unknown dtype tag at byte offset " + std::to_string(at));
  }
  if (!r.done()) throw CheckpointError("trailing bytes after checkpoint entries");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    const std::string bytes = encode_checkpoint(c);
    out.write(bytes.data(), std::streamsize(bytes.size()));
    if (!out) throw CheckpointError("cannot write " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return decode_checkpoint(ss.str());
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

}  // namespace ign
