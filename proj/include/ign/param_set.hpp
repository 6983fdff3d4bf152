#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "ign/autograd.hpp"

namespace ign {

template <typename T>
using TensorMap = std::map<std::string, Tensor<T>>;

/// Named parameter arrays of one model instance.
///
/// `entries` are trainable; `buffers` hold batch-norm running statistics,
/// which travel with the parameters when a copy is synchronized. Iteration
/// order is the lexicographic name order of std::map.
template <typename T>
struct BasicParamSet {
  TensorMap<T> entries;
  TensorMap<T> buffers;
  std::uint64_t version = 0;

  /// Value equality over entries and buffers; the version counter is ignored.
  bool operator==(const BasicParamSet& other) const { return entries == other.entries && buffers == other.buffers; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& [_, t] : entries) n += t.size();
    return n;
  }

  template <typename U>
  BasicParamSet<U> cast() const {
    BasicParamSet<U> out;
    for (const auto& [k, t] : entries) out.entries.emplace(k, t.template cast<U>());
    for (const auto& [k, t] : buffers) out.buffers.emplace(k, t.template cast<U>());
    out.version = version;
    return out;
  }
};

using ParamSet = BasicParamSet<float>;

/// Gradient per trainable entry, keyed exactly like the ParamSet it belongs to.
template <typename T>
using BasicGradMap = TensorMap<T>;
using GradMap = BasicGradMap<float>;

/// FNV-1a over names, shapes and raw bytes of entries and buffers.
template <typename T>
std::uint64_t fingerprint(const BasicParamSet<T>& params);

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t seed = 14695981039346656037ull);

template <typename T>
double global_norm(const BasicGradMap<T>& grads);

/// Zero gradient for every entry of `params`.
template <typename T>
BasicGradMap<T> zero_grads(const BasicParamSet<T>& params);

/// One instantiation of the model: a parameter set bound either as gradient
/// leaves (live) or as constants (frozen). Gradients from a backward pass are
/// only ever collected from a live instance.
///
/// Running statistics are copied in and read only in inference mode.
template <typename T>
class Instance {
 public:
  static Instance live(const BasicParamSet<T>& params) { return Instance(params, true); }
  static Instance frozen(const BasicParamSet<T>& params) { return Instance(params, false); }

  bool is_live() const noexcept { return live_; }
  const ag::Var<T>& param(const std::string& name) const;
  const Tensor<T>& buffer(const std::string& name) const;
  const TensorMap<T>& buffers() const noexcept { return buffers_; }
  const std::map<std::string, ag::Var<T>>& params() const noexcept { return vars_; }

  /// Gradients this instance's leaves received in a given backward
  /// generation; zeros for a frozen instance or unreached entries.
  BasicGradMap<T> gradients(std::uint64_t generation) const;

 private:
  Instance(const BasicParamSet<T>& params, bool live);

  bool live_;
  std::map<std::string, ag::Var<T>> vars_;
  TensorMap<T> buffers_;
};

/// Runs reverse-mode from a scalar loss and returns d(loss)/d(entry) for
/// every entry of `wrt`. Entries with no path to the loss get zeros.
template <typename T>
BasicGradMap<T> backward(const ag::Var<T>& loss, const Instance<T>& wrt) {
  const auto gen = ag::backward(loss);
  return wrt.gradients(gen);
}

}  // namespace ign
