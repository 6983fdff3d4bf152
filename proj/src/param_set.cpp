#include "ign/param_set.hpp"

#include <cmath>
#include <stdexcept>

namespace ign {

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

namespace {
template <typename T>
std::uint64_t hash_map(const TensorMap<T>& m, std::uint64_t h) {
  for (const auto& [name, t] : m) {
    h = fnv1a(name.data(), name.size(), h);
    for (std::size_t d : t.shape()) {
      const std::uint64_t d64 = d;
      h = fnv1a(&d64, sizeof d64, h);
    }
    h = fnv1a(t.data(), t.size() * sizeof(T), h);
  }
  return h;
}
}  // namespace

template <typename T>
std::uint64_t fingerprint(const BasicParamSet<T>& params) {
  std::uint64_t h = hash_map(params.entries, 14695981039346656037ull);
  return hash_map(params.buffers, h ^ 0x9e3779b97f4a7c15ull);
}

template <typename T>
double global_norm(const BasicGradMap<T>& grads) {
  double acc = 0;
  for (const auto& [_, g] : grads)
    for (T v : g.values()) acc += static_cast<double>(v) * static_cast<double>(v);
  return std::sqrt(acc);
}

template <typename T>
BasicGradMap<T> zero_grads(const BasicParamSet<T>& params) {
  BasicGradMap<T> out;
  for (const auto& [k, t] : params.entries) out.emplace(k, Tensor<T>(t.shape()));
  return out;
}

template <typename T>
Instance<T>::Instance(const BasicParamSet<T>& params, bool live) : live_(live), buffers_(params.buffers) {
  for (const auto& [name, t] : params.entries) {
    vars_.emplace(name, live ? ag::Var<T>::leaf(t) : ag::Var<T>::constant(t));
  }
}

template <typename T>
const ag::Var<T>& Instance<T>::param(const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw std::out_of_range("no parameter named '" + name + "'");
  return it->second;
}

template <typename T>
const Tensor<T>& Instance<T>::buffer(const std::string& name) const {
  auto it = buffers_.find(name);
  if (it == buffers_.end()) throw std::out_of_range("no buffer named '" + name + "'");
  return it->second;
}

template <typename T>
BasicGradMap<T> Instance<T>::gradients(std::uint64_t generation) const {
  BasicGradMap<T> out;
  for (const auto& [name, v] : vars_) {
    out.emplace(name, live_ ? ag::gradient_of(v, generation) : Tensor<T>(v.shape()));
  }
  return out;
}

template std::uint64_t fingerprint(const BasicParamSet<float>&);
template std::uint64_t fingerprint(const BasicParamSet<double>&);
template double global_norm(const BasicGradMap<float>&);
template double global_norm(const BasicGradMap<double>&);
template BasicGradMap<float> zero_grads(const BasicParamSet<float>&);
template BasicGradMap<double> zero_grads(const BasicParamSet<double>&);
template class Instance<float>;
template class Instance<double>;

}  // namespace ign
