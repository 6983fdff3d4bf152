#pragma once

#include <functional>
#include <random>
#include <vector>

#include "ign/gradcheck.hpp"
#include "ign/ops.hpp"

namespace ign::testing {

inline Tensor<double> random_tensor(Shape shape, std::mt19937_64& rng, double sigma = 1.0) {
  Tensor<double> t(std::move(shape));
  std::normal_distribution<double> d(0.0, sigma);
  for (auto& v : t.values()) v = d(rng);
  return t;
}

inline Grid random_grid(Shape shape, std::uint64_t seed, float sigma = 1.0f) {
  std::mt19937_64 rng(seed);
  Grid g(std::move(shape));
  std::normal_distribution<float> d(0.0f, sigma);
  for (auto& v : g.values()) v = d(rng);
  return g;
}

using OpFn = std::function<ag::Var<double>(const std::vector<ag::Var<double>>&)>;

/// Max relative error (per input, compare_gradients convention) between the
/// analytic gradient of sum(op(inputs) * probe) and central differences.
inline double op_gradient_error(const OpFn& op, const std::vector<Tensor<double>>& inputs, std::uint64_t seed,
                                double eps = 1e-5) {
  std::mt19937_64 rng(seed);
  std::vector<ag::Var<double>> leaves;
  for (const auto& t : inputs) leaves.push_back(ag::Var<double>::leaf(t));
  auto out = op(leaves);
  const auto probe = ag::Var<double>::constant(random_tensor(out.shape(), rng));
  auto loss_of = [&](const std::vector<ag::Var<double>>& xs) { return ag::sum(ag::mul(op(xs), probe)); };
  const auto gen = ag::backward(loss_of(leaves));

  double worst = 0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor<double> numeric(inputs[k].shape());
    std::vector<Tensor<double>> probe_inputs = inputs;
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double orig = probe_inputs[k][i];
      auto value_at = [&](double v) {
        probe_inputs[k][i] = v;
        std::vector<ag::Var<double>> consts;
        for (const auto& t : probe_inputs) consts.push_back(ag::Var<double>::constant(t));
        return loss_of(consts).value().item();
      };
      numeric[i] = (value_at(orig + eps) - value_at(orig - eps)) / (2 * eps);
      probe_inputs[k][i] = orig;
    }
    const auto cmp = compare_gradients("input", ag::gradient_of(leaves[k], gen), numeric);
    worst = std::max(worst, cmp.max_rel_error);
  }
  return worst;
}

}  // namespace ign::testing
