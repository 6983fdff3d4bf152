#include "ign/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ign {

namespace {
constexpr double kMaxReliableStep = 1e-3;
constexpr double kMinReliableStep = 1e-9;

double eval(const BasicParamSet<double>& params, const ArchSpec& arch, const LossFn& loss) {
  return loss(arch, Instance<double>::frozen(params)).value().item();
}
}  // namespace

ArrayGradCheck compare_gradients(const std::string& name, const Tensor<double>& analytic,
                                 const Tensor<double>& numeric) {
  if (analytic.shape() != numeric.shape()) throw std::invalid_argument("gradient shape mismatch for " + name);
  ArrayGradCheck out;
  out.name = name;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    out.max_abs_error = std::max(out.max_abs_error, std::abs(analytic[i] - numeric[i]));
    out.analytic_max = std::max(out.analytic_max, std::abs(analytic[i]));
    out.numeric_max = std::max(out.numeric_max, std::abs(numeric[i]));
  }
  const double scale = std::max(out.analytic_max, out.numeric_max);
  out.max_rel_error = scale > 0 ? out.max_abs_error / scale : 0.0;
  return out;
}

BasicGradMap<double> numeric_gradients(const BasicParamSet<double>& params, const ArchSpec& arch, const LossFn& loss,
                                       double eps) {
  BasicGradMap<double> out;
  BasicParamSet<double> probe = params;
  for (auto& [name, tensor] : probe.entries) {
    Tensor<double> g(tensor.shape());
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      const double orig = tensor[i];
      tensor[i] = orig + eps;
      const double up = eval(probe, arch, loss);
      tensor[i] = orig - eps;
      const double down = eval(probe, arch, loss);
      tensor[i] = orig;
      g[i] = (up - down) / (2 * eps);
    }
    out.emplace(name, std::move(g));
  }
  return out;
}

GradCheckReport check_gradients(const BasicParamSet<double>& params, const ArchSpec& arch, const LossFn& loss,
                                double eps) {
  if (!(eps > 0)) throw std::invalid_argument("finite-difference step must be positive");
  GradCheckReport report;
  if (eps > kMaxReliableStep || eps < kMinReliableStep) {
    report.reliable = false;
    report.note = "step " + std::to_string(eps) + " outside [1e-9, 1e-3]: truncation or round-off error dominates";
  }
  const auto live = Instance<double>::live(params);
  const auto analytic = backward(loss(arch, live), live);
  const auto numeric = numeric_gradients(params, arch, loss, eps);
  for (const auto& [name, a] : analytic) {
    report.arrays.push_back(compare_gradients(name, a, numeric.at(name)));
    report.max_rel_error = std::max(report.max_rel_error, report.arrays.back().max_rel_error);
  }
  return report;
}

}  // namespace ign
