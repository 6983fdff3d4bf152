#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ign/model.hpp"

namespace ign {

/// Builds a scalar loss from a live instance of the parameters under test.
/// Anything else the loss needs (frozen copies, inputs) is captured by the
/// closure and stays fixed while the oracle perturbs the live parameters.
using LossFn = std::function<ag::Var<double>(const ArchSpec&, const Instance<double>&)>;

struct ArrayGradCheck {
  std::string name;
  double max_abs_error = 0;
  /// max|analytic - numeric| / max(max|analytic|, max|numeric|); 0 when both
  /// are identically zero.
  double max_rel_error = 0;
  double analytic_max = 0;
  double numeric_max = 0;
};

struct GradCheckReport {
  std::vector<ArrayGradCheck> arrays;
  double max_rel_error = 0;
  bool reliable = true;
  std::string note;
};

/// Compares reverse-mode gradients of `loss` against central differences
/// with step `eps`, one array at a time, in double precision.
GradCheckReport check_gradients(const BasicParamSet<double>& params, const ArchSpec& arch, const LossFn& loss,
                                double eps);

/// The comparison used by check_gradients, for arbitrary gradient pairs.
ArrayGradCheck compare_gradients(const std::string& name, const Tensor<double>& analytic,
                                 const Tensor<double>& numeric);

/// Central-difference gradient of `loss` for every entry of `params`.
BasicGradMap<double> numeric_gradients(const BasicParamSet<double>& params, const ArchSpec& arch, const LossFn& loss,
                                       double eps);

}  // namespace ign
