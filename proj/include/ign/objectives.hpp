#pragma once

#include <string>

#include "ign/model.hpp"

namespace ign {

enum class Metric { l1, l2 };

std::string to_string(Metric m);
Metric metric_from_string(const std::string& s);

/// Term weights and tightness clamp settings.
struct LossWeights {
  double lambda_r = 1.0;
  double lambda_i = 1.0;
  double lambda_t = 0.1;
  /// Saturation ratio a of the tanh clamp; must be >= 1.
  double clamp_ratio = 1.5;
  Metric metric = Metric::l2;
  bool clamp = false;
  /// Clamp each sample against its own reconstruction error instead of the
  /// batch means.
  bool per_sample_clamp = false;

  /// Mean squared error, weights 1 / 1 / 0.1, no clamp.
  static LossWeights code_preset();
  /// Mean absolute error, weights 20 / 20 / 2.5, clamp with a = 1.5.
  static LossWeights table_preset();
  static LossWeights preset(const std::string& name);

  void validate() const;
};

/// Raw and weighted loss values of one step. `tight_raw` and `tight_clamped`
/// carry the minus sign of the tightness term, so
/// total = lambda_r * rec + lambda_i * idem + lambda_t * tight_clamped.
struct LossReport {
  double rec = 0;
  double idem = 0;
  double tight_raw = 0;
  double tight_clamped = 0;
  double total = 0;
  double weighted_rec = 0;
  double weighted_idem = 0;
  double weighted_tight = 0;

  /// step, rec, idem, tight_raw, tight_clamped, total; tab-separated.
  std::string to_tsv(std::uint64_t step) const;
  static std::string tsv_header();
};

/// D(a, b): mean absolute (l1) or mean squared (l2) difference over every
/// element of the batch.
template <typename T>
ag::Var<T> distance(const ag::Var<T>& a, const ag::Var<T>& b, Metric metric);

/// delta(y) = D(y, f(y)).
template <typename T>
ag::Var<T> drift(const ArchSpec& arch, const Instance<T>& inst, const ag::Var<T>& y, Metric metric, Mode mode);

/// D(f(x), x) through the live instance.
template <typename T>
ag::Var<T> loss_rec(const ArchSpec& arch, const Instance<T>& live, const ag::Var<T>& x, Metric metric, Mode mode);

/// D(f'(f(z)), f(z)): inner application live, outer through the frozen copy.
/// Gradient reaches the live parameters via both arguments of D.
template <typename T>
ag::Var<T> loss_idem(const ArchSpec& arch, const Instance<T>& live, const Instance<T>& frozen, const ag::Var<T>& z,
                     Metric metric, Mode mode);

/// -D(f(f'(z)), f'(z)): inner application frozen and detached, outer live.
template <typename T>
ag::Var<T> loss_tight_raw(const ArchSpec& arch, const Instance<T>& live, const Instance<T>& frozen,
                          const ag::Var<T>& z, Metric metric, Mode mode);

/// tanh(t / (a * rec)) * a * rec for a non-negative tightness distance t.
/// Returns 0 when rec is 0.
double clamp_tight(double tight_distance, double rec, double ratio);

/// Differentiable form of clamp_tight in `tight_distance`; the scale a * rec
/// is a constant of the step.
template <typename T>
ag::Var<T> clamp_tight(const ag::Var<T>& tight_distance, T rec, T ratio);

template <typename T>
struct TotalLoss {
  ag::Var<T> total;
  ag::Var<T> rec;
  ag::Var<T> idem;
  ag::Var<T> tight;  // enters total with lambda_t; already negated (and clamped)
  LossReport report;
};

/// All three terms with shared f(z). `running_stats`, when given, receives
/// the live instance's batch-norm statistics from f(x), f(z) and f(f(z)).
template <typename T>
TotalLoss<T> total_loss(const ArchSpec& arch, const Instance<T>& live, const Instance<T>& frozen,
                        const ag::Var<T>& x, const ag::Var<T>& z, const LossWeights& weights, Mode mode,
                        TensorMap<T>* running_stats = nullptr);

}  // namespace ign
