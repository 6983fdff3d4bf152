#include "ign/objectives.hpp"

#include <cmath>
#include <iostream>
#include <sstream>
#include <stdexcept>

namespace ign {

std::string to_string(Metric m) { return m == Metric::l1 ? "l1" : "l2"; }

Metric metric_from_string(const std::string& s) {
  if (s == "l1" || s == "L1") return Metric::l1;
  if (s == "l2" || s == "L2") return Metric::l2;
  throw std::invalid_argument("unknown metric '" + s + "' (expected l1 or l2)");
}

LossWeights LossWeights::code_preset() { return LossWeights{}; }

LossWeights LossWeights::table_preset() {
  LossWeights w;
  w.lambda_r = 20.0;
  w.lambda_i = 20.0;
  w.lambda_t = 2.5;
  w.clamp_ratio = 1.5;
  w.metric = Metric::l1;
  w.clamp = true;
  return w;
}

LossWeights LossWeights::preset(const std::string& name) {
  if (name == "code") return code_preset();
  if (name == "table") return table_preset();
  throw std::invalid_argument("unknown loss preset '" + name + "' (expected code or table)");
}

void LossWeights::validate() const {
  if (!(lambda_r >= 0 && lambda_i >= 0 && lambda_t >= 0)) throw std::invalid_argument("loss weights must be >= 0");
  if (!(clamp_ratio >= 1.0)) throw std::invalid_argument("clamp ratio must be >= 1");
}

std::string LossReport::tsv_header() { return "step\trec\tidem\ttight_raw\ttight_clamped\ttotal"; }

std::string LossReport::to_tsv(std::uint64_t step) const {
  std::ostringstream os;
  os.precision(9);
  os << step << '\t' << rec << '\t' << idem << '\t' << tight_raw << '\t' << tight_clamped << '\t' << total;
  return os.str();
}

template <typename T>
ag::Var<T> distance(const ag::Var<T>& a, const ag::Var<T>& b, Metric metric) {
  auto diff = ag::sub(a, b);
  return ag::mean(metric == Metric::l1 ? ag::abs(diff) : ag::square(diff));
}

namespace {
template <typename T>
ag::Var<T> per_sample_distance(const ag::Var<T>& a, const ag::Var<T>& b, Metric metric) {
  auto diff = ag::sub(a, b);
  return ag::mean_per_sample(metric == Metric::l1 ? ag::abs(diff) : ag::square(diff));
}

void warn_zero_rec() {
  static bool warned = false;
  if (!warned) {
    std::cerr << "warning: reconstruction loss is exactly 0; tightness clamp returns 0\n";
    warned = true;
  }
}
}  // namespace

template <typename T>
ag::Var<T> drift(const ArchSpec& arch, const Instance<T>& inst, const ag::Var<T>& y, Metric metric, Mode mode) {
  return distance(y, apply(arch, inst, y, mode), metric);
}

template <typename T>
ag::Var<T> loss_rec(const ArchSpec& arch, const Instance<T>& live, const ag::Var<T>& x, Metric metric, Mode mode) {
  return distance(apply(arch, live, x, mode), x, metric);
}

template <typename T>
ag::Var<T> loss_idem(const ArchSpec& arch, const Instance<T>& live, const Instance<T>& frozen, const ag::Var<T>& z,
                     Metric metric, Mode mode) {
  auto fz = apply(arch, live, z, mode);
  auto f_fz = frozen_eval(frozen, arch, fz, mode);
  return distance(f_fz, fz, metric);
}

template <typename T>
ag::Var<T> loss_tight_raw(const ArchSpec& arch, const Instance<T>& live, const Instance<T>& frozen,
                          const ag::Var<T>& z, Metric metric, Mode mode) {
  auto f_z = apply(arch, frozen, z, mode).detach();
  auto ff_z = apply(arch, live, f_z, mode);
  return ag::neg(distance(ff_z, f_z, metric));
}

double clamp_tight(double tight_distance, double rec, double ratio) {
  if (rec <= 0) {
    warn_zero_rec();
    return 0.0;
  }
  const double c = ratio * rec;
  return std::tanh(tight_distance / c) * c;
}

template <typename T>
ag::Var<T> clamp_tight(const ag::Var<T>& tight_distance, T rec, T ratio) {
  if (rec <= T(0)) {
    warn_zero_rec();
    return ag::Var<T>::constant(Tensor<T>(tight_distance.shape()));
  }
  const T c = ratio * rec;
  return ag::scale(ag::tanh(ag::scale(tight_distance, T(1) / c)), c);
}

template <typename T>
TotalLoss<T> total_loss(const ArchSpec& arch, const Instance<T>& live, const Instance<T>& frozen,
                        const ag::Var<T>& x, const ag::Var<T>& z, const LossWeights& w, Mode mode,
                        TensorMap<T>* running_stats) {
  if (x.shape() != z.shape()) {
    throw std::invalid_argument("x " + shape_to_string(x.shape()) + " and z " + shape_to_string(z.shape()) +
                                " must have the same shape");
  }
  w.validate();

  auto fx = apply(arch, live, x, mode, running_stats);
  auto fz = apply(arch, live, z, mode, running_stats);
  auto f_z = fz.detach();
  auto ff_z = apply(arch, live, f_z, mode, running_stats);
  auto f_fz = frozen_eval(frozen, arch, fz, mode);

  TotalLoss<T> out;
  out.rec = distance(fx, x, w.metric);
  out.idem = distance(f_fz, fz, w.metric);
  auto tight_distance = distance(ff_z, f_z, w.metric);
  const T rec_value = out.rec.value().item();

  if (!w.clamp) {
    out.tight = ag::neg(tight_distance);
  } else if (!w.per_sample_clamp) {
    out.tight = ag::neg(clamp_tight(tight_distance, rec_value, T(w.clamp_ratio)));
  } else {
    // Per-sample scale a * rec_i, held constant within the step.
    auto rec_i = per_sample_distance(fx, x, w.metric).value();
    auto tight_i = per_sample_distance(ff_z, f_z, w.metric);
    Tensor<T> inv(rec_i.shape()), scale(rec_i.shape());
    for (std::size_t i = 0; i < rec_i.size(); ++i) {
      const T c = T(w.clamp_ratio) * rec_i[i];
      scale[i] = c;
      inv[i] = c > T(0) ? T(1) / c : T(0);
    }
    auto clamped = ag::mul(ag::tanh(ag::mul(tight_i, ag::Var<T>::constant(inv))), ag::Var<T>::constant(scale));
    out.tight = ag::neg(ag::mean(clamped));
  }

  auto weighted_rec = ag::scale(out.rec, T(w.lambda_r));
  auto weighted_idem = ag::scale(out.idem, T(w.lambda_i));
  auto weighted_tight = ag::scale(out.tight, T(w.lambda_t));
  out.total = ag::add(ag::add(weighted_rec, weighted_idem), weighted_tight);

  LossReport& r = out.report;
  r.rec = rec_value;
  r.idem = out.idem.value().item();
  r.tight_raw = -static_cast<double>(tight_distance.value().item());
  r.tight_clamped = out.tight.value().item();
  r.weighted_rec = weighted_rec.value().item();
  r.weighted_idem = weighted_idem.value().item();
  r.weighted_tight = weighted_tight.value().item();
  r.total = out.total.value().item();
  return out;
}

#define IGN_INSTANTIATE_OBJECTIVES(T)                                                                            \
  template ag::Var<T> distance(const ag::Var<T>&, const ag::Var<T>&, Metric);                                     \
  template ag::Var<T> drift(const ArchSpec&, const Instance<T>&, const ag::Var<T>&, Metric, Mode);                \
  template ag::Var<T> loss_rec(const ArchSpec&, const Instance<T>&, const ag::Var<T>&, Metric, Mode);             \
  template ag::Var<T> loss_idem(const ArchSpec&, const Instance<T>&, const Instance<T>&, const ag::Var<T>&,       \
                                Metric, Mode);                                                                    \
  template ag::Var<T> loss_tight_raw(const ArchSpec&, const Instance<T>&, const Instance<T>&, const ag::Var<T>&,  \
                                     Metric, Mode);                                                               \
  template ag::Var<T> clamp_tight(const ag::Var<T>&, T, T);                                                       \
  template TotalLoss<T> total_loss(const ArchSpec&, const Instance<T>&, const Instance<T>&, const ag::Var<T>&,    \
                                   const ag::Var<T>&, const LossWeights&, Mode, TensorMap<T>*);

IGN_INSTANTIATE_OBJECTIVES(float)
IGN_INSTANTIATE_OBJECTIVES(double)

}  // namespace ign
