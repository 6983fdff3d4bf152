#include "ign/verify.hpp"

#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>

#include "ign/gradcheck.hpp"
#include "ign/objectives.hpp"

namespace ign {

namespace {

using V = ag::Var<double>;

Tensor<double> normal_tensor(Shape shape, std::mt19937_64& rng) {
  Tensor<double> t(std::move(shape));
  std::normal_distribution<double> d(0.0, 1.0);
  for (auto& v : t.values()) v = d(rng);
  return t;
}

CheckResult below(std::string name, double measured, double tolerance) {
  return {std::move(name), measured, tolerance, measured < tolerance};
}

CheckResult exactly_zero(std::string name, double measured) { return {std::move(name), measured, 0.0, measured == 0.0}; }

double max_abs(const BasicGradMap<double>& grads) {
  double m = 0;
  for (const auto& [name, g] : grads)
    for (double v : g.values()) m = std::max(m, std::abs(v));
  return m;
}

// Largest gradient any leaf of `inst` holds after a backward pass, plus one
// for every parameter that was registered as a gradient leaf at all.
double leaf_exposure(const Instance<double>& inst, std::uint64_t generation) {
  double m = 0;
  for (const auto& [name, var] : inst.params()) {
    if (var.requires_grad() && !inst.is_live()) m += 1;
    const auto g = ag::gradient_of(var, generation);
    for (double v : g.values()) m = std::max(m, std::abs(v));
  }
  return m;
}

const char* metric_tag(Metric m) { return m == Metric::l1 ? "L1" : "L2"; }

}  // namespace

std::vector<CheckResult> routing_checks(std::uint64_t seed) {
  const auto arch = build_mlp(4, 16, 3);
  const auto ps = init_params(arch, seed, InitScheme::fan_in).cast<double>();
  const auto other = init_params(arch, seed + 1, InitScheme::fan_in).cast<double>();
  std::mt19937_64 rng(seed);
  const auto x = V::constant(normal_tensor({6, 4}, rng));
  const auto z = V::constant(normal_tensor({6, 4}, rng));
  // A different fixed copy makes a routing mistake visible in the values.
  const auto frozen = Instance<double>::frozen(other);
  std::vector<CheckResult> out;
  for (Metric m : {Metric::l2, Metric::l1}) {
    const LossFn rec = [&](const ArchSpec& a, const Instance<double>& live) { return loss_rec(a, live, x, m, Mode::train); };
    const LossFn idem = [&](const ArchSpec& a, const Instance<double>& live) {
      return loss_idem(a, live, frozen, z, m, Mode::train);
    };
    const LossFn tight = [&](const ArchSpec& a, const Instance<double>& live) {
      return loss_tight_raw(a, live, frozen, z, m, Mode::train);
    };
    const std::string tag = metric_tag(m);
    out.push_back(below("rec gradient vs finite differences (" + tag + ")",
                        check_gradients(ps, arch, rec, kRoutingEps).max_rel_error, kRoutingTolerance));
    out.push_back(below("idem gradient vs finite differences (" + tag + ")",
                        check_gradients(ps, arch, idem, kRoutingEps).max_rel_error, kRoutingTolerance));
    out.push_back(below("tight gradient vs finite differences (" + tag + ")",
                        check_gradients(ps, arch, tight, kRoutingEps).max_rel_error, kRoutingTolerance));
  }
  return out;
}

std::vector<CheckResult> zero_path_checks(std::uint64_t seed) {
  const auto arch = build_mlp(4, 16, 3);
  const auto a = init_params(arch, seed, InitScheme::fan_in).cast<double>();
  const auto b = init_params(arch, seed + 1, InitScheme::fan_in).cast<double>();
  std::mt19937_64 rng(seed);
  const auto x = V::constant(normal_tensor({6, 4}, rng));
  const auto z = V::constant(normal_tensor({6, 4}, rng));
  std::vector<CheckResult> out;

  {
    const auto live = Instance<double>::live(a);
    const auto frozen = Instance<double>::frozen(b);
    const auto gen = ag::backward(loss_idem(arch, live, frozen, z, Metric::l2, Mode::train));
    out.push_back(exactly_zero("idem: gradient reaching the frozen outer copy", leaf_exposure(frozen, gen)));
  }
  {
    // Both applications live; only the detach separates them.
    const auto inner = Instance<double>::live(b);
    const auto outer = Instance<double>::live(a);
    const auto f_z = apply(arch, inner, z, Mode::train).detach();
    const auto gen = ag::backward(ag::neg(distance(apply(arch, outer, f_z, Mode::train), f_z, Metric::l2)));
    out.push_back(exactly_zero("tight: gradient reaching the detached inner application", max_abs(inner.gradients(gen))));
  }
  {
    const auto live = Instance<double>::live(a);
    const auto frozen = Instance<double>::frozen(a);
    const auto t = total_loss(arch, live, frozen, x, z, LossWeights::code_preset(), Mode::train);
    const auto gen = ag::backward(t.total);
    out.push_back(exactly_zero("combined loss: gradient reaching the frozen copy", leaf_exposure(frozen, gen)));
  }
  return out;
}

std::vector<CheckResult> identity_checks(std::uint64_t seed) {
  const std::size_t dim = 4;
  ArchSpec arch;
  arch.signature = {dim};
  Layer l;
  l.name = "lin";
  l.op = LayerOp::linear;
  l.in = dim;
  l.out = dim;
  arch.layers.push_back(l);
  BasicParamSet<double> ps;
  Tensor<double> eye({dim, dim});
  for (std::size_t i = 0; i < dim; ++i) eye[i * dim + i] = 1.0;
  ps.entries.emplace("lin.weight", eye);
  ps.entries.emplace("lin.bias", Tensor<double>({dim}));

  std::mt19937_64 rng(seed);
  const auto x = V::constant(normal_tensor({8, dim}, rng));
  const auto z = V::constant(normal_tensor({8, dim}, rng));
  std::vector<CheckResult> out;
  for (const auto& [tag, w] : {std::pair{"code preset", LossWeights::code_preset()},
                               std::pair{"table preset", LossWeights::table_preset()}}) {
    const auto live = Instance<double>::live(ps);
    const auto t = total_loss(arch, live, Instance<double>::frozen(ps), x, z, w, Mode::train);
    const double losses = std::max({std::abs(t.report.rec), std::abs(t.report.idem), std::abs(t.report.tight_raw),
                                    std::abs(t.report.total)});
    out.push_back(below(std::string("identity: largest loss (") + tag + ")", losses, kIdentityTolerance));
    out.push_back(below(std::string("identity: largest gradient (") + tag + ")", max_abs(backward(t.total, live)),
                        kIdentityTolerance));
  }
  return out;
}

bool all_pass(const std::vector<CheckResult>& checks) {
  for (const auto& c : checks) {
    if (!c.pass) return false;
  }
  return !checks.empty();
}

std::string format_checks(const std::vector<CheckResult>& checks) {
  std::ostringstream os;
  for (const auto& c : checks) {
    os << (c.pass ? "PASS  " : "FAIL  ") << c.name << "  " << std::setprecision(3) << std::scientific << c.measured
       << (c.tolerance == 0 ? "  (must be exactly 0)" : "  (< ") << std::defaultfloat;
    if (c.tolerance != 0) os << c.tolerance << ")";
    os << '\n';
  }
  return os.str();
}

}  // namespace ign
