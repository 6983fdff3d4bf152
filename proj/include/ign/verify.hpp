#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ign {

/// One measured quantity against a pinned tolerance.
struct CheckResult {
  std::string name;
  double measured = 0;
  double tolerance = 0;
  /// measured < tolerance, or measured == 0 when the tolerance is 0.
  bool pass = false;
};

constexpr double kRoutingTolerance = 1e-4;
constexpr double kRoutingEps = 1e-6;
constexpr double kIdentityTolerance = 1e-6;

/// Central-difference checks of each objective's gradient on a tiny MLP, in
/// double precision, with the other copy of the parameters held fixed. Covers
/// L1 and L2.
std::vector<CheckResult> routing_checks(std::uint64_t seed = 71);

/// Gradients that must be exactly zero: the frozen outer copy of the
/// idempotence term, a live instance whose output is detached before the
/// tightness term, and the frozen copy inside the combined loss.
std::vector<CheckResult> zero_path_checks(std::uint64_t seed = 72);

/// With f the identity map, every objective and every gradient vanishes.
std::vector<CheckResult> identity_checks(std::uint64_t seed = 73);

bool all_pass(const std::vector<CheckResult>& checks);
/// One "PASS|FAIL  name  measured (tol)" line per check.
std::string format_checks(const std::vector<CheckResult>& checks);

}  // namespace ign
