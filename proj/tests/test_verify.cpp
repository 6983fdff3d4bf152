#include <doctest.h>

#include "ign/verify.hpp"

using namespace ign;

TEST_CASE("routing, zero-path and identity suites pass") {
  for (const auto& suite : {routing_checks(), zero_path_checks(), identity_checks()}) {
    INFO(format_checks(suite));
    CHECK(all_pass(suite));
  }
}

TEST_CASE("routing suite covers both metrics and all three terms") {
  const auto r = routing_checks();
  CHECK(r.size() == 6);
  for (const auto& c : r) CHECK(c.tolerance == kRoutingTolerance);
}

TEST_CASE("check formatting") {
  const std::vector<CheckResult> checks{{"a", 0.5, 1.0, true}, {"b", 1e-3, 0.0, false}};
  const auto text = format_checks(checks);
  CHECK(text.find("PASS  a") == 0);
  CHECK(text.find("FAIL  b") != std::string::npos);
  CHECK(text.find("exactly 0") != std::string::npos);
  CHECK_FALSE(all_pass(checks));
  CHECK_FALSE(all_pass({}));
}
