#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "ign/theory.hpp"

using namespace ign::theory;

namespace {

Map random_map(std::size_t n, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  Map f(n);
  for (auto& y : f) y = pick(rng);
  return f;
}

// Full-support distribution with denominators up to 12.
Distribution random_distribution(std::size_t n, std::mt19937_64& rng) {
  std::uniform_int_distribution<long long> w(1, 4);
  std::vector<long long> raw(n);
  long long total = 0;
  for (auto& v : raw) total += v = w(rng);
  Distribution p;
  for (auto v : raw) p.emplace_back(v, total);
  return p;
}

// Every map of an n-point space, by index.
Map map_at(std::uint64_t index, std::size_t n) {
  Map f(n);
  for (auto& y : f) {
    y = index % n;
    index /= n;
  }
  return f;
}

std::uint64_t count_maps(std::size_t n) {
  std::uint64_t c = 1;
  for (std::size_t i = 0; i < n; ++i) c *= n;
  return c;
}

}  // namespace

TEST_CASE("pushforward of the identity and of a constant map") {
  const auto pz = parse_distribution("1/2,1/3,1/6");
  FiniteIGN m{line_space(3), pz, uniform(3), {0, 1, 2}};
  CHECK(pushforward(m) == pz);
  m.f = {2, 2, 2};
  CHECK(pushforward(m) == Distribution{0, 0, 1});
}

TEST_CASE("pushforward matches a Monte-Carlo estimate") {
  std::mt19937_64 rng(7);
  const Map f = random_map(4, rng);
  const FiniteIGN m{line_space(4), uniform(4), uniform(4), f};
  const auto exact = pushforward(m);
  std::vector<double> hits(4, 0.0);
  std::uniform_int_distribution<std::size_t> z(0, 3);
  const int draws = 1'000'000;
  for (int i = 0; i < draws; ++i) hits[f[z(rng)]] += 1;
  for (std::size_t y = 0; y < 4; ++y) CHECK(std::abs(hits[y] / draws - exact[y].convert_to<double>()) < 0.003);
}

TEST_CASE("optimal drift uses a strict inequality") {
  const auto p = parse_distribution("0.2,0.3,0.5");
  CHECK(optimal_drift(p, p, 1, 4) == Distribution{0, 0, 0});
  CHECK(optimal_drift({1, 0}, {0, 1}, 1, 1) == Distribution{0, 1});
  CHECK(optimal_drift({1, 0}, {0, 1}, 0, 1) == Distribution{0, 0});
  CHECK(optimal_drift(p, parse_distribution("0.1,0.3,0.6"), 1, 2) == Distribution{0, 0, 2});
  CHECK(optimal_drift(p, parse_distribution("0.1,0.3,0.6"), Rational(1, 2), 2) == Distribution{0, 0, 0});
  CHECK_THROWS_AS(optimal_drift(p, p, 1, 0), OracleError);
}

TEST_CASE("idem objective: trivial cases and the pushforward form") {
  FiniteIGN m{line_space(3), uniform(3), uniform(3), {0, 1, 2}};
  CHECK(idem_objective(m, {0, 0, 0}) == 0);
  m.f = {1, 1, 1};
  CHECK(idem_objective(m, {0, 2, 0}) == 2);

  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + trial % 4;
    FiniteIGN r{line_space(n), random_distribution(n, rng), random_distribution(n, rng), random_map(n, rng)};
    const Rational lambda = Rational(1 + trial % 3, 2);
    const auto p_theta = pushforward(r);
    const auto delta = optimal_drift(r.p_x, p_theta, lambda, r.max_distance());
    Rational by_image = 0;
    for (std::size_t y = 0; y < n; ++y) by_image += delta[y] * p_theta[y];
    const Rational idem = idem_objective(r, delta);
    CHECK(idem == by_image);
    CHECK(idem >= 0);
    CHECK(idem <= r.max_distance());
    // Probability reading: exact, and as doubles to rounding.
    CHECK(idem / r.max_distance() == off_manifold_mass(r, delta));
    const double ratio = idem.convert_to<double>() / r.max_distance().convert_to<double>();
    CHECK(std::abs(ratio - off_manifold_mass(r, delta).convert_to<double>()) <= 4e-16);
  }
}

TEST_CASE("fixed-point test agrees with a brute-force minimum over all maps") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 2 + trial % 2;
    FiniteIGN m{discrete_space(n), random_distribution(n, rng), random_distribution(n, rng), random_map(n, rng)};
    const Rational lambda = Rational(trial % 4 + 1, 2);
    const auto delta = optimal_drift(m.p_x, pushforward(m), lambda, m.max_distance());
    Rational best = m.max_distance() * 10;
    for (std::uint64_t g = 0; g < count_maps(n); ++g) {
      FiniteIGN other = m;
      other.f = map_at(g, n);
      best = std::min(best, idem_objective(other, delta));
    }
    CHECK(is_fixed_point(m, lambda) == (idem_objective(m, delta) == best));
  }
}

TEST_CASE("uniform target on three points: fixed points are the permutations") {
  const auto r = fixed_point_search(line_space(3), uniform(3), uniform(3), 1);
  CHECK(r.candidates == 27);
  CHECK(r.fixed_points.size() == 6);
  CHECK(r.all_match());
  // A source that cannot be pushed onto the target leaves no fixed point.
  const auto none = fixed_point_search(line_space(3), parse_distribution("1/2,1/4,1/4"), uniform(3), 1);
  CHECK(none.fixed_points.empty());
  CHECK_FALSE(none.all_match());
}

TEST_CASE("at lambda_t = 1 every fixed point reproduces a realizable target") {
  std::mt19937_64 rng(17);
  for (std::size_t n = 1; n <= 5; ++n) {
    for (int trial = 0; trial < 3; ++trial) {
      const auto pz = random_distribution(n, rng);
      Map perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      const auto px = pushforward(perm, pz);
      const auto r = fixed_point_search(trial % 2 ? line_space(n) : discrete_space(n), pz, px, 1);
      CHECK(r.candidates == count_maps(n));
      CHECK(r.all_match());
    }
  }
}

TEST_CASE("the identity is a fixed point when source equals target") {
  std::mt19937_64 rng(19);
  for (const Rational lambda : {Rational(0), Rational(1, 4), Rational(1, 2), Rational(1)}) {
    const auto p = random_distribution(4, rng);
    CHECK(is_fixed_point({line_space(4), p, p, {0, 1, 2, 3}}, lambda));
  }
}

TEST_CASE("below lambda_t = 1 other fixed points appear and are reported") {
  const auto half = parse_distribution("1/2,1/2");
  const auto r = fixed_point_search(line_space(2), half, half, Rational(1, 2));
  bool off_target = false;
  for (const auto& p : r.fixed_points) off_target = off_target || !p.matches_target;
  CHECK(off_target);
  const auto text = format_report(r);
  CHECK(text.find("informational") != std::string::npos);
  CHECK(text.find("!= P_x") != std::string::npos);
}

TEST_CASE("report wording and the lambda_t > 1 note") {
  const auto ok = format_report(fixed_point_search(line_space(3), uniform(3), uniform(3), 1));
  CHECK(ok.find("verdict: PASS\n") != std::string::npos);
  CHECK(ok.find("f=[2,1,0]") != std::string::npos);
  const auto high = format_report(fixed_point_search(line_space(3), uniform(3), uniform(3), Rational(3, 2)));
  CHECK(high.find("lambda_t > 1") != std::string::npos);
  CHECK(high.find("(informational)") != std::string::npos);
}

TEST_CASE("large spaces need the sampled search") {
  try {
    fixed_point_search(line_space(7), uniform(7), uniform(7), 1);
    FAIL("expected an error");
  } catch (const OracleError& e) {
    CHECK(std::string(e.what()).find("sampled") != std::string::npos);
  }
  const auto full = fixed_point_search(line_space(4), uniform(4), uniform(4), 1);
  const auto sampled = sampled_fixed_point_search(line_space(4), uniform(4), uniform(4), 1, 2000, 3);
  CHECK_FALSE(sampled.exhaustive);
  CHECK(sampled.fixed_points.size() <= full.fixed_points.size());
  CHECK(sampled.fixed_points.size() > 0);
  CHECK(sampled.all_match());
  const auto big = sampled_fixed_point_search(line_space(8), uniform(8), uniform(8), 1, 20000, 5);
  CHECK(big.candidates == 20000);
  for (const auto& p : big.fixed_points) CHECK(p.matches_target);
}

TEST_CASE("invalid instances are rejected") {
  CHECK_THROWS_AS(pushforward({line_space(2), parse_distribution("1/2,1/3"), uniform(2), {0, 1}}), OracleError);
  CHECK_THROWS_AS(pushforward({line_space(2), uniform(2), uniform(2), {0, 2}}), OracleError);
  CHECK_THROWS_AS(pushforward({line_space(2), uniform(2), uniform(2), {0}}), OracleError);
  auto d = line_space(2);
  d[0][1] = 3;
  CHECK_THROWS_AS(pushforward({d, uniform(2), uniform(2), {0, 1}}), OracleError);
  d = line_space(2);
  d[1][1] = 1;
  CHECK_THROWS_AS(pushforward({d, uniform(2), uniform(2), {0, 1}}), OracleError);
  CHECK_THROWS_AS(pushforward({line_space(2), parse_distribution("3/2,-1/2"), uniform(2), {0, 1}}), OracleError);
  CHECK_THROWS_AS(parse_distribution("0.5,x"), OracleError);
  CHECK_THROWS_AS(parse_distribution("1/0"), OracleError);
  CHECK(parse_distribution("0.125, 7/8") == Distribution{Rational(1, 8), Rational(7, 8)});
}
