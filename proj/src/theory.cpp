#include "ign/theory.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace ign::theory {

namespace {

void check_distribution(const Distribution& p, std::size_t n, const std::string& name) {
  if (p.size() != n) {
    throw OracleError(name + " has " + std::to_string(p.size()) + " entries for a space of " + std::to_string(n));
  }
  Rational total = 0;
  for (const auto& v : p) {
    if (v < 0) throw OracleError(name + " has a negative entry");
    total += v;
  }
  if (total != 1) throw OracleError(name + " sums to " + total.str() + ", not 1");
}

void check_space(const DistanceMatrix& d) {
  const std::size_t n = d.size();
  if (n == 0) throw OracleError("empty space");
  for (std::size_t i = 0; i < n; ++i) {
    if (d[i].size() != n) throw OracleError("distance matrix is not square");
    if (d[i][i] != 0) throw OracleError("distance matrix has a nonzero diagonal");
    for (std::size_t j = 0; j < n; ++j) {
      if (d[i][j] < 0) throw OracleError("distance matrix has a negative entry");
      if (j < i && d[i][j] != d[j][i]) throw OracleError("distance matrix is not symmetric");
    }
  }
}

Rational parse_number(const std::string& s) {
  const std::string t = [&] {
    const auto b = s.find_first_not_of(" \t"), e = s.find_last_not_of(" \t");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }();
  if (t.empty()) throw OracleError("empty probability entry");
  try {
    if (const auto slash = t.find('/'); slash != std::string::npos) {
      std::size_t used_n = 0, used_d = 0;
      const long long num = std::stoll(t.substr(0, slash), &used_n);
      const long long den = std::stoll(t.substr(slash + 1), &used_d);
      if (used_n != slash || used_d != t.size() - slash - 1 || den == 0) throw OracleError("");
      return Rational(num, den);
    }
    const auto dot = t.find('.');
    const std::string digits = dot == std::string::npos ? t : t.substr(0, dot) + t.substr(dot + 1);
    std::size_t used = 0;
    const long long num = std::stoll(digits, &used);
    if (used != digits.size()) throw OracleError("");
    long long den = 1;
    for (std::size_t k = dot == std::string::npos ? 0 : t.size() - dot - 1; k > 0; --k) den *= 10;
    return Rational(num, den);
  } catch (const std::exception&) {
    throw OracleError("cannot read '" + t + "' as a probability");
  }
}

// Smallest objective any map can reach under a fixed drift: all mass sent to
// the cheapest point.
Rational best_reachable(const Distribution& delta) { return *std::min_element(delta.begin(), delta.end()); }

bool fixed_under_own_drift(const FiniteIGN& m, const Rational& lambda_t, const Rational& max_d, Distribution& p_theta) {
  p_theta = pushforward(m.f, m.p_z);
  const auto delta = optimal_drift(m.p_x, p_theta, lambda_t, max_d);
  return idem_objective(m, delta) == best_reachable(delta);
}

void check_search_inputs(const DistanceMatrix& space, const Distribution& p_z, const Distribution& p_x,
                         const Rational& lambda_t) {
  check_space(space);
  check_distribution(p_z, space.size(), "P_z");
  check_distribution(p_x, space.size(), "P_x");
  if (lambda_t < 0) throw OracleError("lambda_t must be >= 0");
  bool spread = false;
  for (const auto& row : space)
    for (const auto& v : row) spread = spread || v > 0;
  if (space.size() > 1 && !spread) throw OracleError("all distances are zero, so M = 0");
}

}  // namespace

Rational FiniteIGN::max_distance() const {
  Rational m = 0;
  for (const auto& row : distance)
    for (const auto& v : row) m = std::max(m, v);
  return m;
}

void FiniteIGN::validate() const {
  check_space(distance);
  check_distribution(p_z, size(), "P_z");
  check_distribution(p_x, size(), "P_x");
  if (f.size() != size()) throw OracleError("map is not defined on every point");
  for (std::size_t y : f) {
    if (y >= size()) throw OracleError("map sends a point outside the space");
  }
}

DistanceMatrix line_space(std::size_t n) {
  DistanceMatrix d(n, std::vector<Rational>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) d[i][j] = Rational(static_cast<long long>(i > j ? i - j : j - i));
  return d;
}

DistanceMatrix discrete_space(std::size_t n) {
  DistanceMatrix d(n, std::vector<Rational>(n, Rational(1)));
  for (std::size_t i = 0; i < n; ++i) d[i][i] = 0;
  return d;
}

Distribution uniform(std::size_t n) { return Distribution(n, Rational(1, static_cast<long long>(n))); }

Distribution parse_distribution(const std::string& text) {
  Distribution p;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) p.push_back(parse_number(item));
  return p;
}

std::string to_string(const Distribution& p) {
  std::ostringstream os;
  for (std::size_t i = 0; i < p.size(); ++i) os << (i ? " " : "") << p[i];
  return os.str();
}

std::string to_string(const Map& f) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < f.size(); ++i) os << (i ? "," : "") << f[i];
  os << ']';
  return os.str();
}

Distribution pushforward(const Map& f, const Distribution& p_z) {
  Distribution out(p_z.size(), Rational(0));
  for (std::size_t z = 0; z < f.size(); ++z) out.at(f[z]) += p_z[z];
  return out;
}

Distribution pushforward(const FiniteIGN& m) {
  m.validate();
  return pushforward(m.f, m.p_z);
}

Distribution optimal_drift(const Distribution& p_x, const Distribution& p_theta, Rational lambda_t,
                           Rational max_distance) {
  if (p_x.size() != p_theta.size()) throw OracleError("P_x and P_theta differ in size");
  if (max_distance <= 0) throw OracleError("M must be positive");
  Distribution delta(p_x.size(), Rational(0));
  for (std::size_t y = 0; y < p_x.size(); ++y) {
    if (p_x[y] < lambda_t * p_theta[y]) delta[y] = max_distance;
  }
  return delta;
}

Rational idem_objective(const FiniteIGN& m, const Distribution& delta) {
  Rational total = 0;
  for (std::size_t z = 0; z < m.f.size(); ++z) total += m.p_z[z] * delta.at(m.f[z]);
  return total;
}

Rational off_manifold_mass(const FiniteIGN& m, const Distribution& delta) {
  Rational total = 0;
  for (std::size_t z = 0; z < m.f.size(); ++z) {
    if (delta.at(m.f[z]) != 0) total += m.p_z[z];
  }
  return total;
}

bool SearchResult::all_match() const {
  if (fixed_points.empty()) return false;
  return std::all_of(fixed_points.begin(), fixed_points.end(), [](const FixedPoint& p) { return p.matches_target; });
}

bool is_fixed_point(const FiniteIGN& m, Rational lambda_t) {
  m.validate();
  Distribution p_theta;
  return fixed_under_own_drift(m, lambda_t, m.size() > 1 ? m.max_distance() : Rational(1), p_theta);
}

SearchResult fixed_point_search(const DistanceMatrix& space, const Distribution& p_z, const Distribution& p_x,
                                Rational lambda_t) {
  const std::size_t n = space.size();
  if (n > kMaxExhaustive) {
    throw OracleError("exhaustive search covers N <= " + std::to_string(kMaxExhaustive) + " (N^N maps); N = " +
                      std::to_string(n) + " needs the sampled search instead");
  }
  check_search_inputs(space, p_z, p_x, lambda_t);
  FiniteIGN m{space, p_z, p_x, Map(n, 0)};
  const Rational max_d = n > 1 ? m.max_distance() : Rational(1);
  SearchResult r{n, lambda_t, p_z, p_x, 0, true, {}};
  while (true) {
    ++r.candidates;
    Distribution p_theta;
    if (fixed_under_own_drift(m, lambda_t, max_d, p_theta)) r.fixed_points.push_back({m.f, p_theta, p_theta == p_x});
    std::size_t k = 0;
    while (k < n && ++m.f[k] == n) m.f[k++] = 0;
    if (k == n) break;
  }
  return r;
}

SearchResult sampled_fixed_point_search(const DistanceMatrix& space, const Distribution& p_z,
                                        const Distribution& p_x, Rational lambda_t, std::uint64_t samples,
                                        std::uint64_t seed) {
  check_search_inputs(space, p_z, p_x, lambda_t);
  const std::size_t n = space.size();
  FiniteIGN m{space, p_z, p_x, Map(n, 0)};
  const Rational max_d = n > 1 ? m.max_distance() : Rational(1);
  SearchResult r{n, lambda_t, p_z, p_x, samples, false, {}};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::set<Map> seen;
  for (std::uint64_t s = 0; s < samples; ++s) {
    for (auto& y : m.f) y = pick(rng);
    Distribution p_theta;
    if (fixed_under_own_drift(m, lambda_t, max_d, p_theta) && seen.insert(m.f).second) {
      r.fixed_points.push_back({m.f, p_theta, p_theta == p_x});
    }
  }
  return r;
}

std::string format_report(const SearchResult& r) {
  std::ostringstream os;
  const bool binding = r.lambda_t == 1;
  os << "fixed-point search  N=" << r.n << "  lambda_t=" << r.lambda_t << '\n';
  os << "P_z = " << to_string(r.p_z) << '\n';
  os << "P_x = " << to_string(r.p_x) << '\n';
  os << "maps examined: " << r.candidates << (r.exhaustive ? " (exhaustive)" : " (sampled)") << '\n';
  if (r.lambda_t > 1) {
    os << "note: lambda_t > 1 is outside the lambda_t <= 1 precondition; results are informational\n";
  } else if (!binding) {
    os << "note: P_theta* = P_x is only forced at lambda_t = 1; results are informational\n";
  }
  os << "fixed points: " << r.fixed_points.size() << '\n';
  for (const auto& p : r.fixed_points) {
    os << "  f=" << to_string(p.f) << "  P_theta=" << to_string(p.p_theta)
       << (p.matches_target ? "  = P_x" : "  != P_x") << '\n';
  }
  if (r.fixed_points.empty()) os << "no map is a fixed point; P_x may not be realizable from P_z\n";
  os << "verdict: " << (r.all_match() ? "PASS" : "FAIL") << (binding ? "" : " (informational)") << '\n';
  return os.str();
}

void write_report(const std::filesystem::path& path, const SearchResult& r) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  out << format_report(r);
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace ign::theory
