#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace ign::theory {

/// Exact arithmetic so distribution equalities are decided without tolerance.
using Rational = boost::multiprecision::cpp_rational;
using Distribution = std::vector<Rational>;
using DistanceMatrix = std::vector<std::vector<Rational>>;
/// Tabular map Y -> Y: point i goes to map[i].
using Map = std::vector<std::size_t>;

class OracleError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A finite space of N points with source and target distributions and a map.
struct FiniteIGN {
  DistanceMatrix distance;
  Distribution p_z;
  Distribution p_x;
  Map f;

  std::size_t size() const noexcept { return distance.size(); }
  /// Largest pairwise distance.
  Rational max_distance() const;
  /// Throws OracleError unless distributions are nonnegative and sum to 1,
  /// the distance is symmetric, nonnegative with a zero diagonal, and f is
  /// total on the space.
  void validate() const;
};

/// N points on a line, D(i, j) = |i - j|.
DistanceMatrix line_space(std::size_t n);
/// Every pair of distinct points at distance 1.
DistanceMatrix discrete_space(std::size_t n);
Distribution uniform(std::size_t n);
/// Parses "1/3,1/3,1/3" or "0.25,0.75" (decimals are read exactly).
Distribution parse_distribution(const std::string& text);
std::string to_string(const Distribution& p);
std::string to_string(const Map& f);

/// P_theta(y) = sum of P_z(z) over z with f(z) = y.
Distribution pushforward(const FiniteIGN& m);
Distribution pushforward(const Map& f, const Distribution& p_z);

/// delta*(y) = M if P_x(y) < lambda_t P_theta(y), else 0. Ties give 0.
Distribution optimal_drift(const Distribution& p_x, const Distribution& p_theta, Rational lambda_t, Rational max_distance);

/// E_z[delta(f(z))].
Rational idem_objective(const FiniteIGN& m, const Distribution& delta);
/// Mass of z whose image lies where delta is nonzero.
Rational off_manifold_mass(const FiniteIGN& m, const Distribution& delta);

struct FixedPoint {
  Map f;
  Distribution p_theta;
  bool matches_target = false;
};

struct SearchResult {
  std::size_t n = 0;
  Rational lambda_t;
  Distribution p_z, p_x;
  /// Maps examined; N^N when exhaustive.
  std::uint64_t candidates = 0;
  bool exhaustive = true;
  std::vector<FixedPoint> fixed_points;

  /// Some map realizes P_x and every fixed point does.
  bool all_match() const;
};

/// The self-consistency test: with delta* induced by f's own pushforward,
/// f attains the smallest idem objective any map could reach.
bool is_fixed_point(const FiniteIGN& m, Rational lambda_t);

/// Every map of an N <= 6 space that is a fixed point, in map-index order
/// (map[0] least significant).
SearchResult fixed_point_search(const DistanceMatrix& space, const Distribution& p_z, const Distribution& p_x,
                                Rational lambda_t);
constexpr std::size_t kMaxExhaustive = 6;

/// The same test on `samples` uniformly drawn maps; for spaces too large to
/// enumerate. Fixed points are deduplicated.
SearchResult sampled_fixed_point_search(const DistanceMatrix& space, const Distribution& p_z,
                                        const Distribution& p_x, Rational lambda_t, std::uint64_t samples,
                                        std::uint64_t seed);

/// Human-readable listing of every fixed point and a PASS/FAIL verdict on
/// P_theta* = P_x. Above lambda_t = 1 the verdict is informational.
std::string format_report(const SearchResult& r);
void write_report(const std::filesystem::path& path, const SearchResult& r);

}  // namespace ign::theory
