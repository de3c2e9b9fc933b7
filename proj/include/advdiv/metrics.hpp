#pragma once

// Detection and error statistics.

#include <algorithm>
#include <bit>
#include <cmath>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "advdiv/error.hpp"
#include "advdiv/frontend.hpp"
#include "advdiv/modem.hpp"

namespace advdiv {

/// Nearest amplitude level per dimension (clamped, ties round up), which is
/// minimum-distance detection on the rectangular grid.
inline std::size_t slice(std::span<const double> vector, const Constellation& constellation) {
  if (vector.size() != static_cast<std::size_t>(constellation.n_dim())) throw ConfigError("slicer dimension mismatch");
  const int top = constellation.m_levels() - 1;
  std::size_t index = 0;
  for (std::size_t i = vector.size(); i-- > 0;) {
    const double v = vector[i];
    if (!std::isfinite(v)) throw NumericalError("non-finite value at the slicer");
    const double level = std::clamp(std::floor(v + 0.5), 0.0, static_cast<double>(top));
    index = index * static_cast<std::size_t>(constellation.m_levels()) + static_cast<std::size_t>(level);
  }
  return index;
}

inline std::vector<std::size_t> slice_all(const SymbolVectors& vectors, const Constellation& constellation) {
  std::vector<std::size_t> out(vectors.size());
  for (std::size_t k = 0; k < vectors.size(); ++k) out[k] = slice(vectors[k], constellation);
  return out;
}

constexpr unsigned gray_encode(unsigned level) { return level ^ (level >> 1); }

struct DetectionResult {
  std::vector<std::size_t> decided_indices;
  std::size_t symbol_errors = 0;
  std::size_t bit_errors = 0;
  std::size_t n_bits = 0;
  double ser = 0.0;
  std::optional<double> ber;  // only when M is a power of two
};

/// SER, and BER under a per-dimension Gray labelling when M is a power of two.
inline DetectionResult error_rates(std::span<const std::size_t> decided, std::span<const std::size_t> truth,
                                   const ModScheme& scheme) {
  if (decided.size() != truth.size()) throw ConfigError("decided and truth lengths differ");
  const Constellation constellation(scheme.n_dim, scheme.m_levels);
  DetectionResult r;
  r.decided_indices.assign(decided.begin(), decided.end());
  const bool with_bits = scheme.bits_defined();
  for (std::size_t k = 0; k < decided.size(); ++k) {
    if (decided[k] != truth[k]) ++r.symbol_errors;
    if (!with_bits) continue;
    for (int d = 0; d < scheme.n_dim; ++d) {
      const auto a = gray_encode(static_cast<unsigned>(constellation.level(decided[k], d)));
      const auto b = gray_encode(static_cast<unsigned>(constellation.level(truth[k], d)));
      r.bit_errors += static_cast<std::size_t>(std::popcount(a ^ b));
    }
  }
  if (!decided.empty()) r.ser = static_cast<double>(r.symbol_errors) / static_cast<double>(decided.size());
  if (with_bits) {
    r.n_bits = decided.size() * static_cast<std::size_t>(scheme.n_dim * scheme.bits_per_dim());
    r.ber = r.n_bits == 0 ? 0.0 : static_cast<double>(r.bit_errors) / static_cast<double>(r.n_bits);
  }
  return r;
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double v) const { return v >= lo && v <= hi; }
  bool overlaps(const Interval& o) const { return lo <= o.hi && o.lo <= hi; }
  double half_width() const { return 0.5 * (hi - lo); }
};

/// Wilson score interval for a binomial proportion (z = 1.96 by default).
inline Interval wilson_interval(std::size_t successes, std::size_t trials, double z = 1.959963984540054) {
  if (trials == 0) return {0.0, 1.0};
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double centre = (p + z2 / (2 * n)) / (1 + z2 / n);
  const double half = z * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / (1 + z2 / n);
  return {successes == 0 ? 0.0 : std::max(0.0, centre - half),
          successes == trials ? 1.0 : std::min(1.0, centre + half)};
}

/// Student-t interval on the mean of independent per-frame rates, clamped to [0, 1].
inline Interval mean_interval(std::span<const double> samples, double confidence = 0.95) {
  if (samples.empty()) return {0.0, 1.0};
  const double n = static_cast<double>(samples.size());
  double mean = 0.0;
  for (double s : samples) mean += s;
  mean /= n;
  if (samples.size() == 1) return {mean, mean};
  double var = 0.0;
  for (double s : samples) var += (s - mean) * (s - mean);
  var /= n - 1;
  const boost::math::students_t dist(n - 1);
  const double t = boost::math::quantile(boost::math::complement(dist, (1 - confidence) / 2));
  const double half = t * std::sqrt(var / n);
  return {std::max(0.0, mean - half), std::min(1.0, mean + half)};
}

struct SignTest {
  std::size_t wins = 0;    // a < b
  std::size_t losses = 0;  // a > b
  std::size_t ties = 0;
  double p_value = 1.0;    // one-sided, H1: a tends to be smaller
};

/// Paired one-sided sign test that `a` is smaller than `b`; ties are dropped.
inline SignTest sign_test_less(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ConfigError("sign test needs paired samples");
  SignTest t;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < b[i]) ++t.wins;
    else if (a[i] > b[i]) ++t.losses;
    else ++t.ties;
  }
  const std::size_t n = t.wins + t.losses;
  if (n == 0) return t;
  const boost::math::binomial dist(static_cast<double>(n), 0.5);
  // P(X >= wins)
  t.p_value = t.wins == 0 ? 1.0 : boost::math::cdf(boost::math::complement(dist, static_cast<double>(t.wins) - 1.0));
  return t;
}

/// Largest grid position whose structured probability is >= 1 - delta,
/// scanning outward from y_grid[0] = 0 and stopping at the first failure.
template <typename ProbabilityAt>
double critical_distance(std::span<const double> y_grid, double delta, ProbabilityAt&& probability_at) {
  if (y_grid.empty()) throw ConfigError("critical distance needs a nonempty grid");
  if (!std::is_sorted(y_grid.begin(), y_grid.end())) throw ConfigError("y grid must be sorted ascending");
  double y_c = 0.0;
  for (double y : y_grid) {
    if (probability_at(y) < 1.0 - delta) break;
    y_c = std::abs(y);
  }
  return y_c;
}

}  // namespace advdiv
