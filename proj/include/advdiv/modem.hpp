#pragma once

// Orthogonal rectangular-pulse amplitude modulation.
//
// A symbol of duration t_sym is split into n_dim disjoint subintervals; each
// subinterval carries one of m_levels nonnegative amplitudes {0, ..., M-1}.
// Constellation indices are lexicographic with dimension 0 varying fastest,
// so (N, M) = (2, 4) enumerates (0,0), (1,0), (2,0), (3,0), (0,1), ...

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "advdiv/error.hpp"
#include "advdiv/random.hpp"

namespace advdiv {

inline constexpr std::size_t kDefaultConstellationCap = 4096;

/// Converts a duration to an integer tick count, rejecting non-integral products.
inline std::int64_t exact_ticks(double seconds, double rate, const char* what) {
  const double ticks = seconds * rate;
  const double rounded = std::round(ticks);
  if (!std::isfinite(ticks) || std::abs(ticks - rounded) > 1e-9 * std::max(1.0, std::abs(ticks))) {
    throw ConfigError(std::string(what) + " is not an integer number of ticks");
  }
  return static_cast<std::int64_t>(rounded);
}

/// First tick of subinterval `dim` when a symbol spans `ticks_per_symbol` ticks.
/// Tick n lies in subinterval i iff i*T/N <= n < (i+1)*T/N.
constexpr std::int64_t subinterval_start(std::int64_t ticks_per_symbol, int n_dim, int dim) {
  return (static_cast<std::int64_t>(dim) * ticks_per_symbol + n_dim - 1) / n_dim;
}

struct ModScheme {
  int n_dim = 2;
  int m_levels = 4;
  double t_sym = 2.0;

  void validate() const {
    if (n_dim < 1) throw ConfigError("scheme.n_dim must be >= 1");
    if (m_levels < 1) throw ConfigError("scheme.m_levels must be >= 1");
    if (!(t_sym > 0.0) || !std::isfinite(t_sym)) throw ConfigError("scheme.t_sym must be > 0");
  }

  /// Ticks per symbol at `rate`; every subinterval must hold at least one tick.
  std::int64_t ticks_per_symbol(double rate) const {
    const auto ticks = exact_ticks(t_sym, rate, "scheme.t_sym");
    if (ticks < n_dim) throw ConfigError("symbol shorter than one tick per dimension");
    return ticks;
  }

  bool bits_defined() const { return m_levels >= 2 && (m_levels & (m_levels - 1)) == 0; }

  int bits_per_dim() const {
    int bits = 0;
    while ((1 << bits) < m_levels) ++bits;
    return bits;
  }

  friend bool operator==(const ModScheme&, const ModScheme&) = default;
};

class Constellation {
 public:
  Constellation(int n_dim, int m_levels, std::size_t cap = kDefaultConstellationCap)
      : n_dim_(n_dim), m_levels_(m_levels) {
    if (n_dim < 1 || m_levels < 1) throw ConfigError("constellation needs n_dim >= 1 and m_levels >= 1");
    std::size_t count = 1;
    for (int i = 0; i < n_dim; ++i) {
      count *= static_cast<std::size_t>(m_levels);
      if (count > cap) {
        throw ConfigError("constellation size M^N exceeds cap of " + std::to_string(cap));
      }
    }
    size_ = count;
  }

  int n_dim() const { return n_dim_; }
  int m_levels() const { return m_levels_; }
  std::size_t size() const { return size_; }

  /// Amplitude level of `dim` for constellation point `index`.
  int level(std::size_t index, int dim) const {
    for (int i = 0; i < dim; ++i) index /= static_cast<std::size_t>(m_levels_);
    return static_cast<int>(index % static_cast<std::size_t>(m_levels_));
  }

  std::vector<int> point(std::size_t index) const {
    if (index >= size_) throw BoundsError("constellation index out of range");
    std::vector<int> levels(static_cast<std::size_t>(n_dim_));
    for (auto& l : levels) {
      l = static_cast<int>(index % static_cast<std::size_t>(m_levels_));
      index /= static_cast<std::size_t>(m_levels_);
    }
    return levels;
  }

  template <typename Levels>
  std::size_t index_of(const Levels& levels) const {
    std::size_t index = 0;
    for (int i = n_dim_ - 1; i >= 0; --i) {
      const int l = levels[static_cast<std::size_t>(i)];
      if (l < 0 || l >= m_levels_) throw BoundsError("amplitude level out of range");
      index = index * static_cast<std::size_t>(m_levels_) + static_cast<std::size_t>(l);
    }
    return index;
  }

  std::vector<std::vector<int>> points() const {
    std::vector<std::vector<int>> all;
    all.reserve(size_);
    for (std::size_t i = 0; i < size_; ++i) all.push_back(point(i));
    return all;
  }

 private:
  int n_dim_;
  int m_levels_;
  std::size_t size_ = 0;
};

inline Constellation build_constellation(int n_dim, int m_levels,
                                         std::size_t cap = kDefaultConstellationCap) {
  return Constellation(n_dim, m_levels, cap);
}

/// Value of rectangular pulse `dim` at time t in [0, t_sym).
inline int pulse_value(int dim, double t, const ModScheme& scheme) {
  if (dim < 0 || dim >= scheme.n_dim) throw BoundsError("pulse index out of range");
  if (t < 0.0 || t >= scheme.t_sym) throw BoundsError("time outside the symbol interval");
  const double width = scheme.t_sym / scheme.n_dim;
  return (t >= dim * width && t < (dim + 1) * width) ? 1 : 0;
}

struct Frame {
  ModScheme scheme;
  std::vector<std::size_t> pilot_symbols;
  std::vector<std::size_t> data_symbols;
  std::uint64_t pilot_seed = 0;

  std::size_t size() const { return pilot_symbols.size() + data_symbols.size(); }

  std::size_t symbol(std::size_t k) const {
    return k < pilot_symbols.size() ? pilot_symbols[k] : data_symbols[k - pilot_symbols.size()];
  }
};

inline std::size_t draw_symbol(Rng& rng, std::size_t constellation_size) {
  std::uniform_int_distribution<std::size_t> dist(0, constellation_size - 1);
  return dist(rng);
}

/// Pilots come from their own stream seeded by pilot_seed; data from data_rng.
inline Frame generate_frame(const ModScheme& scheme, std::size_t n_pilot, std::size_t n_data,
                            std::uint64_t pilot_seed, Rng& data_rng) {
  const Constellation constellation(scheme.n_dim, scheme.m_levels);
  Frame frame{scheme, {}, {}, pilot_seed};
  Rng pilot_rng(pilot_seed);
  frame.pilot_symbols.reserve(n_pilot);
  for (std::size_t k = 0; k < n_pilot; ++k) {
    frame.pilot_symbols.push_back(draw_symbol(pilot_rng, constellation.size()));
  }
  frame.data_symbols.reserve(n_data);
  for (std::size_t k = 0; k < n_data; ++k) {
    frame.data_symbols.push_back(draw_symbol(data_rng, constellation.size()));
  }
  return frame;
}

/// Emission rate per channel tick (molecules per second), tick n covers [n*dt, (n+1)*dt).
struct EmissionSchedule {
  std::vector<double> amplitudes;
  double frame_duration = 0.0;
};

inline EmissionSchedule frame_to_emission(const Frame& frame, double f_sim, double emission_scale) {
  const Constellation constellation(frame.scheme.n_dim, frame.scheme.m_levels);
  const auto ticks = frame.scheme.ticks_per_symbol(f_sim);
  const int n_dim = frame.scheme.n_dim;

  EmissionSchedule schedule;
  schedule.frame_duration = static_cast<double>(frame.size()) * frame.scheme.t_sym;
  schedule.amplitudes.assign(frame.size() * static_cast<std::size_t>(ticks), 0.0);
  for (std::size_t k = 0; k < frame.size(); ++k) {
    const std::size_t index = frame.symbol(k);
    auto* symbol_start = schedule.amplitudes.data() + k * static_cast<std::size_t>(ticks);
    for (int dim = 0; dim < n_dim; ++dim) {
      const double amplitude = constellation.level(index, dim) * emission_scale;
      const auto begin = subinterval_start(ticks, n_dim, dim);
      const auto end = subinterval_start(ticks, n_dim, dim + 1);
      for (auto n = begin; n < end; ++n) symbol_start[n] = amplitude;
    }
  }
  return schedule;
}

}  // namespace advdiv
