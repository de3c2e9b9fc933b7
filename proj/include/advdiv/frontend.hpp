#pragma once

// Per-receiver signal path: decimation to the receiver rate, symbol-synchronous
// matched filtering onto the rectangular pulse basis, and pilot energy.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <span>
#include <vector>

#include "advdiv/channel.hpp"
#include "advdiv/error.hpp"
#include "advdiv/modem.hpp"

namespace advdiv {

/// Row-major sequence of N-dimensional symbol vectors.
class SymbolVectors {
 public:
  SymbolVectors() = default;
  SymbolVectors(std::size_t count, std::size_t dim) : dim_(dim), data_(count * dim, 0.0) {}

  std::size_t size() const { return dim_ == 0 ? 0 : data_.size() / dim_; }
  std::size_t dim() const { return dim_; }
  bool empty() const { return data_.empty(); }

  std::span<double> operator[](std::size_t k) { return {data_.data() + k * dim_, dim_}; }
  std::span<const double> operator[](std::size_t k) const { return {data_.data() + k * dim_, dim_}; }

  void push_back(std::span<const double> v) {
    if (dim_ == 0 && data_.empty()) dim_ = v.size();
    if (v.size() != dim_) throw ConfigError("symbol vector dimension mismatch");
    data_.insert(data_.end(), v.begin(), v.end());
  }

  /// Rows [begin, end).
  SymbolVectors slice(std::size_t begin, std::size_t end) const {
    if (begin > end || end > size()) throw BoundsError("symbol slice out of range");
    SymbolVectors out(end - begin, dim_);
    std::copy(data_.begin() + static_cast<std::ptrdiff_t>(begin * dim_),
              data_.begin() + static_cast<std::ptrdiff_t>(end * dim_), out.data_.begin());
    return out;
  }

  std::span<const double> flat() const { return data_; }
  std::span<double> flat() { return data_; }

  friend bool operator==(const SymbolVectors&, const SymbolVectors&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

/// Nominal constellation amplitudes of the given symbols.
inline SymbolVectors amplitudes_of(const Constellation& constellation,
                                   std::span<const std::size_t> symbols) {
  SymbolVectors out(symbols.size(), static_cast<std::size_t>(constellation.n_dim()));
  for (std::size_t k = 0; k < symbols.size(); ++k) {
    for (int d = 0; d < constellation.n_dim(); ++d) {
      out[k][static_cast<std::size_t>(d)] = constellation.level(symbols[k], d);
    }
  }
  return out;
}

/// Keeps every (f_sim / f_rx)-th sample starting at index 0.
inline ConcentrationTrace downsample(const ConcentrationTrace& trace, double f_rx) {
  const double ratio = trace.sample_rate / f_rx;
  const double rounded = std::round(ratio);
  if (!(f_rx > 0.0) || rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * ratio) {
    throw ConfigError("sample rate is not an integer multiple of the receiver rate");
  }
  const auto factor = static_cast<std::size_t>(rounded);
  ConcentrationTrace out{f_rx, {}};
  out.values.reserve((trace.size() + factor - 1) / factor);
  for (std::size_t i = 0; i < trace.size(); i += factor) out.values.push_back(trace.values[i]);
  return out;
}

/// Symbol vectors w_k: the mean of the receiver samples inside each pulse
/// subinterval, starting at `sync_offset` seconds.
inline SymbolVectors matched_filter(const ConcentrationTrace& rx_trace, const ModScheme& scheme,
                                    double sync_offset, std::size_t n_symbols) {
  const auto sync = exact_ticks(sync_offset, rx_trace.sample_rate, "sync offset");
  if (sync < 0) throw ConfigError("sync offset must be >= 0");
  const auto per_symbol = scheme.ticks_per_symbol(rx_trace.sample_rate);
  const auto end = sync + static_cast<std::int64_t>(n_symbols) * per_symbol;
  if (end > static_cast<std::int64_t>(rx_trace.size())) {
    throw BoundsError("matched-filter window exceeds the receiver trace");
  }

  const auto n_dim = static_cast<std::size_t>(scheme.n_dim);
  SymbolVectors out(n_symbols, n_dim);
  for (std::size_t k = 0; k < n_symbols; ++k) {
    const auto base = sync + static_cast<std::int64_t>(k) * per_symbol;
    for (int d = 0; d < scheme.n_dim; ++d) {
      const auto lo = base + subinterval_start(per_symbol, scheme.n_dim, d);
      const auto hi = base + subinterval_start(per_symbol, scheme.n_dim, d + 1);
      double sum = 0.0;
      for (auto i = lo; i < hi; ++i) sum += rx_trace.values[static_cast<std::size_t>(i)];
      out[k][static_cast<std::size_t>(d)] = sum / static_cast<double>(hi - lo);
    }
  }
  return out;
}

/// E_j = sum of squared norms of the first n_pilot symbol vectors.
inline double pilot_energy(const SymbolVectors& vectors, std::size_t n_pilot) {
  if (n_pilot > vectors.size()) throw BoundsError("more pilots than symbol vectors");
  double energy = 0.0;
  for (std::size_t k = 0; k < n_pilot; ++k) {
    for (double v : vectors[k]) energy += v * v;
  }
  return energy;
}

inline double pilot_energy_ratio(double e_j, double e_main) {
  if (!(e_main > 0.0)) throw NumericalError("pilot energy ratio undefined: main receiver energy is zero");
  return e_j / e_main;
}

struct ReceiverObservation {
  std::size_t rx_index = 0;
  SymbolVectors symbol_vectors;
  double pilot_energy = 0.0;
  double sync_offset = 0.0;
};

inline ReceiverObservation observe(const ConcentrationTrace& rx_trace, const ModScheme& scheme,
                                   double sync_offset, std::size_t n_symbols, std::size_t n_pilot,
                                   std::size_t rx_index) {
  ReceiverObservation obs;
  obs.rx_index = rx_index;
  obs.sync_offset = sync_offset;
  obs.symbol_vectors = matched_filter(rx_trace, scheme, sync_offset, n_symbols);
  obs.pilot_energy = pilot_energy(obs.symbol_vectors, n_pilot);
  return obs;
}

/// Nominal flight time to the main receiver rounded to the receiver tick.
inline double default_sync_offset(const Geometry& geometry, const ChannelParams& params) {
  if (!(params.mean_vel.x > 0.0)) throw ConfigError("default sync offset needs a positive mean x velocity");
  const double flight = std::abs(geometry.main_rx().x - geometry.tx_pos.x) / params.mean_vel.x;
  return std::round(flight * params.f_rx) / params.f_rx;
}

/// CSV dump: `rx,symbol_index,dim0,...,dimN-1`.
inline void write_observation_csv(std::ostream& os, std::span<const ReceiverObservation> observations) {
  if (observations.empty()) return;
  os << "rx,symbol_index";
  for (std::size_t d = 0; d < observations.front().symbol_vectors.dim(); ++d) os << ",dim" << d;
  os << '\n';
  char buf[32];
  for (const auto& obs : observations) {
    for (std::size_t k = 0; k < obs.symbol_vectors.size(); ++k) {
      os << obs.rx_index << ',' << k;
      for (double v : obs.symbol_vectors[k]) {
        std::snprintf(buf, sizeof buf, "%.8e", v);
        os << ',' << buf;
      }
      os << '\n';
    }
  }
}

}  // namespace advdiv
