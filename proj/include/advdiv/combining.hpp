#pragma once

// Receiver diversity combining: SC, EGC, DGC and PGC branch weights.

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "advdiv/channel.hpp"
#include "advdiv/error.hpp"
#include "advdiv/frontend.hpp"

namespace advdiv {

enum class CombinerKind { SC, EGC, DGC, PGC };

inline constexpr std::array<CombinerKind, 4> kAllCombiners{CombinerKind::SC, CombinerKind::EGC,
                                                          CombinerKind::DGC, CombinerKind::PGC};

constexpr std::string_view to_string(CombinerKind kind) {
  switch (kind) {
    case CombinerKind::SC: return "sc";
    case CombinerKind::EGC: return "egc";
    case CombinerKind::DGC: return "dgc";
    case CombinerKind::PGC: return "pgc";
  }
  return "?";
}

inline CombinerKind parse_combiner(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  for (auto kind : kAllCombiners) {
    if (lower == to_string(kind)) return kind;
  }
  throw ConfigError("unknown combiner '" + std::string(text) + "'");
}

struct Weights {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t j) const { return values[j]; }
};

/// Std of the transverse flow displacement accumulated over the nominal
/// flight time to the main receiver: sigma_vy * sqrt(T_flight * dt).
inline double default_transverse_std(const ChannelParams& params, const Geometry& geometry) {
  if (!(params.mean_vel.x > 0.0)) throw ConfigError("transverse std needs a positive mean x velocity");
  const double flight = std::abs(geometry.main_rx().x - geometry.tx_pos.x) / params.mean_vel.x;
  return params.std_vel.y * std::sqrt(flight / params.f_sim);
}

namespace detail {
inline Weights normalized(std::vector<double> raw, const char* what) {
  double total = 0.0;
  for (double v : raw) total += v;
  if (!(total > 0.0) || !std::isfinite(total)) throw NumericalError(std::string(what) + " weights are degenerate");
  for (double& v : raw) v /= total;
  return {std::move(raw)};
}
}  // namespace detail

/// Normalized, nonnegative branch weights.
///
/// DGC evaluates a zero-mean Gaussian of std `transverse_std` at each
/// receiver's transverse offset from the main receiver. PGC weights are
/// proportional to the raw pilot energies.
inline Weights compute_weights(CombinerKind kind, const Geometry& geometry,
                               std::span<const double> pilot_energies, double transverse_std,
                               std::size_t main_index = 0) {
  const std::size_t n_rx = geometry.rx_pos.size();
  if (n_rx == 0) throw ConfigError("combining needs at least one receiver");
  if (main_index >= n_rx) throw BoundsError("main receiver index out of range");

  switch (kind) {
    case CombinerKind::SC: {
      std::vector<double> w(n_rx, 0.0);
      w[main_index] = 1.0;
      return {std::move(w)};
    }
    case CombinerKind::EGC:
      return {std::vector<double>(n_rx, 1.0 / static_cast<double>(n_rx))};
    case CombinerKind::DGC: {
      if (!(transverse_std > 0.0) || !std::isfinite(transverse_std)) {
        throw NumericalError("DGC needs a positive transverse std");
      }
      const double y_main = geometry.rx_pos[main_index].y;
      std::vector<double> raw(n_rx);
      for (std::size_t j = 0; j < n_rx; ++j) {
        const double u = (geometry.rx_pos[j].y - y_main) / transverse_std;
        raw[j] = std::exp(-0.5 * u * u);
      }
      return detail::normalized(std::move(raw), "DGC");
    }
    case CombinerKind::PGC: {
      if (pilot_energies.size() != n_rx) throw ConfigError("PGC needs one pilot energy per receiver");
      for (double e : pilot_energies) {
        if (!(e >= 0.0)) throw NumericalError("pilot energies must be >= 0");
      }
      return detail::normalized({pilot_energies.begin(), pilot_energies.end()}, "PGC");
    }
  }
  throw ConfigError("unknown combiner");
}

/// Per symbol, sum_j weights[j] * w_{j,k}. Zero-weight branches are skipped.
inline SymbolVectors combine(std::span<const SymbolVectors> branches, const Weights& weights) {
  if (branches.empty() || branches.size() != weights.size()) throw ConfigError("combiner shape mismatch");
  const auto& first = branches.front();
  for (const auto& b : branches) {
    if (b.size() != first.size() || b.dim() != first.dim()) throw ConfigError("combiner shape mismatch");
  }
  SymbolVectors out(first.size(), first.dim());
  auto acc = out.flat();
  for (std::size_t j = 0; j < branches.size(); ++j) {
    const double w = weights[j];
    if (w == 0.0) continue;
    const auto src = branches[j].flat();
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += w * src[i];
  }
  return out;
}

/// CSV rows `trial,combiner,rx,weight` (header written by the caller).
inline void write_weight_rows(std::ostream& os, std::size_t trial, CombinerKind kind, const Weights& weights) {
  char buf[32];
  for (std::size_t j = 0; j < weights.size(); ++j) {
    std::snprintf(buf, sizeof buf, "%.12g", weights[j]);
    os << trial << ',' << to_string(kind) << ',' << j << ',' << buf << '\n';
  }
}

}  // namespace advdiv
