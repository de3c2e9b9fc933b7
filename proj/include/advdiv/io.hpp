#pragma once

// CSV output. Every file starts with one '#' provenance line.

#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <ctime>
#include <ostream>
#include <span>
#include <string>

#include "advdiv/config.hpp"
#include "advdiv/harness.hpp"

namespace advdiv {

inline constexpr const char* kVersion = "0.1.0";

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void write_provenance(std::ostream& os, const SimConfig& config, std::uint64_t seed) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "# advdiv %s config_hash=%016" PRIx64 " seed=%" PRIu64 " generated=%s", kVersion,
                config_hash(config), seed, utc_timestamp().c_str());
  os << buf << '\n';
}

namespace detail {
inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}
inline std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v) : std::string("nan"); }
}  // namespace detail

/// `combiner,snr_db,ser,ber,n_data,n_trials,ser_ci_lo,ser_ci_hi,ber_ci_lo,ber_ci_hi`
/// (prefixed by `n_rx,` when `with_nrx`). BER is `nan` when M is not a power of two.
inline void write_error_rates_csv(std::ostream& os, const SimConfig& config, std::span<const ErrorRateRow> rows,
                                  bool with_nrx = false) {
  write_provenance(os, config, config.master_seed);
  if (with_nrx) os << "n_rx,";
  os << "combiner,snr_db,ser,ber,n_data,n_trials,ser_ci_lo,ser_ci_hi,ber_ci_lo,ber_ci_hi\n";
  using detail::fmt;
  for (const auto& r : rows) {
    if (with_nrx) os << r.n_rx << ',';
    os << to_string(r.combiner) << ',' << fmt(r.snr_db) << ',' << fmt(r.ser) << ',' << detail::fmt_opt(r.ber) << ','
       << r.n_data << ',' << r.n_trials << ',' << fmt(r.ser_ci.lo) << ',' << fmt(r.ser_ci.hi) << ','
       << (r.ber_ci ? fmt(r.ber_ci->lo) : "nan") << ',' << (r.ber_ci ? fmt(r.ber_ci->hi) : "nan") << '\n';
  }
}

inline void write_weights_csv(std::ostream& os, const SimConfig& config, std::span<const TrialResult> trials) {
  write_provenance(os, config, config.master_seed);
  os << "trial,combiner,rx,weight\n";
  for (const auto& t : trials) {
    for (const auto& c : t.combiners) write_weight_rows(os, t.trial_index, c.kind, c.weights);
  }
}

/// `y_m,p_hat,ci_lo,ci_hi,n_mc,eta,target`; target is the 1 - delta level.
inline void write_scan_csv(std::ostream& os, const SimConfig& config, std::span<const ScanRow> rows) {
  write_provenance(os, config, config.master_seed);
  os << "y_m,p_hat,ci_lo,ci_hi,n_mc,eta,target\n";
  using detail::fmt;
  for (const auto& r : rows) {
    os << fmt(r.y) << ',' << fmt(r.p_hat) << ',' << fmt(r.ci.lo) << ',' << fmt(r.ci.hi) << ',' << r.n_mc << ','
       << fmt(r.eta) << ',' << fmt(r.target) << '\n';
  }
}

/// `dim0,...,dimN-1,decided,truth`.
inline void write_constellation_csv(std::ostream& os, const SimConfig& config,
                                    std::span<const ConstellationPoint> points) {
  write_provenance(os, config, config.master_seed);
  for (int d = 0; d < config.scheme.n_dim; ++d) os << "dim" << d << ',';
  os << "decided,truth\n";
  for (const auto& p : points) {
    for (double v : p.coords) os << detail::fmt(v) << ',';
    os << p.decided << ',' << p.truth << '\n';
  }
}

}  // namespace advdiv
