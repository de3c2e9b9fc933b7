#pragma once

// Monte Carlo orchestration: one trial is one full frame transmission.
//
// A trial is split in two stages so sweeps can reuse the expensive part:
//   simulate_channel  frame generation + noiseless propagation (SNR independent)
//   detect            noise, matched filtering, combining, AGC/MMSE, slicing
// Every random stream is derived from (master_seed, trial_index, purpose), so
// all combiners and all SNR points of a trial share one channel realization.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "advdiv/channel.hpp"
#include "advdiv/combining.hpp"
#include "advdiv/config.hpp"
#include "advdiv/dsp.hpp"
#include "advdiv/error.hpp"
#include "advdiv/frontend.hpp"
#include "advdiv/metrics.hpp"
#include "advdiv/modem.hpp"
#include "advdiv/random.hpp"

namespace advdiv {

/// Runs fn(0..n-1) on up to `threads` workers; results are returned in index
/// order so the outcome never depends on scheduling. The exception of the
/// lowest failing index is rethrown.
template <typename Fn>
auto parallel_map(std::size_t n, std::size_t threads, Fn&& fn) {
  using Result = decltype(fn(std::size_t{0}));
  std::vector<std::optional<Result>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        slots[i].emplace(fn(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<Result> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

namespace detail {
template <typename Fn>
auto with_trial_context(std::size_t trial_index, Fn&& fn) {
  const auto prefix = "trial " + std::to_string(trial_index) + ": ";
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError(prefix + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(prefix + e.what());
  } catch (const BoundsError& e) {
    throw BoundsError(prefix + e.what());
  }
}
}  // namespace detail

struct TrialChannel {
  std::size_t trial_index = 0;
  Frame frame;
  std::vector<ConcentrationTrace> noiseless;  // receiver rate, one per receiver
  double sync_offset = 0.0;
  std::size_t pilot_begin = 0;  // receiver-rate sample span used for SNR calibration
  std::size_t pilot_end = 0;
};

inline double sync_offset_for(const SimConfig& config) {
  return config.sync_offset.value_or(default_sync_offset(config.geometry, config.channel));
}

inline TrialChannel simulate_channel(const SimConfig& config, std::size_t trial_index) {
  return detail::with_trial_context(trial_index, [&] {
    TrialChannel ch;
    ch.trial_index = trial_index;
    Rng data_rng = make_stream(config.master_seed, trial_index, StreamPurpose::data);
    ch.frame = generate_frame(config.scheme, config.n_pilot, config.n_data, config.pilot_seed, data_rng);
    const auto schedule = frame_to_emission(ch.frame, config.channel.f_sim, config.channel.emission_scale);

    Rng velocity_rng = make_stream(config.master_seed, trial_index, StreamPurpose::velocity);
    const auto stride = static_cast<std::size_t>(config.channel.decimation());
    ch.noiseless = propagate_frame(schedule, config.geometry, config.channel, velocity_rng, stride);

    ch.sync_offset = sync_offset_for(config);
    const auto per_symbol = config.scheme.ticks_per_symbol(config.channel.f_rx);
    ch.pilot_begin = static_cast<std::size_t>(exact_ticks(ch.sync_offset, config.channel.f_rx, "sync offset"));
    ch.pilot_end = ch.pilot_begin + config.n_pilot * static_cast<std::size_t>(per_symbol);
    return ch;
  });
}

struct CombinerOutcome {
  CombinerKind kind = CombinerKind::SC;
  Weights weights;
  DetectionResult detection;
  SymbolVectors equalized;  // data symbols, filled on request
};

struct TrialResult {
  std::size_t trial_index = 0;
  double snr_db = 0.0;
  double noise_std = 0.0;
  std::vector<double> pilot_energies;
  std::vector<std::size_t> truth;  // data symbols
  std::vector<CombinerOutcome> combiners;

  const CombinerOutcome& outcome(CombinerKind kind) const {
    for (const auto& c : combiners) {
      if (c.kind == kind) return c;
    }
    throw ConfigError("combiner not part of this trial");
  }
};

/// Raw matched-filter observations of the first `n_rx` receivers at `snr_db`.
inline std::vector<ReceiverObservation> noisy_observations(const SimConfig& config, const TrialChannel& ch,
                                                           double snr_db, std::size_t n_rx,
                                                           double* noise_std_out = nullptr) {
  const double noise_std = calibrate_noise_std(ch.noiseless.front(), snr_db, ch.pilot_begin, ch.pilot_end);
  if (noise_std_out) *noise_std_out = noise_std;
  std::vector<ReceiverObservation> obs;
  obs.reserve(n_rx);
  for (std::size_t j = 0; j < n_rx; ++j) {
    Rng noise_rng = make_stream(config.master_seed, ch.trial_index, StreamPurpose::noise, j);
    const auto noisy = add_noise(ch.noiseless[j], noise_std, noise_rng);
    obs.push_back(observe(noisy, config.scheme, ch.sync_offset, ch.frame.size(), config.n_pilot, j));
  }
  return obs;
}

namespace detail {

inline SymbolVectors equalize(const SimConfig& config, const SymbolVectors& vectors, const SymbolVectors& pilot_truth) {
  if (config.equalizer == EqualizerKind::none) return vectors;
  const auto eq = train_mmse(vectors.slice(0, config.n_pilot), pilot_truth, config.ridge, config.equalizer_bias);
  return apply_equalizer(eq, vectors);
}

}  // namespace detail

/// Detection chain on one channel realization using its first `n_rx` receivers.
inline TrialResult detect(const SimConfig& config, const TrialChannel& ch, double snr_db,
                          std::optional<std::size_t> n_rx = std::nullopt, bool keep_vectors = false) {
  return detail::with_trial_context(ch.trial_index, [&] {
    const std::size_t receivers = n_rx.value_or(ch.noiseless.size());
    if (receivers < 1 || receivers > ch.noiseless.size()) throw ConfigError("receiver count out of range");

    Geometry geometry = config.geometry;
    geometry.rx_pos.resize(receivers);
    const Constellation constellation(config.scheme.n_dim, config.scheme.m_levels);
    const auto pilot_truth = amplitudes_of(constellation, ch.frame.pilot_symbols);

    TrialResult result;
    result.trial_index = ch.trial_index;
    result.snr_db = snr_db;
    result.truth = ch.frame.data_symbols;
    const auto obs = noisy_observations(config, ch, snr_db, receivers, &result.noise_std);
    for (const auto& o : obs) result.pilot_energies.push_back(o.pilot_energy);

    const double transverse_std = config.dgc_std.value_or(default_transverse_std(config.channel, geometry));
    const std::size_t n_total = ch.frame.size();

    for (auto kind : config.combiners) {
      CombinerOutcome outcome;
      outcome.kind = kind;
      outcome.weights = compute_weights(kind, geometry, result.pilot_energies, transverse_std);

      std::vector<SymbolVectors> branches;
      branches.reserve(receivers);
      for (std::size_t j = 0; j < receivers; ++j) {
        SymbolVectors w = obs[j].symbol_vectors;
        if (outcome.weights[j] != 0.0) {
          if (config.agc_placement == Placement::per_receiver) w = agc(w, pilot_truth, config.n_pilot).vectors;
          if (config.equalizer_placement == Placement::per_receiver) w = detail::equalize(config, w, pilot_truth);
        }
        branches.push_back(std::move(w));
      }
      SymbolVectors combined = combine(branches, outcome.weights);
      if (config.agc_placement == Placement::post_combining) {
        combined = agc(combined, pilot_truth, config.n_pilot).vectors;
      }
      if (config.equalizer_placement == Placement::post_combining) {
        combined = detail::equalize(config, combined, pilot_truth);
      }

      SymbolVectors data = combined.slice(config.n_pilot, n_total);
      const auto decided = slice_all(data, constellation);
      outcome.detection = error_rates(decided, ch.frame.data_symbols, config.scheme);
      if (keep_vectors) outcome.equalized = std::move(data);
      result.combiners.push_back(std::move(outcome));
    }
    return result;
  });
}

inline TrialResult run_trial(const SimConfig& config, std::size_t trial_index, bool keep_vectors = false) {
  const auto ch = simulate_channel(config, trial_index);
  return detect(config, ch, config.snr_db, std::nullopt, keep_vectors);
}

/// Aggregated error rates of one combiner at one operating point.
struct ErrorRateRow {
  CombinerKind combiner = CombinerKind::SC;
  double snr_db = 0.0;
  std::size_t n_rx = 1;
  double ser = 0.0;
  std::optional<double> ber;
  std::size_t n_data = 0;
  std::size_t n_trials = 0;
  Interval ser_ci;
  std::optional<Interval> ber_ci;
  std::vector<double> trial_ser;
  std::vector<double> trial_ber;
};

namespace detail {

inline ErrorRateRow aggregate(CombinerKind kind, double snr_db, std::size_t n_rx,
                              std::span<const DetectionResult* const> trials) {
  ErrorRateRow row;
  row.combiner = kind;
  row.snr_db = snr_db;
  row.n_rx = n_rx;
  row.n_trials = trials.size();
  std::size_t symbol_errors = 0, symbols = 0, bit_errors = 0, bits = 0;
  bool with_bits = true;
  for (const auto* d : trials) {
    symbol_errors += d->symbol_errors;
    symbols += d->decided_indices.size();
    row.trial_ser.push_back(d->ser);
    if (d->ber) {
      bit_errors += d->bit_errors;
      bits += d->n_bits;
      row.trial_ber.push_back(*d->ber);
    } else {
      with_bits = false;
    }
  }
  row.n_data = trials.empty() ? 0 : trials.front()->decided_indices.size();
  row.ser = symbols ? static_cast<double>(symbol_errors) / static_cast<double>(symbols) : 0.0;
  row.ser_ci = mean_interval(row.trial_ser);
  if (with_bits) {
    row.ber = bits ? static_cast<double>(bit_errors) / static_cast<double>(bits) : 0.0;
    row.ber_ci = mean_interval(row.trial_ber);
  } else {
    row.trial_ber.clear();
  }
  return row;
}

inline std::vector<ErrorRateRow> aggregate_point(const SimConfig& config, double snr_db, std::size_t n_rx,
                                                 std::span<const TrialResult* const> trials) {
  std::vector<ErrorRateRow> rows;
  for (std::size_t c = 0; c < config.combiners.size(); ++c) {
    std::vector<const DetectionResult*> per_trial;
    for (const auto* t : trials) per_trial.push_back(&t->combiners[c].detection);
    rows.push_back(aggregate(config.combiners[c], snr_db, n_rx, per_trial));
  }
  return rows;
}

}  // namespace detail

/// Error rates at config.snr_db averaged over config.n_trials frames, plus the trials themselves.
struct SingleRun {
  std::vector<TrialResult> trials;
  std::vector<ErrorRateRow> rows;
};

inline SingleRun single_run(const SimConfig& config) {
  SingleRun run;
  run.trials = parallel_map(config.n_trials, config.threads, [&](std::size_t t) { return run_trial(config, t); });
  std::vector<const TrialResult*> ptrs;
  for (const auto& t : run.trials) ptrs.push_back(&t);
  run.rows = detail::aggregate_point(config, config.snr_db, config.geometry.rx_pos.size(), ptrs);
  return run;
}

/// Rows ordered SNR-major, then in config.combiners order.
inline std::vector<ErrorRateRow> sweep_snr(const SimConfig& config, std::span<const double> snr_list) {
  if (snr_list.empty()) throw ConfigError("SNR list must not be empty");
  auto per_trial = parallel_map(config.n_trials, config.threads, [&](std::size_t t) {
    const auto ch = simulate_channel(config, t);
    std::vector<TrialResult> results;
    for (double snr : snr_list) results.push_back(detect(config, ch, snr));
    return results;
  });
  std::vector<ErrorRateRow> rows;
  for (std::size_t s = 0; s < snr_list.size(); ++s) {
    std::vector<const TrialResult*> ptrs;
    for (const auto& t : per_trial) ptrs.push_back(&t[s]);
    auto point = detail::aggregate_point(config, snr_list[s], config.geometry.rx_pos.size(), ptrs);
    rows.insert(rows.end(), point.begin(), point.end());
  }
  return rows;
}

/// Receivers at y_main + {0, +dy, -dy, +2dy, -2dy, ...} on the main receiver's x and z.
inline Geometry symmetric_geometry(const Geometry& base, std::size_t n_rx, double delta_y) {
  Geometry g{base.tx_pos, {}};
  const Vec3 main = base.main_rx();
  for (std::size_t j = 0; j < n_rx; ++j) {
    const double k = static_cast<double>((j + 1) / 2);
    const double sign = (j % 2 == 1) ? 1.0 : -1.0;
    g.rx_pos.push_back(Vec3{main.x, main.y + sign * k * delta_y, main.z});
  }
  return g;
}

/// Rows ordered by n_rx, then combiner. Each trial is propagated once with the
/// largest array; smaller arrays use its leading receivers.
inline std::vector<ErrorRateRow> sweep_nrx(const SimConfig& config, std::span<const std::size_t> nrx_list,
                                           double delta_y) {
  if (nrx_list.empty()) throw ConfigError("receiver-count list must not be empty");
  for (auto n : nrx_list) {
    if (n < 1 || n % 2 == 0) throw ConfigError("receiver counts must be odd and >= 1");
  }
  if (!(delta_y > 0.0)) throw ConfigError("receiver spacing must be > 0");
  SimConfig wide = config;
  wide.geometry = symmetric_geometry(config.geometry, *std::max_element(nrx_list.begin(), nrx_list.end()), delta_y);

  auto per_trial = parallel_map(config.n_trials, config.threads, [&](std::size_t t) {
    const auto ch = simulate_channel(wide, t);
    std::vector<TrialResult> results;
    for (auto n : nrx_list) results.push_back(detect(wide, ch, config.snr_db, n));
    return results;
  });
  std::vector<ErrorRateRow> rows;
  for (std::size_t i = 0; i < nrx_list.size(); ++i) {
    std::vector<const TrialResult*> ptrs;
    for (const auto& t : per_trial) ptrs.push_back(&t[i]);
    auto point = detail::aggregate_point(config, config.snr_db, nrx_list[i], ptrs);
    rows.insert(rows.end(), point.begin(), point.end());
  }
  return rows;
}

/// Pilot energy ratio rho = E_probe / E_main for n_mc independent pilot-only
/// transmissions with a probe receiver at (main.x, y, main.z). A probe on the
/// main receiver is the main receiver itself, so rho = 1.
inline std::vector<double> pilot_energy_ratios(const SimConfig& config, double y, std::size_t n_mc,
                                               std::uint64_t master_seed) {
  if (n_mc < 1) throw ConfigError("n_mc must be >= 1");
  SimConfig probe = config;
  probe.master_seed = master_seed;
  probe.n_data = 0;
  const Vec3 main = config.geometry.main_rx();
  const Vec3 probe_pos{main.x, y, main.z};
  const bool self = probe_pos == main;
  probe.geometry.rx_pos = self ? std::vector<Vec3>{main} : std::vector<Vec3>{main, probe_pos};
  probe.validate();

  return parallel_map(n_mc, config.threads, [&](std::size_t t) {
    const auto ch = simulate_channel(probe, t);
    return detail::with_trial_context(t, [&] {
      const auto obs = noisy_observations(probe, ch, probe.snr_db, probe.geometry.rx_pos.size());
      return pilot_energy_ratio(obs.back().pilot_energy, obs.front().pilot_energy);
    });
  });
}

inline double fraction_at_least(std::span<const double> values, double threshold) {
  if (values.empty()) return 0.0;
  const auto hits = std::count_if(values.begin(), values.end(), [&](double v) { return v >= threshold; });
  return static_cast<double>(hits) / static_cast<double>(values.size());
}

inline double structured_probability(const SimConfig& config, double y, double eta, std::size_t n_mc,
                                     std::uint64_t master_seed) {
  const auto rho = pilot_energy_ratios(config, y, n_mc, master_seed);
  return fraction_at_least(rho, eta);
}

struct ScanRow {
  double y = 0.0;
  double p_hat = 0.0;
  Interval ci;
  std::size_t n_mc = 0;
  double eta = 0.0;
  double target = 0.0;  // 1 - delta
  std::vector<double> rho;
};

/// Trials share seeds across positions (common random numbers).
inline std::vector<ScanRow> structured_scan(const SimConfig& config, std::span<const double> y_grid, double eta,
                                            double delta, std::size_t n_mc) {
  if (y_grid.empty()) throw ConfigError("y grid must not be empty");
  if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("eta must lie in [0, 1]");
  if (!(delta > 0.0 && delta <= 1.0)) throw ConfigError("delta must lie in (0, 1]");
  std::vector<ScanRow> rows;
  for (double y : y_grid) {
    ScanRow row;
    row.y = y;
    row.rho = pilot_energy_ratios(config, y, n_mc, config.master_seed);
    const auto hits = static_cast<std::size_t>(
        std::count_if(row.rho.begin(), row.rho.end(), [&](double r) { return r >= eta; }));
    row.p_hat = static_cast<double>(hits) / static_cast<double>(n_mc);
    row.ci = wilson_interval(hits, n_mc);
    row.n_mc = n_mc;
    row.eta = eta;
    row.target = 1.0 - delta;
    rows.push_back(std::move(row));
  }
  return rows;
}

inline double critical_distance(const SimConfig& config, double eta, double delta, std::span<const double> y_grid,
                                std::size_t n_mc, std::uint64_t master_seed) {
  if (!y_grid.empty() && y_grid.front() != 0.0) throw ConfigError("y grid must start at 0");
  return critical_distance(y_grid, delta, [&](double y) {
    return structured_probability(config, y, eta, n_mc, master_seed);
  });
}

struct ConstellationPoint {
  std::vector<double> coords;
  std::size_t decided = 0;
  std::size_t truth = 0;
};

/// Equalized data-symbol vectors of one trial for one combiner.
inline std::vector<ConstellationPoint> constellation_dump(const SimConfig& config, CombinerKind kind,
                                                          std::size_t trial_index = 0) {
  SimConfig one = config;
  one.combiners = {kind};
  const auto result = run_trial(one, trial_index, true);
  const auto& outcome = result.combiners.front();
  std::vector<ConstellationPoint> points;
  points.reserve(outcome.equalized.size());
  for (std::size_t k = 0; k < outcome.equalized.size(); ++k) {
    const auto v = outcome.equalized[k];
    points.push_back({{v.begin(), v.end()}, outcome.detection.decided_indices[k], result.truth[k]});
  }
  return points;
}

}  // namespace advdiv
