#pragma once

// Time-varying advection-diffusion channel.
//
// The flow is spatially uniform, so a point release of Q molecules at time t0
// is a free-space Gaussian plume whose centre is carried by the accumulated
// flow displacement s(tau):
//
//   c(t) = Q (4 pi D tau)^(-3/2) exp(-|r_rx - r_tx - s(tau)|^2 / (4 D tau)),  tau = t - t0.
//
// Velocities are redrawn i.i.d. every channel tick. All receivers see the same
// velocity realization.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "advdiv/error.hpp"
#include "advdiv/modem.hpp"
#include "advdiv/random.hpp"
#include "advdiv/vec3.hpp"

namespace advdiv {

struct ChannelParams {
  double diffusion_coeff = 6.7698e-6;  // m^2/s
  Vec3 mean_vel{0.5, 0.0, 0.0};        // m/s
  Vec3 std_vel{1e-3, 0.1, 0.0};        // m/s
  double f_sim = 1000.0;               // Hz
  double f_rx = 100.0;                 // Hz
  double t_mem = 30.0;                 // s
  double emission_scale = 1.0;         // molecules per unit amplitude per second
  // Contributions whose plume exponent exceeds this are dropped (exp(-50) ~ 2e-22).
  double prune_exponent = 50.0;

  double dt() const { return 1.0 / f_sim; }

  std::int64_t memory_ticks() const {
    return static_cast<std::int64_t>(std::floor(t_mem * f_sim + 1e-9));
  }

  std::int64_t decimation() const {
    const double ratio = f_sim / f_rx;
    const double rounded = std::round(ratio);
    if (std::abs(ratio - rounded) > 1e-9 * ratio || rounded < 1.0) {
      throw ConfigError("channel.f_sim must be an integer multiple of channel.f_rx");
    }
    return static_cast<std::int64_t>(rounded);
  }

  void validate() const {
    auto finite = [](double v) { return std::isfinite(v); };
    if (!finite(diffusion_coeff) || diffusion_coeff <= 0.0) throw ConfigError("channel.d must be > 0");
    if (!is_finite(mean_vel) || !is_finite(std_vel)) throw ConfigError("channel velocities must be finite");
    if (std_vel.x < 0.0 || std_vel.y < 0.0 || std_vel.z < 0.0) {
      throw ConfigError("channel.std_vel components must be >= 0");
    }
    if (mean_vel.z != 0.0 || std_vel.z != 0.0) throw ConfigError("flow has no z component");
    if (!finite(f_sim) || f_sim <= 0.0) throw ConfigError("channel.f_sim must be > 0");
    if (!finite(f_rx) || f_rx <= 0.0) throw ConfigError("channel.f_rx must be > 0");
    if (!finite(t_mem) || t_mem <= 0.0) throw ConfigError("channel.t_mem must be > 0");
    if (!finite(emission_scale) || emission_scale <= 0.0) {
      throw ConfigError("channel.emission_scale must be > 0");
    }
    if (std::isnan(prune_exponent) || prune_exponent <= 0.0) {
      throw ConfigError("channel.prune_exponent must be > 0");
    }
    decimation();
  }

  friend bool operator==(const ChannelParams&, const ChannelParams&) = default;
};

struct Geometry {
  Vec3 tx_pos{0.0, 0.0, 1.0};
  std::vector<Vec3> rx_pos{{1.0, 0.0, 1.0}};  // index 0 = main receiver

  void validate() const {
    if (rx_pos.empty()) throw ConfigError("geometry needs at least one receiver");
    if (!is_finite(tx_pos)) throw ConfigError("geometry.tx must be finite");
    for (const auto& p : rx_pos) {
      if (!is_finite(p)) throw ConfigError("geometry.rx positions must be finite");
    }
  }

  const Vec3& main_rx() const { return rx_pos.front(); }

  friend bool operator==(const Geometry&, const Geometry&) = default;
};

/// Per-tick flow velocity samples and their running displacement.
///
/// cum_displacement[k] = dt * (samples[0] + ... + samples[k]), i.e. the
/// displacement accumulated by the end of tick k.
struct VelocityTrace {
  double dt = 0.0;
  std::vector<Vec3> samples;
  std::vector<Vec3> cum_displacement;

  std::size_t size() const { return samples.size(); }

  /// Flow position at the start of tick n (n = 0 ... size()).
  Vec3 position(std::size_t n) const {
    if (n > samples.size()) throw BoundsError("velocity trace too short");
    return n == 0 ? Vec3{} : cum_displacement[n - 1];
  }

  /// Displacement accumulated over ticks [from, to).
  Vec3 displacement(std::size_t from, std::size_t to) const { return position(to) - position(from); }
};

inline std::size_t ticks_for(double duration, double rate) {
  return static_cast<std::size_t>(std::ceil(duration * rate - 1e-9));
}

inline VelocityTrace sample_velocity_trace(const ChannelParams& params, double duration, Rng& rng) {
  if (!is_finite(params.mean_vel) || !is_finite(params.std_vel) || !std::isfinite(params.f_sim)) {
    throw ConfigError("non-finite velocity parameters");
  }
  if (!(duration > 0.0)) throw ConfigError("velocity trace duration must be > 0");

  const std::size_t n = ticks_for(duration, params.f_sim);
  VelocityTrace trace;
  trace.dt = params.dt();
  trace.samples.resize(n);
  trace.cum_displacement.resize(n);

  std::normal_distribution<double> gauss(0.0, 1.0);
  Vec3 acc{};
  for (std::size_t k = 0; k < n; ++k) {
    // x then y drawn every tick; z is identically zero.
    const double vx = params.mean_vel.x + params.std_vel.x * gauss(rng);
    const double vy = params.mean_vel.y + params.std_vel.y * gauss(rng);
    trace.samples[k] = Vec3{vx, vy, 0.0};
    acc += trace.samples[k] * trace.dt;
    trace.cum_displacement[k] = acc;
  }
  return trace;
}

/// Free-space Green's function of a uniformly advected point release.
inline double plume_concentration(double diffusion_coeff, double quantity, const Vec3& rx_minus_tx,
                                  const Vec3& flow_displacement, double tau) {
  if (!(tau > 0.0)) return 0.0;
  const double spread = 4.0 * diffusion_coeff * tau;
  const double r2 = norm_squared(rx_minus_tx - flow_displacement);
  return quantity * std::pow(std::numbers::pi * spread, -1.5) * std::exp(-r2 / spread);
}

/// Concentration at rx_pos due to a single release of `quantity` molecules.
///
/// Release and evaluation times are mapped onto the channel tick grid. Samples
/// with tau <= 0 or tau > t_mem are zero.
inline std::vector<double> impulse_concentration(const ChannelParams& params, const Vec3& tx_pos,
                                                 const Vec3& rx_pos, double release_time,
                                                 const VelocityTrace& trace,
                                                 std::span<const double> eval_times,
                                                 double quantity = 1.0) {
  const auto to_tick = [&](double t) {
    const double ticks = std::round(t * params.f_sim);
    if (ticks < 0.0) throw BoundsError("negative time");
    return static_cast<std::size_t>(ticks);
  };
  const auto release_tick = to_tick(release_time);
  const auto memory = params.memory_ticks();
  const Vec3 delta = rx_pos - tx_pos;

  std::vector<double> out;
  out.reserve(eval_times.size());
  for (double t : eval_times) {
    const auto tick = to_tick(t);
    if (tick > trace.size() || release_tick > trace.size()) {
      throw BoundsError("velocity trace does not cover the evaluation time");
    }
    const auto tau_ticks = static_cast<std::int64_t>(tick) - static_cast<std::int64_t>(release_tick);
    if (tau_ticks <= 0 || tau_ticks > memory) {
      out.push_back(0.0);
      continue;
    }
    const double tau = static_cast<double>(tau_ticks) / params.f_sim;
    out.push_back(plume_concentration(params.diffusion_coeff, quantity, delta,
                                      trace.displacement(release_tick, tick), tau));
  }
  return out;
}

/// Sampled concentration at one receiver.
struct ConcentrationTrace {
  double sample_rate = 0.0;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
};

namespace detail {

// Bounding boxes of the flow position over groups of release ticks. Used to
// skip whole groups whose plume exponent is provably above the cutoff.
class ReleaseIndex {
 public:
  static constexpr std::size_t kFine = 64;
  static constexpr std::size_t kCoarse = 64 * kFine;

  struct Box {
    Vec3 lo;
    Vec3 hi;
    bool active = false;
  };

  ReleaseIndex(std::span<const Vec3> position, std::span<const double> amplitudes)
      : fine_(build(position, amplitudes, kFine)), coarse_(build(position, amplitudes, kCoarse)) {}

  const std::vector<Box>& fine() const { return fine_; }
  const std::vector<Box>& coarse() const { return coarse_; }

 private:
  static std::vector<Box> build(std::span<const Vec3> position, std::span<const double> amplitudes,
                                std::size_t width) {
    const std::size_t n = amplitudes.size();
    std::vector<Box> boxes((n + width - 1) / width);
    for (std::size_t b = 0; b < boxes.size(); ++b) {
      const std::size_t begin = b * width;
      const std::size_t end = std::min(n, begin + width);
      Box box{position[begin], position[begin], false};
      for (std::size_t r = begin; r < end; ++r) {
        const Vec3& p = position[r];
        box.lo = Vec3{std::min(box.lo.x, p.x), std::min(box.lo.y, p.y), std::min(box.lo.z, p.z)};
        box.hi = Vec3{std::max(box.hi.x, p.x), std::max(box.hi.y, p.y), std::max(box.hi.z, p.z)};
        box.active = box.active || amplitudes[r] != 0.0;
      }
      boxes[b] = box;
    }
    return boxes;
  }

  std::vector<Box> fine_;
  std::vector<Box> coarse_;
};

// Squared distance from `target` to the set {p_now - p : p in box}.
inline double box_distance_squared(const Vec3& target, const Vec3& p_now,
                                   const ReleaseIndex::Box& box) {
  double sum = 0.0;
  for (int axis = 0; axis < 3; ++axis) {
    const double lo = p_now[axis] - box.hi[axis];
    const double hi = p_now[axis] - box.lo[axis];
    const double t = target[axis];
    const double d = t < lo ? lo - t : (t > hi ? t - hi : 0.0);
    sum += d * d;
  }
  return sum;
}

}  // namespace detail

/// Noiseless superposition of every emission tick at each receiver.
///
/// Samples are taken at channel ticks 0, stride, 2*stride, ...; stride 1 gives
/// the full channel-rate trace and any stride yields exactly the same values
/// as decimating the stride-1 trace.
inline std::vector<ConcentrationTrace> propagate_frame(const EmissionSchedule& schedule,
                                                       const Geometry& geometry,
                                                       const ChannelParams& params,
                                                       const VelocityTrace& trace,
                                                       std::size_t stride = 1) {
  if (schedule.amplitudes.empty()) throw ConfigError("empty emission schedule");
  if (stride == 0) throw ConfigError("sample stride must be >= 1");

  const std::size_t total_ticks = ticks_for(schedule.frame_duration + params.t_mem, params.f_sim);
  if (trace.size() + 1 < total_ticks) throw BoundsError("velocity trace shorter than frame + memory");
  const std::size_t n_release = std::min(schedule.amplitudes.size(), total_ticks);
  const std::size_t n_samples = (total_ticks + stride - 1) / stride;
  const auto memory = static_cast<std::size_t>(params.memory_ticks());
  const double dt = params.dt();
  const double cutoff = params.prune_exponent;

  std::vector<Vec3> position(total_ticks);
  for (std::size_t n = 0; n < total_ticks; ++n) position[n] = trace.position(n);
  const std::span<const double> amplitudes(schedule.amplitudes.data(), n_release);
  const detail::ReleaseIndex index(position, amplitudes);

  // Per-lag constants: (4 pi D tau)^(-3/2) and 1 / (4 D tau).
  std::vector<double> prefactor(memory + 1, 0.0);
  std::vector<double> inv_spread(memory + 1, 0.0);
  for (std::size_t lag = 1; lag <= memory; ++lag) {
    const double spread = 4.0 * params.diffusion_coeff * static_cast<double>(lag) * dt;
    prefactor[lag] = std::pow(std::numbers::pi * spread, -1.5);
    inv_spread[lag] = 1.0 / spread;
  }

  std::vector<ConcentrationTrace> out(geometry.rx_pos.size());
  for (auto& rx : out) {
    rx.sample_rate = params.f_sim / static_cast<double>(stride);
    rx.values.assign(n_samples, 0.0);
  }

  for (std::size_t j = 0; j < geometry.rx_pos.size(); ++j) {
    const Vec3 delta = geometry.rx_pos[j] - geometry.tx_pos;
    auto& values = out[j].values;
    for (std::size_t s = 0; s < n_samples; ++s) {
      const std::size_t n = s * stride;
      if (n == 0) continue;
      const std::size_t first = n > memory ? n - memory : 0;
      const std::size_t last = std::min(n, n_release);  // exclusive
      if (first >= last) continue;
      const Vec3& p_now = position[n];

      // Bound for a group of releases [begin, end): largest lag is n - max(first, begin).
      auto skip = [&](const detail::ReleaseIndex::Box& box, std::size_t begin) {
        if (!box.active) return true;
        const std::size_t lag = n - std::max(first, begin);
        return detail::box_distance_squared(delta, p_now, box) * inv_spread[lag] > cutoff;
      };

      double sum = 0.0;
      for (std::size_t c = first / detail::ReleaseIndex::kCoarse;
           c * detail::ReleaseIndex::kCoarse < last; ++c) {
        if (skip(index.coarse()[c], c * detail::ReleaseIndex::kCoarse)) continue;
        const std::size_t f_begin = std::max(first, c * detail::ReleaseIndex::kCoarse);
        const std::size_t f_end = std::min(last, (c + 1) * detail::ReleaseIndex::kCoarse);
        for (std::size_t f = f_begin / detail::ReleaseIndex::kFine;
             f * detail::ReleaseIndex::kFine < f_end; ++f) {
          if (skip(index.fine()[f], f * detail::ReleaseIndex::kFine)) continue;
          const std::size_t r_begin = std::max(f_begin, f * detail::ReleaseIndex::kFine);
          const std::size_t r_end = std::min(f_end, (f + 1) * detail::ReleaseIndex::kFine);
          for (std::size_t r = r_begin; r < r_end; ++r) {
            const double a = amplitudes[r];
            if (a == 0.0) continue;
            const std::size_t lag = n - r;
            const double e = norm_squared(delta - (p_now - position[r])) * inv_spread[lag];
            if (e > cutoff) continue;
            sum += a * prefactor[lag] * std::exp(-e);
          }
        }
      }
      values[s] = sum * dt;
    }
  }
  return out;
}

/// Draws one velocity trace covering the frame plus channel memory and propagates.
inline std::vector<ConcentrationTrace> propagate_frame(const EmissionSchedule& schedule,
                                                       const Geometry& geometry,
                                                       const ChannelParams& params, Rng& rng,
                                                       std::size_t stride = 1) {
  const auto trace = sample_velocity_trace(params, schedule.frame_duration + params.t_mem, rng);
  return propagate_frame(schedule, geometry, params, trace, stride);
}

/// Noise standard deviation giving `snr_db` against the mean square of
/// samples [span_begin, span_end) of the noiseless main-receiver trace.
inline double calibrate_noise_std(const ConcentrationTrace& main_trace, double snr_db,
                                  std::size_t span_begin = 0,
                                  std::size_t span_end = std::numeric_limits<std::size_t>::max()) {
  span_end = std::min(span_end, main_trace.size());
  if (span_begin >= span_end) throw BoundsError("empty SNR calibration span");
  double power = 0.0;
  for (std::size_t i = span_begin; i < span_end; ++i) power += main_trace.values[i] * main_trace.values[i];
  power /= static_cast<double>(span_end - span_begin);
  if (!(power > 0.0)) throw NumericalError("SNR undefined: main receiver trace is zero over the pilot span");
  if (std::isinf(snr_db) && snr_db > 0.0) return 0.0;
  return std::sqrt(power / std::pow(10.0, snr_db / 10.0));
}

inline ConcentrationTrace add_noise(ConcentrationTrace trace, double noise_std, Rng& rng) {
  if (!(noise_std >= 0.0)) throw ConfigError("noise std must be >= 0");
  if (noise_std == 0.0) return trace;
  std::normal_distribution<double> gauss(0.0, noise_std);
  for (auto& v : trace.values) v += gauss(rng);
  return trace;
}

/// CSV dump: `t_s,rx0,rx1,...`, one row per sample, 9 significant digits.
inline void write_trace_csv(std::ostream& os, std::span<const ConcentrationTrace> traces) {
  os << "t_s";
  for (std::size_t j = 0; j < traces.size(); ++j) os << ",rx" << j;
  os << '\n';
  if (traces.empty()) return;
  const double rate = traces.front().sample_rate;
  char buf[32];
  for (std::size_t i = 0; i < traces.front().size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.8e", static_cast<double>(i) / rate);
    os << buf;
    for (const auto& t : traces) {
      std::snprintf(buf, sizeof buf, "%.8e", t.values[i]);
      os << ',' << buf;
    }
    os << '\n';
  }
}

}  // namespace advdiv
