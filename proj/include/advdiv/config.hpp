#pragma once

// Simulation configuration and its flat key-value text format.
//
//   # comment
//   channel.d = 6.7698e-6
//   channel.mean_vel = 0.5, 0, 0
//   geometry.rx = 1,0,1; 1,0.001,1; 1,-0.001,1
//   sim.combiners = sc, egc, dgc, pgc
//
// Every key is optional; omitted keys keep the Table-I defaults below.
// Vectors are comma separated; receiver lists are semicolon separated.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "advdiv/channel.hpp"
#include "advdiv/combining.hpp"
#include "advdiv/error.hpp"
#include "advdiv/modem.hpp"

namespace advdiv {

enum class EqualizerKind { none, affine_mmse };
enum class Placement { post_combining, per_receiver };

struct SimConfig {
  ChannelParams channel;
  Geometry geometry{{0.0, 0.0, 1.0},
                    {{1.0, 0.0, 1.0}, {1.0, 0.001, 1.0}, {1.0, -0.001, 1.0}, {1.0, 0.002, 1.0}, {1.0, -0.002, 1.0}}};
  ModScheme scheme;
  std::size_t n_pilot = 32;
  std::size_t n_data = 1000;
  std::uint64_t pilot_seed = 0x5eed;
  double snr_db = -5.0;
  std::vector<CombinerKind> combiners{kAllCombiners.begin(), kAllCombiners.end()};
  EqualizerKind equalizer = EqualizerKind::affine_mmse;
  Placement agc_placement = Placement::post_combining;
  Placement equalizer_placement = Placement::post_combining;
  std::optional<double> ridge;  // default 1e-6 * trace / N
  bool equalizer_bias = true;
  std::optional<double> dgc_std;  // default from the velocity process
  std::optional<double> sync_offset;  // default nominal flight time
  std::uint64_t master_seed = 1;
  std::size_t n_trials = 20;
  std::size_t threads = 0;  // 0 = hardware concurrency

  void validate() const {
    channel.validate();
    geometry.validate();
    scheme.validate();
    scheme.ticks_per_symbol(channel.f_sim);
    scheme.ticks_per_symbol(channel.f_rx);
    Constellation(scheme.n_dim, scheme.m_levels);
    if (n_pilot < 1) throw ConfigError("frame.n_pilot must be >= 1");
    if (equalizer == EqualizerKind::affine_mmse && n_pilot < static_cast<std::size_t>(scheme.n_dim) + 1) {
      throw ConfigError("MMSE equalization needs frame.n_pilot >= N + 1");
    }
    if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity()) {
      throw ConfigError("sim.snr_db must be a number or +inf");
    }
    if (combiners.empty()) throw ConfigError("sim.combiners must not be empty");
    if (n_trials < 1) throw ConfigError("sim.n_trials must be >= 1");
    if (ridge && !(*ridge >= 0.0)) throw ConfigError("dsp.ridge must be >= 0");
    if (dgc_std && !(*dgc_std > 0.0)) throw ConfigError("combining.dgc_std must be > 0");
    if (sync_offset && !(*sync_offset >= 0.0)) throw ConfigError("frontend.sync_offset must be >= 0");
  }

  friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

inline double parse_double(std::string_view key, std::string_view text) {
  text = trim(text);
  if (text == "inf" || text == "+inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  double value = 0.0;
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ConfigError("bad number for " + std::string(key) + ": '" + std::string(text) + "'");
  }
  return value;
}

inline std::uint64_t parse_u64(std::string_view key, std::string_view text) {
  text = trim(text);
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ConfigError("bad integer for " + std::string(key) + ": '" + std::string(text) + "'");
  }
  return value;
}

inline bool parse_bool(std::string_view key, std::string_view text) {
  text = trim(text);
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("bad boolean for " + std::string(key));
}

inline Vec3 parse_vec3(std::string_view key, std::string_view text) {
  const auto parts = split(text, ',');
  if (parts.size() != 3) throw ConfigError(std::string(key) + " needs three comma-separated values");
  return {parse_double(key, parts[0]), parse_double(key, parts[1]), parse_double(key, parts[2])};
}

inline Placement parse_placement(std::string_view key, std::string_view text) {
  text = trim(text);
  if (text == "post-combining") return Placement::post_combining;
  if (text == "per-receiver") return Placement::per_receiver;
  throw ConfigError(std::string(key) + " must be post-combining or per-receiver");
}

inline std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::string format_vec3(const Vec3& v) {
  return format_double(v.x) + ", " + format_double(v.y) + ", " + format_double(v.z);
}

constexpr std::string_view to_string(Placement p) {
  return p == Placement::post_combining ? "post-combining" : "per-receiver";
}

}  // namespace detail

inline std::vector<CombinerKind> parse_combiner_list(std::string_view text) {
  std::vector<CombinerKind> out;
  for (auto part : detail::split(text, ',')) {
    if (!part.empty()) out.push_back(parse_combiner(part));
  }
  if (out.empty()) throw ConfigError("empty combiner list");
  return out;
}

inline void apply_setting(SimConfig& c, std::string_view key, std::string_view value) {
  using namespace detail;
  const auto num = [&] { return parse_double(key, value); };
  const auto count = [&] { return static_cast<std::size_t>(parse_u64(key, value)); };
  const auto opt_num = [&]() -> std::optional<double> {
    if (trim(value) == "auto") return std::nullopt;
    return num();
  };

  if (key == "channel.d") c.channel.diffusion_coeff = num();
  else if (key == "channel.mean_vel") c.channel.mean_vel = parse_vec3(key, value);
  else if (key == "channel.std_vel") c.channel.std_vel = parse_vec3(key, value);
  else if (key == "channel.f_sim") c.channel.f_sim = num();
  else if (key == "channel.f_rx") c.channel.f_rx = num();
  else if (key == "channel.t_mem") c.channel.t_mem = num();
  else if (key == "channel.emission_scale") c.channel.emission_scale = num();
  else if (key == "channel.prune_exponent") c.channel.prune_exponent = num();
  else if (key == "geometry.tx") c.geometry.tx_pos = parse_vec3(key, value);
  else if (key == "geometry.rx") {
    c.geometry.rx_pos.clear();
    for (auto part : split(value, ';')) {
      if (!part.empty()) c.geometry.rx_pos.push_back(parse_vec3(key, part));
    }
  } else if (key == "scheme.n_dim") c.scheme.n_dim = static_cast<int>(parse_u64(key, value));
  else if (key == "scheme.m_levels") c.scheme.m_levels = static_cast<int>(parse_u64(key, value));
  else if (key == "scheme.t_sym") c.scheme.t_sym = num();
  else if (key == "frame.n_pilot") c.n_pilot = count();
  else if (key == "frame.n_data") c.n_data = count();
  else if (key == "frame.pilot_seed") c.pilot_seed = parse_u64(key, value);
  else if (key == "sim.snr_db") c.snr_db = num();
  else if (key == "sim.combiners") c.combiners = parse_combiner_list(value);
  else if (key == "sim.equalizer") {
    const auto v = trim(value);
    if (v == "none") c.equalizer = EqualizerKind::none;
    else if (v == "affine-mmse") c.equalizer = EqualizerKind::affine_mmse;
    else throw ConfigError("sim.equalizer must be none or affine-mmse");
  } else if (key == "sim.master_seed") c.master_seed = parse_u64(key, value);
  else if (key == "sim.n_trials") c.n_trials = count();
  else if (key == "sim.threads") c.threads = count();
  else if (key == "dsp.agc_placement") c.agc_placement = parse_placement(key, value);
  else if (key == "dsp.equalizer_placement") c.equalizer_placement = parse_placement(key, value);
  else if (key == "dsp.ridge") c.ridge = opt_num();
  else if (key == "dsp.bias") c.equalizer_bias = parse_bool(key, value);
  else if (key == "combining.dgc_std") c.dgc_std = opt_num();
  else if (key == "frontend.sync_offset") c.sync_offset = opt_num();
  else throw ConfigError("unknown config key '" + std::string(key) + "'");
}

inline SimConfig parse_config(std::string_view text, SimConfig base = {}) {
  std::size_t line_no = 0;
  for (auto raw : detail::split(text, '\n')) {
    ++line_no;
    auto line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    apply_setting(base, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  base.validate();
  return base;
}

inline SimConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

inline std::string serialize_config(const SimConfig& c) {
  using detail::format_double;
  using detail::format_vec3;
  std::ostringstream os;
  os << "channel.d = " << format_double(c.channel.diffusion_coeff) << '\n'
     << "channel.mean_vel = " << format_vec3(c.channel.mean_vel) << '\n'
     << "channel.std_vel = " << format_vec3(c.channel.std_vel) << '\n'
     << "channel.f_sim = " << format_double(c.channel.f_sim) << '\n'
     << "channel.f_rx = " << format_double(c.channel.f_rx) << '\n'
     << "channel.t_mem = " << format_double(c.channel.t_mem) << '\n'
     << "channel.emission_scale = " << format_double(c.channel.emission_scale) << '\n'
     << "channel.prune_exponent = " << format_double(c.channel.prune_exponent) << '\n'
     << "geometry.tx = " << format_vec3(c.geometry.tx_pos) << '\n'
     << "geometry.rx = ";
  for (std::size_t j = 0; j < c.geometry.rx_pos.size(); ++j) {
    os << (j ? "; " : "") << format_vec3(c.geometry.rx_pos[j]);
  }
  os << '\n'
     << "scheme.n_dim = " << c.scheme.n_dim << '\n'
     << "scheme.m_levels = " << c.scheme.m_levels << '\n'
     << "scheme.t_sym = " << format_double(c.scheme.t_sym) << '\n'
     << "frame.n_pilot = " << c.n_pilot << '\n'
     << "frame.n_data = " << c.n_data << '\n'
     << "frame.pilot_seed = " << c.pilot_seed << '\n'
     << "sim.snr_db = " << format_double(c.snr_db) << '\n'
     << "sim.combiners = ";
  for (std::size_t i = 0; i < c.combiners.size(); ++i) os << (i ? ", " : "") << to_string(c.combiners[i]);
  os << '\n'
     << "sim.equalizer = " << (c.equalizer == EqualizerKind::none ? "none" : "affine-mmse") << '\n'
     << "sim.master_seed = " << c.master_seed << '\n'
     << "sim.n_trials = " << c.n_trials << '\n'
     << "sim.threads = " << c.threads << '\n'
     << "dsp.agc_placement = " << detail::to_string(c.agc_placement) << '\n'
     << "dsp.equalizer_placement = " << detail::to_string(c.equalizer_placement) << '\n'
     << "dsp.ridge = " << (c.ridge ? format_double(*c.ridge) : "auto") << '\n'
     << "dsp.bias = " << (c.equalizer_bias ? "true" : "false") << '\n'
     << "combining.dgc_std = " << (c.dgc_std ? format_double(*c.dgc_std) : "auto") << '\n'
     << "frontend.sync_offset = " << (c.sync_offset ? format_double(*c.sync_offset) : "auto") << '\n';
  return os.str();
}

/// FNV-1a over the serialized configuration.
inline std::uint64_t config_hash(const SimConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : serialize_config(c)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace advdiv
