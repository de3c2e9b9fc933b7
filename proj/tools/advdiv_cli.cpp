// Command-line front end for the advection-channel diversity simulator.
//
//   advdiv single-run       --config cfg.txt --out results/
//   advdiv sweep-snr        --snr-list -10,-5,0
//   advdiv sweep-nrx        --nrx-list 1,3,5 --delta-y 0.001
//   advdiv structured-scan  --y-grid 0,0.001,0.05 --eta 0.7 --delta 0.1 --n-mc 500
//   advdiv constellation    --combiner egc
//
// Exit codes: 0 success, 2 configuration error, 3 numerical degeneracy.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "advdiv/advdiv.hpp"

namespace fs = std::filesystem;
using namespace advdiv;

namespace {

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::optional<std::size_t> threads;
  std::optional<double> snr_db;
  std::string combiners;
  std::string out_dir = ".";
};

void add_common(CLI::App* app, CommonOptions& o) {
  app->add_option("--config", o.config_path, "Configuration file (key = value)");
  app->add_option("--seed", o.seed, "Master seed");
  app->add_option("--trials", o.trials, "Number of frames per operating point");
  app->add_option("--threads", o.threads, "Worker threads (0 = all cores)");
  app->add_option("--snr", o.snr_db, "SNR in dB");
  app->add_option("--combiners", o.combiners, "Comma-separated subset of sc,egc,dgc,pgc");
  app->add_option("--out", o.out_dir, "Output directory");
}

SimConfig resolve(const CommonOptions& o) {
  SimConfig config = o.config_path.empty() ? SimConfig{} : load_config(o.config_path);
  if (o.seed) config.master_seed = *o.seed;
  if (o.trials) config.n_trials = *o.trials;
  if (o.threads) config.threads = *o.threads;
  if (o.snr_db) config.snr_db = *o.snr_db;
  if (!o.combiners.empty()) config.combiners = parse_combiner_list(o.combiners);
  config.validate();
  return config;
}

std::ofstream open_output(const CommonOptions& o, const std::string& name) {
  fs::create_directories(o.out_dir);
  const auto path = fs::path(o.out_dir) / name;
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  std::cout << "wrote " << path.string() << '\n';
  return out;
}

void print_rows(const std::vector<ErrorRateRow>& rows) {
  for (const auto& r : rows) {
    std::cout << "  n_rx=" << r.n_rx << " snr=" << r.snr_db << " dB  " << to_string(r.combiner) << "  ser=" << r.ser;
    if (r.ber) std::cout << "  ber=" << *r.ber;
    std::cout << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo link simulator for multi-receiver particle communication under random advection"};
  app.require_subcommand(1);

  CommonOptions single_opts, snr_opts, nrx_opts, scan_opts, const_opts;
  bool dump_traces = false;
  std::vector<double> snr_list{-20, -15, -10, -8, -5, -3, 0, 5, 10};
  std::vector<std::size_t> nrx_list{1, 3, 5};
  double delta_y = 0.001;
  std::vector<double> y_grid{0.0, 0.001, 0.002, 0.005, 0.01, 0.02, 0.05};
  double eta = 0.7;
  double delta = 0.1;
  std::optional<std::size_t> n_mc;
  std::string combiner_name = "egc";
  std::size_t trial_index = 0;

  auto* single = app.add_subcommand("single-run", "Error rates at the configured SNR");
  add_common(single, single_opts);
  single->add_flag("--dump-traces", dump_traces, "Also dump trial-0 receiver traces and symbol vectors");

  auto* snr = app.add_subcommand("sweep-snr", "Error rates versus SNR");
  add_common(snr, snr_opts);
  snr->add_option("--snr-list", snr_list, "SNR grid in dB")->delimiter(',');

  auto* nrx = app.add_subcommand("sweep-nrx", "Error rates versus number of receivers");
  add_common(nrx, nrx_opts);
  nrx->add_option("--nrx-list", nrx_list, "Odd receiver counts")->delimiter(',');
  nrx->add_option("--delta-y", delta_y, "Transverse receiver spacing in m");

  auto* scan = app.add_subcommand("structured-scan", "Structured-signal probability versus transverse offset");
  add_common(scan, scan_opts);
  scan->add_option("--y-grid", y_grid, "Ascending transverse positions in m, starting at 0")->delimiter(',');
  scan->add_option("--eta", eta, "Pilot energy ratio threshold");
  scan->add_option("--delta", delta, "Allowed misclassification probability");
  scan->add_option("--n-mc", n_mc, "Monte Carlo transmissions per position (default: --trials or 500)");

  auto* cons = app.add_subcommand("constellation", "Dump equalized data-symbol vectors of one frame");
  add_common(cons, const_opts);
  cons->add_option("--combiner", combiner_name, "sc, egc, dgc or pgc");
  cons->add_option("--trial", trial_index, "Trial index to dump");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*single) {
      const auto config = resolve(single_opts);
      const auto run = single_run(config);
      print_rows(run.rows);
      auto rates = open_output(single_opts, "error_rates.csv");
      write_error_rates_csv(rates, config, run.rows);
      auto weights = open_output(single_opts, "weights.csv");
      write_weights_csv(weights, config, run.trials);
      if (dump_traces) {
        const auto ch = simulate_channel(config, 0);
        auto traces = open_output(single_opts, "traces_trial0.csv");
        write_provenance(traces, config, config.master_seed);
        write_trace_csv(traces, ch.noiseless);
        const auto obs = noisy_observations(config, ch, config.snr_db, ch.noiseless.size());
        auto vectors = open_output(single_opts, "observations_trial0.csv");
        write_provenance(vectors, config, config.master_seed);
        write_observation_csv(vectors, obs);
      }
    } else if (*snr) {
      const auto config = resolve(snr_opts);
      const auto rows = sweep_snr(config, snr_list);
      print_rows(rows);
      auto out = open_output(snr_opts, "sweep_snr.csv");
      write_error_rates_csv(out, config, rows);
    } else if (*nrx) {
      const auto config = resolve(nrx_opts);
      const auto rows = sweep_nrx(config, nrx_list, delta_y);
      print_rows(rows);
      auto out = open_output(nrx_opts, "sweep_nrx.csv");
      write_error_rates_csv(out, config, rows, true);
    } else if (*scan) {
      const auto config = resolve(scan_opts);
      const std::size_t mc = n_mc.value_or(scan_opts.trials.value_or(500));
      const auto rows = structured_scan(config, y_grid, eta, delta, mc);
      for (const auto& r : rows) std::cout << "  y=" << r.y << "  p=" << r.p_hat << '\n';
      if (!y_grid.empty() && y_grid.front() == 0.0) {
        std::size_t i = 0;
        const double y_c = critical_distance(y_grid, delta, [&](double) { return rows[i++].p_hat; });
        std::cout << "  critical transverse distance y_c = " << y_c << " m\n";
      }
      auto out = open_output(scan_opts, "structured_scan.csv");
      write_scan_csv(out, config, rows);
    } else if (*cons) {
      const auto config = resolve(const_opts);
      const auto kind = parse_combiner(combiner_name);
      const auto points = constellation_dump(config, kind, trial_index);
      auto out = open_output(const_opts, "constellation_" + std::string(to_string(kind)) + ".csv");
      write_constellation_csv(out, config, points);
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const BoundsError& e) {
    std::cerr << "bounds error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
