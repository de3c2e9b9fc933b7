// Acceptance checks for the reproduction targets. Prints one PASS/FAIL line
// per criterion and exits nonzero if any fails.
//
//   acceptance --cli path/to/advdiv --work scratch/dir [--only N]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "advdiv/advdiv.hpp"

namespace fs = std::filesystem;
using namespace advdiv;

namespace {

struct Check {
  bool ok = true;
  std::ostringstream detail;

  void expect(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail << "  failed: " << what << '\n';
    }
  }
};

const ErrorRateRow& row_for(const std::vector<ErrorRateRow>& rows, CombinerKind kind, double snr, std::size_t n_rx) {
  for (const auto& r : rows) {
    if (r.combiner == kind && r.snr_db == snr && r.n_rx == n_rx) return r;
  }
  throw std::runtime_error("missing row");
}

std::string fmt(double v, int digits = 4) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string interval(const Interval& i) { return "[" + fmt(i.lo) + ", " + fmt(i.hi) + "]"; }

// 1. constellation-figure BERs at -5 dB
void criterion_1(Check& c) {
  SimConfig config;
  config.n_trials = 20;
  const auto run = single_run(config);
  const auto& sc = row_for(run.rows, CombinerKind::SC, -5.0, 5);
  c.detail << "  SC  BER " << fmt(*sc.ber) << " " << interval(*sc.ber_ci) << '\n';
  c.expect(*sc.ber >= 0.08 && *sc.ber <= 0.25, "SC BER in [0.08, 0.25]");
  for (auto kind : {CombinerKind::EGC, CombinerKind::DGC, CombinerKind::PGC}) {
    const auto& r = row_for(run.rows, kind, -5.0, 5);
    const auto test = sign_test_less(r.trial_ber, sc.trial_ber);
    c.detail << "  " << to_string(kind) << " BER " << fmt(*r.ber) << " " << interval(*r.ber_ci) << "  sign test "
             << test.wins << "/" << test.wins + test.losses << " p=" << test.p_value << '\n';
    c.expect(*r.ber < *sc.ber, std::string(to_string(kind)) + " BER below SC");
    c.expect(test.p_value < 0.01, std::string(to_string(kind)) + " paired sign test p < 0.01");
  }
  const auto& egc = row_for(run.rows, CombinerKind::EGC, -5.0, 5);
  const auto& dgc = row_for(run.rows, CombinerKind::DGC, -5.0, 5);
  c.expect(dgc.ber_ci->contains(*egc.ber), "EGC BER inside the DGC interval");
  c.expect(egc.ber_ci->contains(*dgc.ber), "DGC BER inside the EGC interval");
}

// 2. structured-signal probability scan
void criterion_2(Check& c) {
  SimConfig config;
  const std::vector<double> grid{0.0, 0.001, 0.002, 0.005, 0.01, 0.02, 0.05};
  const auto rows = structured_scan(config, grid, 0.7, 0.1, 500);
  for (const auto& r : rows) c.detail << "  y=" << fmt(r.y, 3) << "  p=" << fmt(r.p_hat, 3) << " " << interval(r.ci) << '\n';
  c.expect(rows[0].p_hat == 1.0, "p(0) == 1 exactly");
  c.expect(rows[1].p_hat >= 0.9, "p(0.001) >= 0.9");
  c.expect(rows.back().p_hat < 0.5, "p(0.05) < 0.5");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = i + 1; j < rows.size(); ++j) {
      const double slack = rows[i].ci.half_width() + rows[j].ci.half_width();
      c.expect(rows[j].p_hat <= rows[i].p_hat + slack,
               "non-increasing between y=" + fmt(rows[i].y, 3) + " and y=" + fmt(rows[j].y, 3));
    }
  }
}

// 3. SER versus SNR for the four modulations
void criterion_3(Check& c) {
  const std::vector<double> snr{-20, -15, -10, -8, -5, -3, 0, 5, 10};
  for (auto [n, m] : std::vector<std::pair<int, int>>{{2, 4}, {3, 3}, {3, 4}, {4, 2}}) {
    SimConfig config;
    config.scheme = ModScheme{n, m, 2.0};
    config.n_trials = 20;
    const auto rows = sweep_snr(config, snr);
    const std::string tag = "(" + std::to_string(n) + "," + std::to_string(m) + ") ";
    c.detail << "  " << tag;
    for (double s : {-10.0, -5.0, 10.0}) {
      c.detail << " " << s << "dB:";
      for (auto kind : kAllCombiners) c.detail << " " << to_string(kind) << "=" << fmt(row_for(rows, kind, s, 5).ser, 3);
    }
    c.detail << '\n';
    for (auto kind : kAllCombiners) {
      for (std::size_t i = 0; i + 1 < snr.size(); ++i) {
        const auto& lo = row_for(rows, kind, snr[i], 5);
        const auto& hi = row_for(rows, kind, snr[i + 1], 5);
        c.expect(hi.ser_ci.lo <= lo.ser_ci.hi, tag + std::string(to_string(kind)) + " SER non-increasing " +
                                                   fmt(snr[i], 0) + " -> " + fmt(snr[i + 1], 0) + " dB");
      }
    }
    for (double s : {-10.0, -5.0}) {
      const double sc = row_for(rows, CombinerKind::SC, s, 5).ser;
      for (auto kind : {CombinerKind::EGC, CombinerKind::DGC, CombinerKind::PGC}) {
        c.expect(row_for(rows, kind, s, 5).ser <= sc, tag + std::string(to_string(kind)) + " SER <= SC at " + fmt(s, 0) + " dB");
      }
    }
    for (auto a : kAllCombiners) {
      for (auto b : kAllCombiners) {
        c.expect(row_for(rows, a, 10.0, 5).ser_ci.overlaps(row_for(rows, b, 10.0, 5).ser_ci),
                 tag + "+10 dB intervals overlap for " + std::string(to_string(a)) + "/" + std::string(to_string(b)));
      }
    }
  }
}

// 4. BER versus receiver count
void criterion_4(Check& c) {
  SimConfig config;
  config.n_trials = 20;
  const std::vector<std::size_t> nrx{1, 5};

  const auto near = sweep_nrx(config, nrx, 0.001);
  const auto& e1 = row_for(near, CombinerKind::EGC, -5.0, 1);
  const auto& e5 = row_for(near, CombinerKind::EGC, -5.0, 5);
  const auto test = sign_test_less(e5.trial_ber, e1.trial_ber);
  c.detail << "  dy=0.001  EGC(1)=" << fmt(*e1.ber) << " EGC(5)=" << fmt(*e5.ber) << "  sign test " << test.wins << "/"
           << test.wins + test.losses << " p=" << test.p_value << '\n';
  c.expect(*e5.ber < *e1.ber, "structured regime: EGC(5) < EGC(1)");
  c.expect(test.p_value < 0.01, "structured regime: paired sign test p < 0.01");

  const auto far = sweep_nrx(config, nrx, 0.05);
  const auto& f1 = row_for(far, CombinerKind::EGC, -5.0, 1);
  const auto& f5 = row_for(far, CombinerKind::EGC, -5.0, 5);
  const auto& pgc = row_for(far, CombinerKind::PGC, -5.0, 5);
  const auto& sc = row_for(far, CombinerKind::SC, -5.0, 5);
  c.detail << "  dy=0.05   EGC(1)=" << fmt(*f1.ber) << " EGC(5)=" << fmt(*f5.ber) << " PGC(5)=" << fmt(*pgc.ber)
           << " SC=" << fmt(*sc.ber) << '\n';
  c.expect(*f5.ber > *f1.ber, "non-structured regime: EGC(5) > EGC(1)");
  c.expect(*pgc.ber <= 1.5 * *sc.ber, "non-structured regime: PGC(5) within 1.5x of SC");
}

// 5a. in-process property checks
void property_suite(Check& c) {
  // mass conservation by trapezoid quadrature
  {
    const double D = 6.7698e-6, Q = 2.0;
    const Vec3 drift{0.8, 0.003, 0.0};
    for (double tau : {0.01, 2.0, 30.0}) {
      const double h_half = 10.0 * std::sqrt(2.0 * D * tau);
      const int n = 121;
      const double h = 2.0 * h_half / (n - 1);
      double total = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k) {
            const double w = ((i == 0 || i == n - 1) ? 0.5 : 1.0) * ((j == 0 || j == n - 1) ? 0.5 : 1.0) *
                             ((k == 0 || k == n - 1) ? 0.5 : 1.0);
            const Vec3 r{drift.x - h_half + i * h, drift.y - h_half + j * h, drift.z - h_half + k * h};
            total += w * plume_concentration(D, Q, r, drift, tau);
          }
      c.expect(std::abs(total * h * h * h - Q) / Q < 1e-6, "mass conservation at tau=" + fmt(tau, 2));
    }
  }
  // pulse orthogonality on the tick grid
  for (int n : {2, 3, 4}) {
    const std::int64_t ticks = ModScheme{n, 2, 2.0}.ticks_per_symbol(1000.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        std::int64_t inner = 0;
        for (std::int64_t t = 0; t < ticks; ++t) {
          const bool a = t >= subinterval_start(ticks, n, i) && t < subinterval_start(ticks, n, i + 1);
          const bool b = t >= subinterval_start(ticks, n, j) && t < subinterval_start(ticks, n, j + 1);
          inner += a && b;
        }
        c.expect(inner == 0, "pulse orthogonality");
      }
  }
  // weight normalization
  {
    Rng rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 500; ++rep) {
      Geometry g{{0, 0, 1}, {}};
      std::vector<double> e;
      for (int j = 0; j < 1 + rep % 7; ++j) {
        g.rx_pos.push_back({1.0, (u(rng) - 0.5) * 0.02, 1.0});
        e.push_back(u(rng));
      }
      for (auto kind : kAllCombiners) {
        const auto w = compute_weights(kind, g, e, 0.00447);
        double s = 0.0;
        bool nonneg = true;
        for (double v : w.values) {
          s += v;
          nonneg = nonneg && v >= 0.0;
        }
        c.expect(std::abs(s - 1.0) < 1e-12 && nonneg, "weights normalized");
      }
    }
  }
  // SC equals the single-receiver pipeline
  {
    SimConfig config;
    config.channel.t_mem = 4.0;
    config.n_pilot = 16;
    config.n_data = 100;
    auto single = config;
    single.geometry.rx_pos.resize(1);
    single.combiners = {CombinerKind::SC};
    for (std::size_t t = 0; t < 3; ++t) {
      const auto a = run_trial(config, t, true);
      const auto b = run_trial(single, t, true);
      c.expect(a.outcome(CombinerKind::SC).equalized == b.outcome(CombinerKind::SC).equalized &&
                   a.outcome(CombinerKind::SC).detection.decided_indices ==
                       b.outcome(CombinerKind::SC).detection.decided_indices,
               "SC bit-identical to single receiver");
    }
  }
  // slicer against brute-force minimum distance
  {
    Rng rng(2);
    for (auto [n, m] : std::vector<std::pair<int, int>>{{2, 4}, {3, 3}, {3, 4}, {4, 2}}) {
      const Constellation con(n, m);
      std::uniform_real_distribution<double> u(-1.5, m + 0.5);
      std::vector<double> v(static_cast<std::size_t>(n));
      auto brute = [&] {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < con.size(); ++i) {
          const auto p = con.point(i);
          double d = 0.0;
          for (std::size_t k = 0; k < v.size(); ++k) d += (v[k] - p[k]) * (v[k] - p[k]);
          if (d < best_d) {
            best_d = d;
            best = i;
          }
        }
        return best;
      };
      bool ok = true;
      for (std::size_t i = 0; i < con.size(); ++i) {
        const auto p = con.point(i);
        v.assign(p.begin(), p.end());
        ok = ok && slice(v, con) == i && brute() == i;
      }
      for (int rep = 0; rep < 10000; ++rep) {
        for (auto& x : v) x = u(rng);
        ok = ok && slice(v, con) == brute();
      }
      c.expect(ok, "slicer equals brute force for (" + std::to_string(n) + "," + std::to_string(m) + ")");
    }
  }
  // MMSE recovers R^-1
  {
    Rng rng(3);
    std::normal_distribution<double> g(0.0, 1.0);
    const Constellation con(4, 2);
    for (int rep = 0; rep < 10; ++rep) {
      Eigen::MatrixXd r(4, 4);
      for (Eigen::Index i = 0; i < 16; ++i) r.data()[i] = g(rng);
      r += 2.0 * Eigen::MatrixXd::Identity(4, 4);
      std::vector<std::size_t> symbols(64);
      for (auto& s : symbols) s = draw_symbol(rng, con.size());
      const auto a = amplitudes_of(con, symbols);
      const auto w = apply_equalizer(Equalizer{r, Eigen::VectorXd::Zero(4), 0.0}, a);
      const auto eq = train_mmse(w, a, 0.0);
      c.expect((eq.matrix - r.inverse()).cwiseAbs().maxCoeff() < 1e-8, "MMSE recovers R^-1");
    }
  }
}

std::string read_without_first_line(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::string first;
  std::getline(in, first);
  std::stringstream rest;
  rest << in.rdbuf();
  return rest.str();
}

int run_cli(const std::string& cli, const std::string& args, const fs::path& log) {
  const std::string cmd = "\"" + cli + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// 5b. CLI determinism and exit codes
void cli_suite(Check& c, const std::string& cli, const fs::path& work) {
  fs::remove_all(work);
  fs::create_directories(work);
  const auto cfg = work / "small.txt";
  {
    std::ofstream out(cfg);
    out << "channel.t_mem = 4\nframe.n_pilot = 8\nframe.n_data = 40\nsim.n_trials = 2\n";
  }
  const std::vector<std::pair<std::string, std::string>> commands{
      {"single-run", "single-run --dump-traces"},
      {"sweep-snr", "sweep-snr --snr-list -5,5"},
      {"sweep-nrx", "sweep-nrx --nrx-list 1,3 --delta-y 0.002"},
      {"structured-scan", "structured-scan --y-grid 0,0.002 --n-mc 20"},
      {"constellation", "constellation --combiner pgc"},
  };
  for (const auto& [name, args] : commands) {
    std::vector<fs::path> dirs{work / (name + "_1"), work / (name + "_2")};
    bool ran = true;
    for (const auto& d : dirs) {
      const int code = run_cli(cli, args + " --config \"" + cfg.string() + "\" --seed 7 --out \"" + d.string() + "\"",
                               work / (name + ".log"));
      ran = ran && code == 0;
    }
    c.expect(ran, name + " exits 0");
    if (!ran) continue;
    std::size_t files = 0;
    bool same = true;
    for (const auto& entry : fs::directory_iterator(dirs[0])) {
      ++files;
      const auto twin = dirs[1] / entry.path().filename();
      std::ifstream head(entry.path());
      std::string first;
      std::getline(head, first);
      c.expect(first.rfind("# advdiv ", 0) == 0, name + " " + entry.path().filename().string() + " provenance line");
      same = same && fs::exists(twin) && read_without_first_line(entry.path()) == read_without_first_line(twin);
    }
    c.detail << "  " << name << ": " << files << " file(s) compared\n";
    c.expect(files > 0 && same, name + " byte-identical across runs");
  }

  const auto bad = work / "bad.txt";
  {
    std::ofstream out(bad);
    out << "channel.f_rx = 300\n";
  }
  c.expect(run_cli(cli, "single-run --config \"" + bad.string() + "\" --out \"" + (work / "bad").string() + "\"",
                   work / "bad.log") == 2,
           "config error exits 2");
  const auto degenerate = work / "degenerate.txt";
  {
    std::ofstream out(degenerate);
    out << "channel.t_mem = 4\nframe.n_pilot = 8\nframe.n_data = 4\nsim.n_trials = 1\ngeometry.rx = 1,0.2,1\n";
  }
  c.expect(run_cli(cli, "single-run --config \"" + degenerate.string() + "\" --out \"" + (work / "deg").string() + "\"",
                   work / "deg.log") == 3,
           "numerical degeneracy exits 3");
}

// 6. transverse displacement std
void criterion_6(Check& c) {
  ChannelParams p;
  const double expected = 0.1 * std::sqrt(2.0 * 0.001);
  Rng rng = make_stream(1, 0, StreamPurpose::velocity);
  const int n = 10000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double y = sample_velocity_trace(p, 2.0, rng).cum_displacement.back().y;
    sum += y;
    sum2 += y * y;
  }
  const double mean = sum / n;
  const double sd = std::sqrt((sum2 - n * mean * mean) / (n - 1));
  c.detail << "  std " << sd * 1e3 << " mm, closed form " << expected * 1e3 << " mm\n";
  c.expect(std::abs(sd - expected) / expected < 0.05, "std within 5% of the closed form");
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli;
  fs::path work = fs::temp_directory_path() / "advdiv_acceptance";
  int only = 0;
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string key = argv[i];
    if (key == "--cli") cli = argv[i + 1];
    else if (key == "--work") work = argv[i + 1];
    else if (key == "--only") only = std::atoi(argv[i + 1]);
  }

  const std::vector<std::pair<std::string, std::function<void(Check&)>>> criteria{
      {"1 BER at -5 dB: combiners beat SC, EGC ~ DGC", criterion_1},
      {"2 structured-signal probability scan", criterion_2},
      {"3 SER vs SNR trends for (2,4) (3,3) (3,4) (4,2)", criterion_3},
      {"4 BER vs receiver count, structured and non-structured", criterion_4},
      {"5 property suites and CLI determinism",
       [&](Check& c) {
         property_suite(c);
         if (cli.empty()) c.expect(false, "--cli not given");
         else cli_suite(c, cli, work);
       }},
      {"6 transverse displacement std", criterion_6},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (only != 0 && only != static_cast<int>(i + 1)) continue;
    Check check;
    const auto start = std::chrono::steady_clock::now();
    try {
      criteria[i].second(check);
    } catch (const std::exception& e) {
      check.ok = false;
      check.detail << "  exception: " << e.what() << '\n';
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (check.ok ? "PASS" : "FAIL") << "  criterion " << criteria[i].first << "  (" << fmt(secs, 1)
              << " s)\n"
              << check.detail.str() << std::flush;
    failures += check.ok ? 0 : 1;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criterion/criteria failed") << '\n';
  return failures == 0 ? 0 : 1;
}
