// One verdict line per acceptance criterion. Exit status is non-zero when a
// criterion fails that is not listed in kKnownGaps.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "simce/experiment.hpp"
#include "test_helpers.hpp"

using namespace simce;

namespace {

// Criteria whose targets this model cannot reach; see the decisions ledger.
const std::set<int> kKnownGaps{2, 9};

SimulationConfig profile() { return load_config(std::filesystem::path(SIMCE_CONFIG_DIR) / "default.json"); }

SimulationConfig with_atoms(SimulationConfig c, int n, int m, int l, double snr_db) {
  std::tie(c.geometry.nx, c.geometry.nz) = grid_shape(n);
  c.geometry.num_antennas = m;
  c.geometry.num_layers = l;
  c.effective_snr_db = snr_db;
  return c;
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

bool within_rel(double value, double target, double rel) {
  return std::abs(value - target) <= rel * std::abs(target);
}

// Fig. 2 cells shared by criteria 1-3.
struct Fig2 {
  std::map<std::tuple<std::string, int, int>, ResultRow> rows;  // (scheme, N, snr)
  const ResultRow& at(const std::string& scheme, int n, int snr) const {
    return rows.at({scheme, n, snr});
  }
};

// Results directory written by `simce_cli grid -c configs/fig2.json`; empty runs the grid here.
std::filesystem::path g_fig2_dir;

const Fig2& fig2_results() {
  static const Fig2 cache = [] {
    std::vector<ResultRow> rows;
    if (!g_fig2_dir.empty()) {
      std::ifstream in(g_fig2_dir / "results.csv");
      if (!in) throw ConfigError("fig2", "missing " + (g_fig2_dir / "results.csv").string());
      rows = read_results_csv(in);
    } else {
      rows = run_grid(load_grid(std::filesystem::path(SIMCE_CONFIG_DIR) / "fig2.json")).rows;
    }
    Fig2 f;
    for (const auto& row : rows) {
      f.rows[{row.scheme, row.atoms, static_cast<int>(std::lround(row.effective_snr_db))}] = row;
    }
    return f;
  }();
  return cache;
}

Verdict criterion_1() {
  const Fig2& f = fig2_results();
  int ok = 0, total = 0;
  double worst = 0.0;
  std::string failures;
  for (const auto& [key, r] : f.rows) {
    if (r.effective_snr_db > 30.0) continue;
    ++total;
    if (!r.error.empty()) {
      failures += " " + std::get<0>(key) + "/N" + std::to_string(r.atoms) + ": " + r.error;
      continue;
    }
    const double z = std::abs(r.empirical - r.closed_form) / r.empirical_se;
    worst = std::max(worst, z);
    if (z <= 3.0) {
      ++ok;
    } else {
      failures += " " + std::get<0>(key) + "/N" + std::to_string(r.atoms) + "/" +
                  fmt("%.0fdB", r.effective_snr_db) + fmt("=%.2fSE", z);
    }
  }
  return {ok == total, std::to_string(ok) + "/" + std::to_string(total) +
                           " cells within 3 SE at 1000 trials, worst " + fmt("%.2f SE", worst) +
                           failures};
}

Verdict criterion_2() {
  const Fig2& f = fig2_results();
  bool pass = true;
  std::ostringstream out;
  const std::map<int, double> opt{{0, 0.303}, {10, 0.0953}, {20, 0.0200}};
  const std::map<int, double> conv{{0, 0.1199}, {10, 0.0278}, {20, 0.001527}};
  out << "SIM-Optimized N=32";
  for (auto [snr, target] : opt) {
    const double v = f.at("SIM-Optimized", 32, snr).closed_form;
    const bool ok = within_rel(v, target, 0.5);
    pass &= ok;
    out << fmt(" %gdB:", snr) << fmt("%.4g", v) << fmt("/%.4g", target) << (ok ? "" : "(out)");
  }
  out << "; Conventional M=32";
  for (auto [snr, target] : conv) {
    const double v = f.at("Conventional", 32, snr).closed_form;
    const bool ok = within_rel(v, target, 0.05);
    pass &= ok;
    out << fmt(" %gdB:", snr) << fmt("%.4g", v) << fmt("/%.4g", target) << (ok ? "" : "(out)");
  }
  const double cb = f.at("SIM-Codebook", 32, 10).closed_form;
  const bool cb_ok = within_rel(cb, 0.503, 0.5);
  pass &= cb_ok;
  out << "; SIM-Codebook N=32 10dB:" << fmt("%.4g", cb) << "/0.503" << (cb_ok ? "" : "(out)");
  return {pass, out.str()};
}

Verdict criterion_3() {
  const Fig2& f = fig2_results();
  bool pass = true;
  std::ostringstream out;
  for (int n : {32, 64}) {
    for (int snr : {-10, 0, 10, 20, 30, 40}) {
      const auto& c = f.at("Conventional", n, snr);
      const auto& o = f.at("SIM-Optimized", n, snr);
      const auto& b = f.at("SIM-Codebook", n, snr);
      bool ok = c.closed_form <= o.closed_form && o.closed_form <= b.closed_form &&
                c.empirical <= o.empirical && o.empirical <= b.empirical;
      if (snr == 10) {
        const double g1 = (o.empirical - c.empirical) / std::hypot(o.empirical_se, c.empirical_se);
        const double g2 = (b.empirical - o.empirical) / std::hypot(b.empirical_se, o.empirical_se);
        ok &= g1 >= 2.0 && g2 >= 2.0;
        out << " N=" << n << " 10dB gaps " << fmt("%.1f", g1) << fmt("/%.1f SE", g2) << ";";
      }
      if (!ok) out << " ordering broken at N=" << n << " " << snr << "dB;";
      pass &= ok;
    }
  }
  return {pass, "Conventional <= SIM-Optimized <= SIM-Codebook at every SNR, N=32,64;" + out.str()};
}

double design_nmse(const SimulationConfig& c, std::optional<int> s = std::nullopt) {
  const Scenario scenario = build_scenario(c);
  return design_scheme(scenario, Scheme::kOptimized, s).average_nmse;
}

Verdict criterion_4() {
  std::map<int, double> v;
  for (int l : {1, 2, 4, 6, 8}) v[l] = design_nmse(with_atoms(profile(), 32, 4, l, 10.0), 8);
  const double ratio = v[6] / v[1];
  const double tail = std::abs(v[8] - v[6]) / v[6];
  const bool dec = v[2] < v[1] && v[4] < v[2] && v[6] < v[4];
  std::ostringstream out;
  out << "N=32 M=4 S=8 at 10 dB: NMSE L1..8 =";
  for (auto [l, x] : v) out << fmt(" %.4g", x);
  out << "; L6/L1 = " << fmt("%.3f", ratio) << " (<= 0.45); strictly decreasing to L6: "
      << (dec ? "yes" : "no") << "; |L8-L6|/L6 = " << fmt("%.3f", tail) << " (< 0.10)";
  return {ratio <= 0.45 && dec && tail < 0.10, out.str()};
}

Verdict criterion_5() {
  bool pass = true;
  std::ostringstream out;
  std::map<std::pair<int, int>, int> first_hit;
  const int s_max = 16;
  for (int m : {4, 8}) {
    for (int l : {2, 4, 6}) {
      std::vector<double> curve;
      for (int s = 1; s <= s_max; ++s) curve.push_back(design_nmse(with_atoms(profile(), 48, m, l, 10.0), s));
      bool mono = true;
      for (std::size_t i = 1; i < curve.size(); ++i) mono &= curve[i] <= curve[i - 1];
      int hit = s_max + 1;
      for (int s = 1; s <= s_max; ++s) {
        if (curve[s - 1] <= 0.12) {
          hit = s;
          break;
        }
      }
      first_hit[{m, l}] = hit;
      pass &= mono;
      out << " M" << m << "L" << l << (mono ? " monotone" : " NOT monotone") << " S*="
          << (hit > s_max ? std::string(">16") : std::to_string(hit)) << ";";
    }
  }
  for (int m : {4, 8}) {
    const bool ok = first_hit[{m, 6}] < first_hit[{m, 2}];
    pass &= ok;
    if (!ok) out << " S*(L6) not below S*(L2) at M=" << m << ";";
  }
  return {pass, "N=48 K=4 at 10 dB, S=1..16:" + out.str()};
}

Verdict criterion_6() {
  const Scenario scenario = build_scenario(with_atoms(profile(), 64, 4, 6, 10.0));
  const SchemeOutcome out = design_scheme(scenario, Scheme::kOptimized);
  const auto& trace = out.design->objective_trace;
  const double final_value = out.average_nmse;
  int reach = -1;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (std::abs(trace[i] - final_value) <= 0.05 * final_value) {
      reach = static_cast<int>(i);
      break;
    }
  }
  std::ostringstream msg;
  msg << "N=64 L=6 S=16 at 10 dB: within 5% of final " << fmt("%.4g", final_value) << " at iteration "
      << reach << " (<= 45); " << out.design->iterations << " iterations run";
  return {reach >= 0 && reach <= 45, msg.str()};
}

Verdict criterion_7() {
  double worst = 0.0;
  int bad = 0, checked = 0;
  for (int inst = 0; inst < 50; ++inst) {
    auto rng = substream(2024, Stream::kTest, inst);
    std::uniform_int_distribution<int> pick_n(2, 6), pick_l(1, 3), pick_s(1, 3), pick_k(1, 2);
    const int n = pick_n(rng), l = pick_l(rng), s = pick_s(rng), k = pick_k(rng);
    std::uniform_int_distribution<int> pick_m(1, n);
    const int m = pick_m(rng);
    const WaveModel model = test::random_model(n, m, l, rng);
    PhaseBook p = random_phasebook(s, l, n, rng);
    std::vector<CMatrix> covs;
    for (int u = 0; u < k; ++u) covs.push_back(test::random_covariance(n, rng));
    const double rt = std::exp(std::uniform_real_distribution<double>(0.0, 5.0)(rng));
    const DesignTarget target = DesignTarget::from_covariances(covs, rt);
    const PhaseEvaluation eval = evaluate_phases(model, target, p);
    const PhaseTensor g = nmse_gradient(model, p, eval.digital, target.factors);
    const double h = 1e-6;
    for (std::size_t i = 0; i < p.values().size(); ++i) {
      PhaseBook plus = p, minus = p;
      plus.values()[i] += h;
      minus.values()[i] -= h;
      const double fd = (test::average_objective(model, plus, eval.digital, covs, rt) -
                         test::average_objective(model, minus, eval.digital, covs, rt)) /
                        (2 * h);
      const double err = std::abs(fd - g.values()[i]);
      // Relative error away from zero; absolute error for near-zero components.
      if (std::abs(fd) >= 1e-4) {
        const double rel = err / std::abs(fd);
        worst = std::max(worst, rel);
        if (rel > 1e-5) ++bad;
        ++checked;
      } else if (err > 1e-9) {
        ++bad;
      }
    }
  }
  return {bad == 0, "50 instances, max relative error " + fmt("%.2e", worst) + " over " +
                        std::to_string(checked) +
                        " components with |fd| >= 1e-4 (<= 1e-5), others within 1e-9 absolute; " +
                        std::to_string(bad) + " violations"};
}

Verdict criterion_8() {
  bool pass = true;
  std::ostringstream out;
  out << "default stack, M=4, L=6:";
  for (int n : {8, 16, 32}) {
    SimulationConfig c = with_atoms(profile(), n, 4, 6, 0.0);
    c.effective_snr_db.reset();
    const Scenario scenario = build_scenario(c);
    const int s_full = min_subphases(n, 4);
    auto rng = substream(8, Stream::kTest, n);
    const PhaseBook full = random_phasebook(s_full, 6, n, rng);
    const CMatrix a = observation_map(scenario.model, full);
    Eigen::JacobiSVD<CMatrix> svd(a);
    const int rank = static_cast<int>((svd.singularValues().array() > 1e-12 * svd.singularValues()(0)).count());
    std::vector<CMatrix> covs;
    for (const auto& u : scenario.stats.users) covs.push_back(u.correlation);
    const double nmse_full =
        evaluate_phases(scenario.model, DesignTarget::from_covariances(covs, 1e12), full).average_nmse;

    const PhaseBook short_book = random_phasebook(s_full - 1, 6, n, rng);
    const double ident = evaluate_phases(scenario.model,
                                         DesignTarget::from_covariances({CMatrix::Identity(n, n)}, 1e12),
                                         short_book)
                             .average_nmse;
    const double floor = double(n - 4 * (s_full - 1)) / n;
    const bool ok = (rank < n || nmse_full <= 1e-6) && ident >= floor - 1e-9;
    pass &= ok && rank == n;
    out << " N=" << n << " rank(A)=" << rank << fmt(" NMSE %.2e", nmse_full)
        << fmt(", short S NMSE %.4f", ident) << fmt(" >= floor %.4f;", floor);
  }
  return {pass, out.str()};
}

Verdict criterion_9() {
  SimulationConfig c = with_atoms(profile(), 64, 4, 6, 20.0);
  c.geometry.atom_spacing_m = kSpeedOfLight / c.geometry.frequency_hz / 4;
  const Scenario scenario = build_scenario(c);
  const double target = kPi * 64 / 16;
  const int energy_rank = low_rank_reduce(scenario.stats.users[0].correlation, 0.9999).rank;
  const int eig_rank = numerical_rank(scenario.stats.users[0].correlation, 1e-6);
  const bool rank_ok = within_rel(energy_rank, target, 0.25) && within_rel(eig_rank, target, 0.25);

  const SchemeOutcome full = design_scheme(scenario, Scheme::kOptimized);
  const SchemeOutcome low = design_scheme(scenario, Scheme::kOptimizedLowRank);
  const double ratio = low.average_nmse / full.average_nmse;
  std::ostringstream out;
  out << "lambda/4, N=64: rank " << energy_rank << " at 0.9999 energy, " << eig_rank
      << " eigenvalues above 1e-6 max (target 12.6 +/- 25%); low-rank S=" << low.subphases
      << " NMSE " << fmt("%.4g", low.average_nmse) << " vs full S=" << full.subphases << " "
      << fmt("%.4g", full.average_nmse) << " at 20 dB, ratio " << fmt("%.2f", ratio) << " (<= 2)";
  return {rank_ok && ratio <= 2.0, out.str()};
}

Verdict criterion_10() {
  ExperimentGrid grid;
  grid.base = profile();
  grid.base.estimator.hyper.max_iters = 40;
  grid.base.estimator.codebook_size = 100;
  grid.effective_snr_db = {0, 20};
  grid.atoms = {16};
  grid.layers = {2, 4};
  grid.schemes = {Scheme::kOptimized, Scheme::kCodebook, Scheme::kConventional,
                  Scheme::kOptimizedLowRank};
  grid.trials = 300;
  auto snapshot = [&](int workers) {
    grid.workers = workers;
    const auto dir = std::filesystem::temp_directory_path() /
                     ("simce_acceptance_w" + std::to_string(workers));
    std::filesystem::remove_all(dir);
    write_grid_outputs(dir, run_grid(grid));
    std::string all;
    for (const char* f : {"results.csv", "user_results.csv", "traces.csv"}) {
      std::ifstream in(dir / f);
      std::stringstream ss;
      ss << in.rdbuf();
      all += ss.str();
    }
    return all;
  };
  const std::string a = snapshot(1), b = snapshot(4), c = snapshot(1);
  const bool ok = a == b && a == c && !a.empty();
  return {ok, "16-cell grid rerun with 1, 4 and 1 workers: tables " +
                  std::string(ok ? "byte-identical" : "differ")};
}

}  // namespace

// Usage: acceptance [--fig2-results DIR] [criterion ...]
// Exit status: 0 when every selected criterion passes, kKnownGapExit when the
// only failures are known gaps, 1 otherwise.
constexpr int kKnownGapExit = 77;

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--fig2-results" && i + 1 < argc) {
      g_fig2_dir = argv[++i];
    } else {
      only.insert(std::atoi(argv[i]));
    }
  }
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"closed form vs Monte Carlo", criterion_1}, {"Fig. 2 regression", criterion_2},
      {"scheme ordering", criterion_3},           {"layer gain", criterion_4},
      {"overhead trend", criterion_5},            {"convergence", criterion_6},
      {"gradient oracle", criterion_7},           {"perfect recovery", criterion_8},
      {"low-rank variant", criterion_9},          {"determinism", criterion_10}};
  int unexpected = 0, gaps = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    const bool known = kKnownGaps.count(id) > 0;
    if (!v.pass) ++(known ? gaps : unexpected);
    std::printf("%s criterion %d (%s): %s%s\n", v.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                v.detail.c_str(), !v.pass && known ? " [known gap]" : "");
    std::fflush(stdout);
  }
  if (unexpected > 0) return 1;
  return gaps > 0 ? kKnownGapExit : 0;
}
