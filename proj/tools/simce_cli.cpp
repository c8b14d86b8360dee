#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

#include "simce/experiment.hpp"

using namespace simce;

namespace {

enum Exit { kOk = 0, kConfigFailure = 1, kPartial = 2, kInternal = 3 };

void log(const std::string& msg) { std::cerr << "[simce] " << msg << '\n'; }

int cmd_design(const std::string& config_path, const std::string& scheme_arg,
               std::optional<int> subphases, const std::string& out_path, int workers) {
  const SimulationConfig config = load_config(config_path);
  const Scheme scheme = parse_scheme(scheme_arg);
  if (scheme == Scheme::kConventional) {
    throw ConfigError("scheme", "conventional has no phases to store; use grid");
  }
  const Scenario scenario = build_scenario(config);
  for (const auto& w : scenario.stats.warnings) log("warning: " + w);
  log("designing " + scheme_arg + " N=" + std::to_string(scenario.model.atoms()) +
      " M=" + std::to_string(scenario.model.antennas()) +
      " L=" + std::to_string(scenario.model.num_layers()));
  SchemeOutcome outcome = design_scheme(scenario, scheme, subphases, workers);
  const auto& d = *outcome.design;
  std::printf("scheme %s S=%d rank=%d iterations=%d converged=%d\n", scheme_arg.c_str(),
              outcome.subphases, outcome.rank, d.iterations, d.converged ? 1 : 0);
  for (std::size_t k = 0; k < outcome.user_nmse.size(); ++k) {
    std::printf("user %zu nmse %.6e (%.3f dB)\n", k, outcome.user_nmse[k],
                linear_to_db(outcome.user_nmse[k]));
  }
  std::printf("average nmse %.6e (%.3f dB)\n", outcome.average_nmse,
              linear_to_db(outcome.average_nmse));
  if (!out_path.empty()) {
    StoredDesign stored{scheme_arg, config, d};
    stored.design.user_nmse = outcome.user_nmse;
    stored.design.average_nmse = outcome.average_nmse;
    save_design(out_path, stored);
    log("wrote " + out_path);
  }
  return kOk;
}

int cmd_evaluate(const std::string& design_path, int trials, int workers) {
  const StoredDesign stored = load_design(design_path);
  const PhaseEvaluation eval = evaluate_design(stored);
  std::printf("stored average nmse %.17g\n", stored.design.average_nmse);
  std::printf("recomputed average nmse %.17g\n", eval.average_nmse);
  if (trials > 0) {
    const Scenario scenario = build_scenario(stored.config);
    TrialConfig tc;
    tc.trials = trials;
    tc.seed = stored.config.seed;
    tc.workers = workers;
    tc.training.path = stored.config.training_path;
    const NmseEstimate mc = summarize(
        run_trials(scenario.model, stored.design.phases, eval.digital, scenario.stats, tc));
    std::printf("empirical average nmse %.6e se %.3e trials %d\n", mc.mean, mc.se, mc.trials);
  }
  return kOk;
}

int cmd_grid(const std::string& config_path, const std::string& out_dir, bool dry_run,
             std::optional<int> workers, std::optional<std::uint64_t> seed) {
  ExperimentGrid grid = load_grid(config_path);
  if (workers) grid.workers = *workers;
  if (seed) grid.seed = *seed;
  const auto cells = enumerate_cells(grid);
  validate_cells(cells);
  if (dry_run) {
    std::printf("cell,scheme,N,M,L,S,effective_snr_db,threshold\n");
    for (const auto& c : cells) {
      std::printf("%d,%s,%d,%d,%d,%s,%s,%s\n", c.index, scheme_name(c.scheme).c_str(),
                  c.config.atoms(), c.config.geometry.num_antennas, c.config.geometry.num_layers,
                  c.subphases ? std::to_string(*c.subphases).c_str() : "default",
                  c.config.effective_snr_db ? format_double(*c.config.effective_snr_db).c_str()
                                            : "config",
                  c.threshold ? format_double(*c.threshold).c_str() : "-");
    }
    log(std::to_string(cells.size()) + " cells");
    return kOk;
  }
  log("running " + std::to_string(cells.size()) + " cells with " +
      std::to_string(grid.workers) + " worker(s)");
  const GridResult result = run_grid(grid);
  write_grid_outputs(out_dir, result);
  for (const auto& r : result.rows) {
    if (!r.error.empty()) log("cell " + std::to_string(r.cell) + " failed: " + r.error);
  }
  log("wrote " + out_dir);
  return result.failures > 0 ? kPartial : kOk;
}

int cmd_figure(const std::string& results_dir, const std::vector<std::string>& figures,
               const std::string& out_dir) {
  std::ifstream rin(std::filesystem::path(results_dir) / "results.csv");
  if (!rin) throw ConfigError("results", "cannot open results.csv in " + results_dir);
  const auto rows = read_results_csv(rin);
  std::vector<TraceRow> traces;
  std::ifstream tin(std::filesystem::path(results_dir) / "traces.csv");
  if (tin) traces = read_traces_csv(tin);
  int code = kOk;
  for (const auto& fig : figures) {
    const FigureEmission em = emit_figure_data(rows, traces, fig, out_dir);
    log(fig + ": " + std::to_string(em.series_files.size()) + " series, " +
        std::to_string(em.gaps.size()) + " gap(s)");
    for (const auto& g : em.gaps) log("  gap: " + g);
    if (!em.gaps.empty()) code = kPartial;
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SIM-assisted channel estimation experiments"};
  app.require_subcommand(1);

  std::string config_path, design_out, grid_out, figure_out, scheme = "SIM-Optimized", design_path,
      results_dir;
  std::optional<int> subphases, workers_opt;
  std::optional<std::uint64_t> seed;
  int workers = 1, trials = 0;
  bool dry_run = false;
  std::vector<std::string> figures;

  auto* design = app.add_subcommand("design", "optimize one estimator and optionally store it");
  design->add_option("-c,--config", config_path, "JSON configuration")->required();
  design->add_option("--scheme", scheme, "SIM-Optimized, SIM-Codebook or SIM-Optimized-LowRank");
  design->add_option("-S,--subphases", subphases, "override the sub-phase count");
  design->add_option("-o,--out", design_out, "design artifact path");
  design->add_option("-w,--workers", workers, "worker threads")->check(CLI::PositiveNumber);

  auto* evaluate = app.add_subcommand("evaluate", "reload a stored design and re-evaluate it");
  evaluate->add_option("-d,--design", design_path, "design artifact")->required();
  evaluate->add_option("-t,--trials", trials, "Monte Carlo trials (0 skips)");
  evaluate->add_option("-w,--workers", workers, "worker threads")->check(CLI::PositiveNumber);

  auto* grid = app.add_subcommand("grid", "run a parameter sweep");
  grid->add_option("-c,--config", config_path, "JSON configuration with a grid section")
      ->required();
  grid->add_option("-o,--out", grid_out, "output directory")->default_val("results");
  grid->add_flag("--dry-run", dry_run, "list cells without running");
  grid->add_option("-w,--workers", workers_opt, "worker threads")->check(CLI::PositiveNumber);
  grid->add_option("--seed", seed, "master seed");

  auto* figure = app.add_subcommand("figure", "emit plot-ready series from grid results");
  figure->add_option("-r,--results", results_dir, "grid output directory")->required();
  figure->add_option("-f,--figure", figures, "fig2, fig3, fig4, fig5")->required();
  figure->add_option("-o,--out", figure_out, "output directory")->default_val("figures");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigFailure;
  }

  try {
    if (*design) return cmd_design(config_path, scheme, subphases, design_out, workers);
    if (*evaluate) return cmd_evaluate(design_path, trials, workers);
    if (*grid) return cmd_grid(config_path, grid_out, dry_run, workers_opt, seed);
    if (*figure) return cmd_figure(results_dir, figures, figure_out);
  } catch (const ConfigError& e) {
    log(std::string("configuration error: ") + e.what());
    return kConfigFailure;
  } catch (const std::exception& e) {
    log(std::string("error: ") + e.what());
    return kInternal;
  }
  return kInternal;
}
