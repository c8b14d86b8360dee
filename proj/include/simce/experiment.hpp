#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "simce/config.hpp"
#include "simce/design_io.hpp"

namespace simce {

enum class Scheme { kOptimized, kCodebook, kConventional, kOptimizedLowRank };

std::string scheme_name(Scheme scheme);
Scheme parse_scheme(const std::string& name);

// Designed (or closed-form) estimator for one scenario and scheme.
struct SchemeOutcome {
  Scheme scheme = Scheme::kOptimized;
  int subphases = 0;
  int rank = 0;                       // estimated dimension (N unless low-rank)
  std::vector<double> user_nmse;      // closed form against the true covariances
  double average_nmse = 0.0;
  std::optional<EstimatorDesign> design;          // SIM schemes
  std::optional<ConventionalResult> conventional;  // fully digital baseline
};

// Designs the requested scheme. `subphases` overrides the scheme default
// (ceil(N/M), or ceil(R/M) for the low-rank variant).
SchemeOutcome design_scheme(const Scenario& scenario, Scheme scheme,
                            std::optional<int> subphases = std::nullopt, int workers = 1);

// Closed-form NMSE of stored phases, digital stage recomputed.
PhaseEvaluation evaluate_design(const StoredDesign& stored);

NmseEstimate simulate_outcome(const Scenario& scenario, const SchemeOutcome& outcome,
                              const TrialConfig& trials);

// Axes of a sweep. Empty axes take the base configuration's value.
struct ExperimentGrid {
  SimulationConfig base;
  std::vector<double> effective_snr_db;
  std::vector<int> atoms;
  std::vector<int> antennas;
  std::vector<int> layers;
  std::vector<int> subphases;
  std::vector<Scheme> schemes{Scheme::kOptimized};
  std::vector<double> thresholds;
  int trials = 1000;
  std::uint64_t seed = 1;
  bool monte_carlo = true;
  int workers = 1;
};

ExperimentGrid parse_grid(const nlohmann::json& doc);
ExperimentGrid load_grid(const std::filesystem::path& path);

struct GridCell {
  int index = 0;
  Scheme scheme = Scheme::kOptimized;
  SimulationConfig config;
  std::optional<int> subphases;
  std::optional<double> threshold;
};

// Cartesian product in fixed order: SNR, N, M, L, S, scheme, threshold
// (first axis outermost).
std::vector<GridCell> enumerate_cells(const ExperimentGrid& grid);

// Builds every cell's geometry and channel statistics; throws ConfigError on
// the first invalid cell.
void validate_cells(const std::vector<GridCell>& cells);

struct ResultRow {
  int cell = 0;
  std::string scheme;
  int atoms = 0;
  int antennas = 0;
  int layers = 0;
  int subphases = 0;
  int users = 0;
  double effective_snr_db = 0.0;
  double threshold = 0.0;  // NaN unless low-rank
  int rank = 0;
  std::string user;  // "avg" or the user index
  double closed_form = 0.0;
  double empirical = 0.0;
  double empirical_se = 0.0;
  int trials = 0;
  std::uint64_t seed = 0;
  int iterations = 0;
  bool converged = false;
  std::string error;
};

struct TraceRow {
  int cell = 0;
  int iteration = 0;
  double objective = 0.0;
};

struct GridResult {
  std::vector<ResultRow> rows;       // one per cell, user == "avg"
  std::vector<ResultRow> user_rows;  // one per (cell, user)
  std::vector<TraceRow> traces;
  std::vector<double> wall_seconds;  // per cell; not part of the deterministic tables
  int failures = 0;
};

GridResult run_grid(const ExperimentGrid& grid);

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows);
void write_traces_csv(std::ostream& out, const std::vector<TraceRow>& traces);
std::vector<ResultRow> read_results_csv(std::istream& in);
std::vector<TraceRow> read_traces_csv(std::istream& in);

// results.csv, user_results.csv, traces.csv, timings.csv under `dir`.
void write_grid_outputs(const std::filesystem::path& dir, const GridResult& result);

struct FigureEmission {
  std::vector<std::filesystem::path> series_files;
  std::vector<std::string> gaps;
};

// Figure ids: fig2 (x = SNR), fig3 (x = L), fig4 (x = S), fig5 (x = iteration).
// Writes <figure>_<series>.csv files plus <figure>_manifest.csv.
FigureEmission emit_figure_data(const std::vector<ResultRow>& rows,
                                const std::vector<TraceRow>& traces, const std::string& figure,
                                const std::filesystem::path& dir);

// "%.17g", with nan/inf spelled out.
std::string format_double(double v);

}  // namespace simce
