#include "simce/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "simce/parallel.hpp"

namespace simce {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const char* const kResultHeader =
    "cell,scheme,N,M,L,S,K,effective_snr_db,threshold,rank,user,closed_form_nmse,"
    "empirical_nmse,empirical_se,trials,seed,iterations,converged,error";

std::string sanitize(std::string text) {
  for (char& c : text) {
    if (c == ',') c = ';';
    if (c == '\n' || c == '\r') c = ' ';
  }
  return text;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s) {
  if (s == "nan") return kNaN;
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  return std::stod(s);
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string scheme_name(Scheme scheme) {
  switch (scheme) {
    case Scheme::kOptimized: return "SIM-Optimized";
    case Scheme::kCodebook: return "SIM-Codebook";
    case Scheme::kConventional: return "Conventional";
    case Scheme::kOptimizedLowRank: return "SIM-Optimized-LowRank";
  }
  return "unknown";
}

Scheme parse_scheme(const std::string& name) {
  for (Scheme s : {Scheme::kOptimized, Scheme::kCodebook, Scheme::kConventional,
                   Scheme::kOptimizedLowRank}) {
    if (scheme_name(s) == name) return s;
  }
  throw ConfigError("scheme", "unknown scheme \"" + name + "\"");
}

SchemeOutcome design_scheme(const Scenario& scenario, Scheme scheme,
                            std::optional<int> subphases, int workers) {
  const auto& cfg = scenario.config;
  const int n = scenario.model.atoms();
  const int m = scenario.model.antennas();
  SchemeOutcome out;
  out.scheme = scheme;
  out.rank = n;

  DesignTarget full = DesignTarget::from_stats(scenario.stats);

  auto fill_from_design = [&](EstimatorDesign design) {
    out.user_nmse = design.user_nmse;
    out.average_nmse = design.average_nmse;
    out.design = std::move(design);
  };

  switch (scheme) {
    case Scheme::kConventional: {
      ConventionalResult conv = conventional_mmse(full.covariances, full.rho_tau);
      out.subphases = 1;
      out.user_nmse = conv.user_nmse;
      out.average_nmse = conv.average_nmse;
      out.conventional = std::move(conv);
      break;
    }
    case Scheme::kOptimized:
      out.subphases = subphases.value_or(scenario.subphases);
      fill_from_design(design_estimator(scenario.model, full, out.subphases,
                                        cfg.estimator.hyper, workers));
      break;
    case Scheme::kCodebook:
      out.subphases = subphases.value_or(scenario.subphases);
      fill_from_design(codebook_baseline(scenario.model, full, out.subphases,
                                         cfg.resolved_codebook_size(), cfg.seed, workers));
      break;
    case Scheme::kOptimizedLowRank: {
      const DesignTarget reduced =
          DesignTarget::low_rank(scenario.stats, cfg.estimator.low_rank_threshold);
      out.rank = reduced.max_rank();
      out.subphases = subphases.value_or(
          cfg.estimator.subphases.value_or(min_subphases(out.rank, m)));
      EstimatorDesign design =
          design_estimator(scenario.model, reduced, out.subphases, cfg.estimator.hyper, workers);
      // Report against the physical covariance, not the truncated one.
      const CMatrix a = observation_map(scenario.model, design.phases);
      double sum = 0.0;
      for (int k = 0; k < full.num_users(); ++k) {
        const double v =
            nmse_closed_form(a, design.digital[k], full.covariances[k], full.rho_tau);
        design.user_nmse[k] = v;
        sum += v;
      }
      design.average_nmse = sum / full.num_users();
      fill_from_design(std::move(design));
      break;
    }
  }
  return out;
}

PhaseEvaluation evaluate_design(const StoredDesign& stored) {
  const Scenario scenario = build_scenario(stored.config);
  const Scheme scheme = parse_scheme(stored.scheme);
  if (scheme == Scheme::kConventional) {
    throw ConfigError("scheme", "conventional designs carry no phases");
  }
  const DesignTarget full = DesignTarget::from_stats(scenario.stats);
  if (scheme != Scheme::kOptimizedLowRank) {
    return evaluate_phases(scenario.model, full, stored.design.phases);
  }
  const DesignTarget reduced =
      DesignTarget::low_rank(scenario.stats, stored.config.estimator.low_rank_threshold);
  PhaseEvaluation eval = evaluate_phases(scenario.model, reduced, stored.design.phases);
  const CMatrix a = observation_map(scenario.model, stored.design.phases);
  double sum = 0.0;
  for (int k = 0; k < full.num_users(); ++k) {
    eval.user_nmse[k] = nmse_closed_form(a, eval.digital[k], full.covariances[k], full.rho_tau);
    sum += eval.user_nmse[k];
  }
  eval.average_nmse = sum / full.num_users();
  return eval;
}

NmseEstimate simulate_outcome(const Scenario& scenario, const SchemeOutcome& outcome,
                              const TrialConfig& trials) {
  if (outcome.conventional) {
    return summarize(run_conventional_trials(*outcome.conventional, scenario.stats, trials));
  }
  return summarize(run_trials(scenario.model, outcome.design->phases, outcome.design->digital,
                              scenario.stats, trials));
}

ExperimentGrid parse_grid(const json& doc) {
  ExperimentGrid grid;
  grid.base = parse_config(doc);
  grid.seed = grid.base.seed;
  grid.trials = grid.base.trials;
  if (!doc.contains("grid")) return grid;
  const json& g = doc.at("grid");
  if (!g.is_object()) throw ConfigError("grid", "must be an object");
  try {
    for (const auto& [key, value] : g.items()) {
      if (key == "axes") {
        for (const auto& [axis, list] : value.items()) {
          if (!list.is_array()) throw ConfigError("grid.axes." + axis, "must be a list");
          if (axis == "effective_snr_db") {
            grid.effective_snr_db = list.get<std::vector<double>>();
          } else if (axis == "N") {
            grid.atoms = list.get<std::vector<int>>();
          } else if (axis == "M") {
            grid.antennas = list.get<std::vector<int>>();
          } else if (axis == "L") {
            grid.layers = list.get<std::vector<int>>();
          } else if (axis == "S") {
            grid.subphases = list.get<std::vector<int>>();
          } else if (axis == "threshold") {
            grid.thresholds = list.get<std::vector<double>>();
          } else if (axis == "scheme") {
            grid.schemes.clear();
            for (const auto& s : list) grid.schemes.push_back(parse_scheme(s.get<std::string>()));
          } else {
            throw ConfigError("grid.axes." + axis, "unknown axis");
          }
        }
      } else if (key == "trials") {
        grid.trials = value.get<int>();
      } else if (key == "seed") {
        grid.seed = value.get<std::uint64_t>();
      } else if (key == "monte_carlo") {
        grid.monte_carlo = value.get<bool>();
      } else if (key == "workers") {
        grid.workers = value.get<int>();
      } else {
        throw ConfigError("grid." + key, "unknown key");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError("grid", std::string("wrong type: ") + e.what());
  }
  if (grid.schemes.empty()) throw ConfigError("grid.axes.scheme", "must not be empty");
  if (grid.trials < 1) throw ConfigError("grid.trials", "must be at least 1");
  return grid;
}

ExperimentGrid load_grid(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("parse error: ") + e.what());
  }
  return parse_grid(doc);
}

std::vector<GridCell> enumerate_cells(const ExperimentGrid& grid) {
  auto axis = [](const auto& values) {
    using T = typename std::decay_t<decltype(values)>::value_type;
    std::vector<std::optional<T>> out;
    if (values.empty()) {
      out.emplace_back();
    } else {
      for (const auto& v : values) out.emplace_back(v);
    }
    return out;
  };

  std::vector<GridCell> cells;
  for (const auto& snr : axis(grid.effective_snr_db)) {
    for (const auto& n : axis(grid.atoms)) {
      for (const auto& m : axis(grid.antennas)) {
        for (const auto& l : axis(grid.layers)) {
          for (const auto& s : axis(grid.subphases)) {
            for (Scheme scheme : grid.schemes) {
              // Conventional ignores S; the threshold only applies to the low-rank variant.
              if (scheme == Scheme::kConventional && s && *s != grid.subphases.front()) continue;
              for (const auto& thr : axis(grid.thresholds)) {
                if (scheme != Scheme::kOptimizedLowRank && thr && *thr != grid.thresholds.front()) {
                  continue;
                }
                GridCell cell;
                cell.index = static_cast<int>(cells.size());
                cell.scheme = scheme;
                cell.config = grid.base;
                cell.config.seed = grid.seed;
                cell.config.estimator.hyper.seed = grid.seed;
                cell.config.trials = grid.trials;
                if (snr) cell.config.effective_snr_db = *snr;
                if (n) std::tie(cell.config.geometry.nx, cell.config.geometry.nz) = grid_shape(*n);
                if (m) cell.config.geometry.num_antennas = *m;
                if (l) cell.config.geometry.num_layers = *l;
                if (scheme != Scheme::kConventional) cell.subphases = s;
                if (scheme == Scheme::kOptimizedLowRank) {
                  cell.threshold = thr.value_or(grid.base.estimator.low_rank_threshold);
                  cell.config.estimator.low_rank_threshold = *cell.threshold;
                }
                cells.push_back(std::move(cell));
              }
            }
          }
        }
      }
    }
  }
  return cells;
}

void validate_cells(const std::vector<GridCell>& cells) {
  for (const auto& cell : cells) {
    try {
      const SimGeometry geom = build_geometry(cell.config.geometry);
      const ChannelStats stats = build_channel_stats(geom, cell.config.users, cell.config.pilot);
      if (cell.config.effective_snr_db) with_effective_snr_db(stats, *cell.config.effective_snr_db);
      if (cell.subphases && *cell.subphases < 1) throw ConfigError("S", "must be at least 1");
      cell.config.resolved_subphases();
      if (cell.threshold && !(*cell.threshold > 0.0 && *cell.threshold <= 1.0)) {
        throw ConfigError("threshold", "must lie in (0, 1]");
      }
    } catch (const ConfigError& e) {
      throw ConfigError(e.field(), "cell " + std::to_string(cell.index) + ": " + e.what());
    } catch (const std::exception& e) {
      throw ConfigError("cell " + std::to_string(cell.index), e.what());
    }
  }
}

namespace {

struct CellOutput {
  ResultRow summary;
  std::vector<ResultRow> users;
  std::vector<double> trace;
  double seconds = 0.0;
};

CellOutput run_cell(const GridCell& cell, const ExperimentGrid& grid) {
  const auto start = std::chrono::steady_clock::now();
  CellOutput out;
  ResultRow& row = out.summary;
  row.cell = cell.index;
  row.scheme = scheme_name(cell.scheme);
  row.atoms = cell.config.atoms();
  row.antennas = cell.config.geometry.num_antennas;
  row.layers = cell.config.geometry.num_layers;
  row.users = static_cast<int>(cell.config.users.distances_m.size());
  row.effective_snr_db = cell.config.effective_snr_db.value_or(kNaN);
  row.threshold = cell.threshold.value_or(kNaN);
  row.user = "avg";
  row.closed_form = row.empirical = row.empirical_se = kNaN;
  row.seed = grid.seed;

  try {
    const Scenario scenario = build_scenario(cell.config);
    if (!cell.config.effective_snr_db) {
      row.effective_snr_db = linear_to_db(effective_training_snr(scenario.stats));
    }
    const SchemeOutcome outcome = design_scheme(scenario, cell.scheme, cell.subphases);
    row.subphases = outcome.subphases;
    row.rank = outcome.rank;
    row.closed_form = outcome.average_nmse;
    if (outcome.design) {
      row.iterations = outcome.design->iterations;
      row.converged = outcome.design->converged;
      out.trace = outcome.design->objective_trace;
    } else {
      row.converged = true;
    }

    std::optional<NmseEstimate> mc;
    if (grid.monte_carlo) {
      TrialConfig trials;
      trials.trials = grid.trials;
      trials.seed = grid.seed;
      trials.training.path = cell.config.training_path;
      mc = simulate_outcome(scenario, outcome, trials);
      row.empirical = mc->mean;
      row.empirical_se = mc->se;
      row.trials = mc->trials;
    }
    for (std::size_t k = 0; k < outcome.user_nmse.size(); ++k) {
      ResultRow u = row;
      u.user = std::to_string(k);
      u.closed_form = outcome.user_nmse[k];
      if (mc) {
        u.empirical = mc->user_mean[k];
        u.empirical_se = mc->user_se[k];
      }
      out.users.push_back(std::move(u));
    }
  } catch (const std::exception& e) {
    row.error = sanitize(e.what());
    if (row.error.empty()) row.error = "unknown error";
  }
  out.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace

GridResult run_grid(const ExperimentGrid& grid) {
  const std::vector<GridCell> cells = enumerate_cells(grid);
  validate_cells(cells);

  std::vector<CellOutput> outputs(cells.size());
  parallel_for(cells.size(), grid.workers,
               [&](std::size_t i) { outputs[i] = run_cell(cells[i], grid); });

  GridResult result;
  for (auto& out : outputs) {
    if (!out.summary.error.empty()) ++result.failures;
    for (std::size_t p = 0; p < out.trace.size(); ++p) {
      result.traces.push_back({out.summary.cell, static_cast<int>(p), out.trace[p]});
    }
    result.rows.push_back(std::move(out.summary));
    for (auto& u : out.users) result.user_rows.push_back(std::move(u));
    result.wall_seconds.push_back(out.seconds);
  }
  return result;
}

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << kResultHeader << '\n';
  for (const auto& r : rows) {
    out << r.cell << ',' << r.scheme << ',' << r.atoms << ',' << r.antennas << ',' << r.layers
        << ',' << r.subphases << ',' << r.users << ',' << format_double(r.effective_snr_db) << ','
        << format_double(r.threshold) << ',' << r.rank << ',' << r.user << ','
        << format_double(r.closed_form) << ',' << format_double(r.empirical) << ','
        << format_double(r.empirical_se) << ',' << r.trials << ',' << r.seed << ','
        << r.iterations << ',' << (r.converged ? 1 : 0) << ',' << r.error << '\n';
  }
}

void write_traces_csv(std::ostream& out, const std::vector<TraceRow>& traces) {
  out << "cell,iteration,objective\n";
  for (const auto& t : traces) {
    out << t.cell << ',' << t.iteration << ',' << format_double(t.objective) << '\n';
  }
}

std::vector<ResultRow> read_results_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kResultHeader) {
    throw ConfigError("results", "missing or unexpected results header");
  }
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 19) throw ConfigError("results", "malformed row: " + line);
    ResultRow r;
    try {
      r.cell = std::stoi(f[0]);
      r.scheme = f[1];
      r.atoms = std::stoi(f[2]);
      r.antennas = std::stoi(f[3]);
      r.layers = std::stoi(f[4]);
      r.subphases = std::stoi(f[5]);
      r.users = std::stoi(f[6]);
      r.effective_snr_db = parse_double(f[7]);
      r.threshold = parse_double(f[8]);
      r.rank = std::stoi(f[9]);
      r.user = f[10];
      r.closed_form = parse_double(f[11]);
      r.empirical = parse_double(f[12]);
      r.empirical_se = parse_double(f[13]);
      r.trials = std::stoi(f[14]);
      r.seed = std::stoull(f[15]);
      r.iterations = std::stoi(f[16]);
      r.converged = f[17] == "1";
      r.error = f[18];
    } catch (const std::logic_error&) {
      throw ConfigError("results", "malformed row: " + line);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<TraceRow> read_traces_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "cell,iteration,objective") {
    throw ConfigError("traces", "missing or unexpected traces header");
  }
  std::vector<TraceRow> traces;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 3) throw ConfigError("traces", "malformed row: " + line);
    traces.push_back({std::stoi(f[0]), std::stoi(f[1]), parse_double(f[2])});
  }
  return traces;
}

void write_grid_outputs(const std::filesystem::path& dir, const GridResult& result) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(dir / name);
    if (!f) throw ConfigError("output", "cannot write " + (dir / name).string());
    return f;
  };
  {
    auto f = open("results.csv");
    write_results_csv(f, result.rows);
  }
  {
    auto f = open("user_results.csv");
    write_results_csv(f, result.user_rows);
  }
  {
    auto f = open("traces.csv");
    write_traces_csv(f, result.traces);
  }
  {
    auto f = open("timings.csv");
    f << "cell,wall_seconds\n";
    for (std::size_t i = 0; i < result.wall_seconds.size(); ++i) {
      f << result.rows[i].cell << ',' << format_double(result.wall_seconds[i]) << '\n';
    }
  }
}

namespace {

enum class Param { kN, kM, kL, kS, kSnr, kThreshold };

std::string param_value(const ResultRow& r, Param p) {
  switch (p) {
    case Param::kN: return std::to_string(r.atoms);
    case Param::kM: return std::to_string(r.antennas);
    case Param::kL: return std::to_string(r.layers);
    case Param::kS: return std::to_string(r.subphases);
    case Param::kSnr: return format_double(r.effective_snr_db);
    case Param::kThreshold: return format_double(r.threshold);
  }
  return {};
}

const char* param_tag(Param p) {
  switch (p) {
    case Param::kN: return "N";
    case Param::kM: return "M";
    case Param::kL: return "L";
    case Param::kS: return "S";
    case Param::kSnr: return "snr";
    case Param::kThreshold: return "thr";
  }
  return "";
}

struct Point {
  double x;
  double y;
  double err;
};

// Series label from the scheme plus every parameter that varies across `rows`
// (other than the x axis).
std::vector<Param> varying_params(const std::vector<const ResultRow*>& rows,
                                  std::optional<Param> x_axis) {
  std::vector<Param> out;
  for (Param p : {Param::kN, Param::kM, Param::kL, Param::kS, Param::kSnr, Param::kThreshold}) {
    if (x_axis && p == *x_axis) continue;
    for (const auto* r : rows) {
      if (param_value(*r, p) != param_value(*rows.front(), p)) {
        out.push_back(p);
        break;
      }
    }
  }
  return out;
}

std::string series_label(const ResultRow& r, const std::vector<Param>& params) {
  std::string label = r.scheme;
  for (Param p : params) label += std::string("_") + param_tag(p) + param_value(r, p);
  return label;
}

void write_series(const std::filesystem::path& path, const char* x_name,
                  const std::vector<Point>& points) {
  std::ofstream f(path);
  if (!f) throw ConfigError("output", "cannot write " + path.string());
  f << x_name << ",y,y_err\n";
  for (const auto& p : points) {
    f << format_double(p.x) << ',' << format_double(p.y) << ',' << format_double(p.err) << '\n';
  }
}

}  // namespace

FigureEmission emit_figure_data(const std::vector<ResultRow>& rows,
                                const std::vector<TraceRow>& traces, const std::string& figure,
                                const std::filesystem::path& dir) {
  std::optional<Param> x_axis;
  const char* x_name = "x";
  if (figure == "fig2") {
    x_axis = Param::kSnr;
    x_name = "effective_snr_db";
  } else if (figure == "fig3") {
    x_axis = Param::kL;
    x_name = "L";
  } else if (figure == "fig4") {
    x_axis = Param::kS;
    x_name = "S";
  } else if (figure == "fig5") {
    x_name = "iteration";
  } else {
    throw ConfigError("figure", "unknown figure id \"" + figure + "\"");
  }
  std::filesystem::create_directories(dir);

  FigureEmission emission;
  std::vector<const ResultRow*> usable;
  for (const auto& r : rows) {
    if (r.user != "avg") continue;
    if (!r.error.empty()) {
      emission.gaps.push_back("cell " + std::to_string(r.cell) + " " + r.scheme + ": " + r.error);
      continue;
    }
    if (!std::isfinite(r.closed_form)) {
      emission.gaps.push_back("cell " + std::to_string(r.cell) + " " + r.scheme +
                              ": non-finite closed-form NMSE");
      continue;
    }
    if (figure == "fig5" && r.scheme != "SIM-Optimized" && r.scheme != "SIM-Optimized-LowRank") {
      continue;
    }
    usable.push_back(&r);
  }

  struct Series {
    std::string scheme;
    std::string kind;
    std::vector<Point> points;
  };
  std::map<std::string, Series> series;
  const std::vector<Param> params = varying_params(usable, x_axis);

  if (figure == "fig5") {
    std::map<int, const ResultRow*> by_cell;
    for (const auto* r : usable) by_cell[r->cell] = r;
    for (const auto& t : traces) {
      const auto it = by_cell.find(t.cell);
      if (it == by_cell.end()) continue;
      auto& s = series[series_label(*it->second, params) + "_trace"];
      s.scheme = it->second->scheme;
      s.kind = "trace";
      s.points.push_back({static_cast<double>(t.iteration), t.objective, 0.0});
    }
    for (const auto& [cell, row] : by_cell) {
      if (!series.count(series_label(*row, params) + "_trace")) {
        emission.gaps.push_back("cell " + std::to_string(cell) + ": no objective trace");
      }
    }
  } else {
    for (const auto* r : usable) {
      const double x = std::stod(param_value(*r, *x_axis) == "nan" ? "nan" : param_value(*r, *x_axis));
      const std::string label = series_label(*r, params);
      auto& theory = series[label + "_theory"];
      theory.scheme = r->scheme;
      theory.kind = "theory";
      theory.points.push_back({x, r->closed_form, 0.0});
      if (std::isfinite(r->empirical)) {
        auto& mc = series[label + "_mc"];
        mc.scheme = r->scheme;
        mc.kind = "mc";
        mc.points.push_back({x, r->empirical, r->empirical_se});
      }
    }
  }
  if (series.empty()) emission.gaps.push_back("no usable rows for " + figure);

  std::ofstream manifest(dir / (figure + "_manifest.csv"));
  if (!manifest) throw ConfigError("output", "cannot write manifest in " + dir.string());
  manifest << "figure,series_file,scheme,kind,points\n";
  for (auto& [label, s] : series) {
    std::stable_sort(s.points.begin(), s.points.end(),
                     [](const Point& a, const Point& b) { return a.x < b.x; });
    const std::filesystem::path path = dir / (figure + "_" + label + ".csv");
    write_series(path, x_name, s.points);
    emission.series_files.push_back(path);
    manifest << figure << ',' << path.filename().string() << ',' << s.scheme << ',' << s.kind
             << ',' << s.points.size() << '\n';
  }

  std::ofstream gaps(dir / (figure + "_gaps.txt"));
  gaps << emission.gaps.size() << " gap(s)\n";
  for (const auto& g : emission.gaps) gaps << g << '\n';
  return emission;
}

}  // namespace simce
