#include "simce/config.hpp"

#include <fstream>
#include <set>
#include <string>

namespace simce {

using nlohmann::json;

namespace {

// Reads typed fields from one JSON object and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& doc, std::string path) : path_(std::move(path)) {
    if (doc.is_null()) return;
    if (!doc.is_object()) throw ConfigError(path_, "must be an object");
    doc_ = &doc;
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return doc_ && doc_->contains(key) && !doc_->at(key).is_null();
  }

  template <class T>
  void read(const std::string& key, T& out) {
    if (!has(key)) return;
    try {
      out = doc_->at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(name(key), std::string("wrong type: ") + e.what());
    }
  }

  template <class T>
  void read(const std::string& key, std::optional<T>& out) {
    if (!has(key)) return;
    T v{};
    read(key, v);
    out = v;
  }

  const json& child(const std::string& key) {
    seen_.insert(key);
    static const json null_json;
    return doc_ && doc_->contains(key) ? doc_->at(key) : null_json;
  }

  std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    if (!doc_) return;
    for (const auto& [key, value] : doc_->items()) {
      if (!seen_.count(key)) throw ConfigError(name(key), "unknown key");
    }
  }

 private:
  const json* doc_ = nullptr;
  std::string path_;
  std::set<std::string> seen_;
};

void parse_geometry(const json& doc, GeometryConfig& g) {
  Section sec(doc, "geometry");
  sec.read("frequency_hz", g.frequency_hz);
  sec.read("wavelength_m", g.wavelength_m);
  sec.read("num_antennas", g.num_antennas);
  std::optional<int> atoms;
  sec.read("atoms", atoms);
  if (atoms) std::tie(g.nx, g.nz) = grid_shape(*atoms);
  sec.read("nx", g.nx);
  sec.read("nz", g.nz);
  if (atoms && g.nx * g.nz != *atoms) throw ConfigError("geometry.atoms", "must equal nx * nz");
  sec.read("num_layers", g.num_layers);
  sec.read("sim_thickness_m", g.sim_thickness_m);
  sec.read("center_height_m", g.center_height_m);
  sec.read("tx_gap_m", g.tx_gap_m);

  if (!(g.frequency_hz > 0.0) && !g.wavelength_m) {
    throw ConfigError("geometry.frequency_hz", "must be positive");
  }
  const double wavelength = g.wavelength_m.value_or(kSpeedOfLight / g.frequency_hz);
  // Lengths may be given in meters or in wavelengths, not both.
  auto length = [&](const std::string& stem, std::optional<double>& out) {
    std::optional<double> meters;
    std::optional<double> waves;
    sec.read(stem + "_m", meters);
    sec.read(stem + "_wavelengths", waves);
    if (meters && waves) throw ConfigError(sec.name(stem + "_m"), "give meters or wavelengths");
    if (meters) out = meters;
    if (waves) out = *waves * wavelength;
  };
  length("atom_spacing", g.atom_spacing_m);
  length("atom_width", g.atom_width_m);
  length("atom_height", g.atom_height_m);
  length("antenna_spacing", g.antenna_spacing_m);
  sec.finish();
}

void parse_users(const json& doc, UsersConfig& u) {
  Section sec(doc, "users");
  sec.read("distances_m", u.distances_m);
  sec.read("path_loss_exponent", u.path_loss_exponent);
  sec.read("ref_distance_m", u.ref_distance_m);
  sec.read("ref_gain", u.ref_gain);
  sec.finish();
}

void parse_pilot(const json& doc, SimulationConfig& c) {
  Section sec(doc, "pilot");
  sec.read("power_w", c.pilot.power_w);
  sec.read("length", c.pilot.length);
  sec.read("noise_dbm", c.pilot.noise_dbm);
  sec.read("noise_variance_w", c.pilot.noise_variance_w);
  sec.read("effective_snr_db", c.effective_snr_db);
  sec.finish();
}

void parse_estimator(const json& doc, EstimatorConfig& e) {
  Section sec(doc, "estimator");
  sec.read("subphases", e.subphases);
  sec.read("codebook_size", e.codebook_size);
  sec.read("low_rank_threshold", e.low_rank_threshold);
  sec.read("learning_rate", e.hyper.learning_rate);
  sec.read("decay", e.hyper.decay);
  sec.read("tolerance", e.hyper.tolerance);
  sec.read("max_iters", e.hyper.max_iters);
  sec.read("restarts", e.hyper.num_restarts);
  sec.read("relative_tolerance", e.hyper.relative_tolerance);
  sec.read("decay_on_no_improvement", e.hyper.decay_on_no_improvement);
  sec.finish();
}

void parse_monte_carlo(const json& doc, SimulationConfig& c) {
  Section sec(doc, "monte_carlo");
  sec.read("trials", c.trials);
  std::string path = c.training_path == TrainingPath::kFull ? "full" : "reduced";
  sec.read("path", path);
  if (path == "reduced") {
    c.training_path = TrainingPath::kReduced;
  } else if (path == "full") {
    c.training_path = TrainingPath::kFull;
  } else {
    throw ConfigError("monte_carlo.path", "expected \"reduced\" or \"full\"");
  }
  if (c.trials < 1) throw ConfigError("monte_carlo.trials", "must be at least 1");
  sec.finish();
}

}  // namespace

int SimulationConfig::resolved_subphases() const {
  const int s = estimator.subphases.value_or(min_subphases(atoms(), geometry.num_antennas));
  if (s < 1) throw ConfigError("estimator.subphases", "must be at least 1");
  return s;
}

int SimulationConfig::resolved_codebook_size() const {
  const int size = estimator.codebook_size.value_or(10 * geometry.num_layers * atoms());
  if (size < 1) throw ConfigError("estimator.codebook_size", "must be at least 1");
  return size;
}

SimulationConfig parse_config(const json& doc) {
  SimulationConfig c;
  Section root(doc, "");
  std::uint64_t seed = c.seed;
  root.read("seed", seed);
  c.seed = seed;
  parse_geometry(root.child("geometry"), c.geometry);
  parse_users(root.child("users"), c.users);
  parse_pilot(root.child("pilot"), c);
  parse_estimator(root.child("estimator"), c.estimator);
  parse_monte_carlo(root.child("monte_carlo"), c);
  root.child("grid");  // consumed by the experiment harness
  root.finish();
  c.estimator.hyper.seed = c.seed;
  return c;
}

SimulationConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("parse error: ") + e.what());
  }
  return parse_config(doc);
}

json to_json(const SimulationConfig& c) {
  json g;
  g["frequency_hz"] = c.geometry.frequency_hz;
  if (c.geometry.wavelength_m) g["wavelength_m"] = *c.geometry.wavelength_m;
  g["num_antennas"] = c.geometry.num_antennas;
  g["nx"] = c.geometry.nx;
  g["nz"] = c.geometry.nz;
  g["num_layers"] = c.geometry.num_layers;
  g["sim_thickness_m"] = c.geometry.sim_thickness_m;
  g["center_height_m"] = c.geometry.center_height_m;
  if (c.geometry.tx_gap_m) g["tx_gap_m"] = *c.geometry.tx_gap_m;
  if (c.geometry.atom_spacing_m) g["atom_spacing_m"] = *c.geometry.atom_spacing_m;
  if (c.geometry.atom_width_m) g["atom_width_m"] = *c.geometry.atom_width_m;
  if (c.geometry.atom_height_m) g["atom_height_m"] = *c.geometry.atom_height_m;
  if (c.geometry.antenna_spacing_m) g["antenna_spacing_m"] = *c.geometry.antenna_spacing_m;

  json u;
  u["distances_m"] = c.users.distances_m;
  u["path_loss_exponent"] = c.users.path_loss_exponent;
  u["ref_distance_m"] = c.users.ref_distance_m;
  if (c.users.ref_gain) u["ref_gain"] = *c.users.ref_gain;

  json p;
  p["power_w"] = c.pilot.power_w;
  if (c.pilot.length) p["length"] = *c.pilot.length;
  p["noise_dbm"] = c.pilot.noise_dbm;
  if (c.pilot.noise_variance_w) p["noise_variance_w"] = *c.pilot.noise_variance_w;
  if (c.effective_snr_db) p["effective_snr_db"] = *c.effective_snr_db;

  json e;
  if (c.estimator.subphases) e["subphases"] = *c.estimator.subphases;
  if (c.estimator.codebook_size) e["codebook_size"] = *c.estimator.codebook_size;
  e["low_rank_threshold"] = c.estimator.low_rank_threshold;
  e["learning_rate"] = c.estimator.hyper.learning_rate;
  e["decay"] = c.estimator.hyper.decay;
  e["tolerance"] = c.estimator.hyper.tolerance;
  e["max_iters"] = c.estimator.hyper.max_iters;
  e["restarts"] = c.estimator.hyper.num_restarts;
  e["relative_tolerance"] = c.estimator.hyper.relative_tolerance;
  e["decay_on_no_improvement"] = c.estimator.hyper.decay_on_no_improvement;

  json mc;
  mc["trials"] = c.trials;
  mc["path"] = c.training_path == TrainingPath::kFull ? "full" : "reduced";

  return json{{"seed", c.seed},   {"geometry", g},  {"users", u},
              {"pilot", p},       {"estimator", e}, {"monte_carlo", mc}};
}

Scenario build_scenario(const SimulationConfig& config) {
  Scenario s;
  s.config = config;
  s.geometry = build_geometry(config.geometry);
  s.model = build_wave_model(s.geometry);
  s.stats = build_channel_stats(s.geometry, config.users, config.pilot);
  if (config.effective_snr_db) s.stats = with_effective_snr_db(std::move(s.stats), *config.effective_snr_db);
  s.subphases = config.resolved_subphases();
  return s;
}

}  // namespace simce
