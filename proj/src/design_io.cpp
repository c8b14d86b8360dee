#include "simce/design_io.hpp"

#include <fstream>

namespace simce {

using nlohmann::json;

json design_to_json(const StoredDesign& stored) {
  const auto& d = stored.design;
  const auto& h = d.hyper;
  json doc;
  doc["format"] = kDesignFormat;
  doc["version"] = kDesignFormatVersion;
  doc["scheme"] = stored.scheme;
  doc["config"] = to_json(stored.config);
  doc["hyper"] = {{"learning_rate", h.learning_rate},
                  {"decay", h.decay},
                  {"tolerance", h.tolerance},
                  {"max_iters", h.max_iters},
                  {"restarts", h.num_restarts},
                  {"seed", h.seed},
                  {"relative_tolerance", h.relative_tolerance},
                  {"decay_on_no_improvement", h.decay_on_no_improvement}};
  doc["shape"] = {{"subphases", d.phases.subphases()},
                  {"layers", d.phases.layers()},
                  {"atoms", d.phases.atoms()}};
  doc["theta"] = d.phases.values();
  doc["user_nmse"] = d.user_nmse;
  doc["average_nmse"] = d.average_nmse;
  doc["objective_trace"] = d.objective_trace;
  doc["iterations"] = d.iterations;
  doc["converged"] = d.converged;
  return doc;
}

StoredDesign design_from_json(const json& doc) {
  StoredDesign out;
  try {
    if (doc.at("format").get<std::string>() != kDesignFormat) {
      throw ConfigError("format", "not an estimator design artifact");
    }
    if (doc.at("version").get<int>() != kDesignFormatVersion) {
      throw ConfigError("version", "unsupported design artifact version");
    }
    out.scheme = doc.at("scheme").get<std::string>();
    out.config = parse_config(doc.at("config"));

    auto& d = out.design;
    const auto& h = doc.at("hyper");
    d.hyper.learning_rate = h.at("learning_rate").get<double>();
    d.hyper.decay = h.at("decay").get<double>();
    d.hyper.tolerance = h.at("tolerance").get<double>();
    d.hyper.max_iters = h.at("max_iters").get<int>();
    d.hyper.num_restarts = h.at("restarts").get<int>();
    d.hyper.seed = h.at("seed").get<std::uint64_t>();
    d.hyper.relative_tolerance = h.at("relative_tolerance").get<bool>();
    d.hyper.decay_on_no_improvement = h.at("decay_on_no_improvement").get<bool>();

    const auto& shape = doc.at("shape");
    d.phases = PhaseBook(shape.at("subphases").get<int>(), shape.at("layers").get<int>(),
                         shape.at("atoms").get<int>());
    auto theta = doc.at("theta").get<std::vector<double>>();
    if (theta.size() != d.phases.values().size()) {
      throw ConfigError("theta", "length does not match shape");
    }
    d.phases.values() = std::move(theta);
    d.user_nmse = doc.at("user_nmse").get<std::vector<double>>();
    d.average_nmse = doc.at("average_nmse").get<double>();
    d.objective_trace = doc.at("objective_trace").get<std::vector<double>>();
    d.iterations = doc.at("iterations").get<int>();
    d.converged = doc.at("converged").get<bool>();
  } catch (const json::exception& e) {
    throw ConfigError("design", std::string("malformed artifact: ") + e.what());
  }
  return out;
}

void save_design(const std::filesystem::path& path, const StoredDesign& stored) {
  std::ofstream out(path);
  if (!out) throw ConfigError("design", "cannot write " + path.string());
  out << design_to_json(stored).dump(2) << '\n';
}

StoredDesign load_design(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("design", "cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("design", std::string("parse error: ") + e.what());
  }
  return design_from_json(doc);
}

}  // namespace simce
