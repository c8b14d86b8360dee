#include "simce/geometry.hpp"

#include <cmath>
#include <limits>

namespace simce {

namespace {

double require_positive(const char* field, double value) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw ConfigError(field, "must be a positive finite length");
  }
  return value;
}

int require_count(const char* field, int value) {
  if (value <= 0) throw ConfigError(field, "must be a positive integer");
  return value;
}

// Offsets of `count` points at pitch `spacing`, centered on zero.
double centered(int index, int count, double spacing) {
  return (static_cast<double>(index) - 0.5 * (count - 1)) * spacing;
}

}  // namespace

std::pair<int, int> grid_shape(int atoms) {
  if (atoms <= 0) throw ConfigError("N", "must be a positive integer");
  int nx = 1;
  for (int d = 1; static_cast<long long>(d) * d <= atoms; ++d) {
    if (atoms % d == 0) nx = d;
  }
  return {nx, atoms / nx};
}

SimGeometry build_geometry(const GeometryConfig& config) {
  SimGeometry g;
  if (config.wavelength_m) {
    g.wavelength = require_positive("wavelength_m", *config.wavelength_m);
  } else {
    g.wavelength = kSpeedOfLight / require_positive("frequency_hz", config.frequency_hz);
  }
  const double half = 0.5 * g.wavelength;

  g.num_antennas = require_count("num_antennas", config.num_antennas);
  g.num_layers = require_count("num_layers", config.num_layers);
  g.nx = require_count("nx", config.nx);
  g.nz = require_count("nz", config.nz);
  if (static_cast<long long>(g.nx) * g.nz > std::numeric_limits<int>::max() / 2) {
    throw ConfigError("nx", "nx * nz overflows the atom count");
  }

  g.sim_thickness = require_positive("sim_thickness_m", config.sim_thickness_m);
  g.atom_spacing = require_positive("atom_spacing_m", config.atom_spacing_m.value_or(half));
  g.atom_width = require_positive("atom_width_m", config.atom_width_m.value_or(g.atom_spacing));
  g.atom_height = require_positive("atom_height_m", config.atom_height_m.value_or(g.atom_spacing));
  g.antenna_spacing =
      require_positive("antenna_spacing_m", config.antenna_spacing_m.value_or(half));
  g.layer_gap = g.sim_thickness / g.num_layers;
  g.tx_gap = require_positive("tx_gap_m", config.tx_gap_m.value_or(g.layer_gap));
  g.center_height = require_positive("center_height_m", config.center_height_m);

  g.antennas.reserve(g.num_antennas);
  for (int m = 0; m < g.num_antennas; ++m) {
    g.antennas.push_back(
        {0.0, 0.0, g.center_height + centered(m, g.num_antennas, g.antenna_spacing)});
  }

  g.layers.resize(g.num_layers);
  for (int l = 0; l < g.num_layers; ++l) {
    const double y = g.tx_gap + l * g.layer_gap;
    auto& layer = g.layers[l];
    layer.reserve(g.atoms_per_layer());
    for (int iz = 0; iz < g.nz; ++iz) {
      for (int ix = 0; ix < g.nx; ++ix) {
        layer.push_back({centered(ix, g.nx, g.atom_spacing), y,
                         g.center_height + centered(iz, g.nz, g.atom_spacing)});
      }
    }
  }
  return g;
}

}  // namespace simce
