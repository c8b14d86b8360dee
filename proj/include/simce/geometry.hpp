#pragma once

#include <optional>
#include <vector>

#include "simce/common.hpp"

namespace simce {

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

inline double distance(const Point3& a, const Point3& b) {
  return std::hypot(a.x - b.x, a.y - b.y, a.z - b.z);
}

// Declarative description of the base-station front end. Unset optionals
// resolve to defaults that depend on the wavelength (half-wavelength pitches,
// first gap equal to the inter-layer gap).
struct GeometryConfig {
  double frequency_hz = 28e9;
  std::optional<double> wavelength_m;
  int num_antennas = 4;
  int nx = 8;
  int nz = 8;
  int num_layers = 6;
  double sim_thickness_m = 0.05;
  std::optional<double> atom_spacing_m;
  std::optional<double> atom_width_m;   // d1, defaults to the atom spacing
  std::optional<double> atom_height_m;  // d2, likewise
  std::optional<double> antenna_spacing_m;
  std::optional<double> tx_gap_m;
  double center_height_m = 15.0;
};

// Fully positioned layout. The antenna array lies along z in the plane y = 0;
// layer l (1-based) sits in the plane y = tx_gap + (l - 1) * layer_gap.
struct SimGeometry {
  double wavelength = 0.0;
  int num_antennas = 0;
  int num_layers = 0;
  int nx = 0;
  int nz = 0;
  double atom_spacing = 0.0;
  double atom_width = 0.0;
  double atom_height = 0.0;
  double antenna_spacing = 0.0;
  double sim_thickness = 0.0;
  double layer_gap = 0.0;
  double tx_gap = 0.0;
  double center_height = 0.0;

  std::vector<Point3> antennas;
  // layers[l][n], n = iz * nx + ix.
  std::vector<std::vector<Point3>> layers;

  int atoms_per_layer() const { return nx * nz; }
  const std::vector<Point3>& last_layer() const { return layers.back(); }
};

SimGeometry build_geometry(const GeometryConfig& config);

// Splits N into an (nx, nz) grid, nx the largest divisor not above sqrt(N), so the
// long side runs along z, parallel to the antenna array.
std::pair<int, int> grid_shape(int atoms);

}  // namespace simce
