#pragma once

#include <vector>

#include "simce/geometry.hpp"

namespace simce {

// Fixed diffraction matrices of the stack. w1 maps antennas to layer 1 and
// inter_layer[i] maps layer i+1 to layer i+2 (so it has num_layers - 1 entries).
struct WaveModel {
  CMatrix w1;
  std::vector<CMatrix> inter_layer;

  int num_layers() const { return static_cast<int>(inter_layer.size()) + 1; }
  int atoms() const { return static_cast<int>(w1.rows()); }
  int antennas() const { return static_cast<int>(w1.cols()); }
};

// Rayleigh-Sommerfeld transmission coefficient between two elements whose
// planes are `plane_gap` apart and whose centers are `dist` apart.
cd transmission_coefficient(double dist, double plane_gap, double wavelength,
                            double atom_width, double atom_height);

// Dense coefficient matrix from sources (columns) to destinations (rows).
CMatrix transmission_matrix(const std::vector<Point3>& sources,
                            const std::vector<Point3>& destinations, double wavelength,
                            double atom_width, double atom_height);

WaveModel build_wave_model(const SimGeometry& geom);

}  // namespace simce
