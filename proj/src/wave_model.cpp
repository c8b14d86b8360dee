#include "simce/wave_model.hpp"

#include <cmath>

namespace simce {

cd transmission_coefficient(double dist, double plane_gap, double wavelength,
                            double atom_width, double atom_height) {
  if (!(dist > 0.0)) {
    throw GeometryError("zero distance between a source and a destination element");
  }
  const double cos_chi = plane_gap / dist;
  const double amplitude = atom_width * atom_height * cos_chi / dist;
  const cd near_far{1.0 / (kTwoPi * dist), -1.0 / wavelength};
  return amplitude * near_far * std::polar(1.0, kTwoPi * dist / wavelength);
}

CMatrix transmission_matrix(const std::vector<Point3>& sources,
                            const std::vector<Point3>& destinations, double wavelength,
                            double atom_width, double atom_height) {
  CMatrix w(destinations.size(), sources.size());
  for (Eigen::Index n = 0; n < w.rows(); ++n) {
    for (Eigen::Index m = 0; m < w.cols(); ++m) {
      const auto& dst = destinations[n];
      const auto& src = sources[m];
      // Angle measured against the source plane's normal (+y).
      w(n, m) = transmission_coefficient(distance(src, dst), std::abs(dst.y - src.y),
                                         wavelength, atom_width, atom_height);
    }
  }
  return w;
}

WaveModel build_wave_model(const SimGeometry& geom) {
  WaveModel model;
  model.w1 = transmission_matrix(geom.antennas, geom.layers.front(), geom.wavelength,
                                 geom.atom_width, geom.atom_height);
  model.inter_layer.reserve(geom.num_layers - 1);
  for (int l = 1; l < geom.num_layers; ++l) {
    model.inter_layer.push_back(transmission_matrix(geom.layers[l - 1], geom.layers[l],
                                                    geom.wavelength, geom.atom_width,
                                                    geom.atom_height));
  }
  return model;
}

}  // namespace simce
