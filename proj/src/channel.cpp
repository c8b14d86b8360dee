#include "simce/channel.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace simce {

double normalized_sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = kPi * x;
  return std::sin(px) / px;
}

CMatrix build_correlation(const SimGeometry& geom) {
  const auto& atoms = geom.last_layer();
  const auto n = static_cast<Eigen::Index>(atoms.size());
  CMatrix r(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    r(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = normalized_sinc(2.0 * distance(atoms[i], atoms[j]) / geom.wavelength);
      r(i, j) = v;
      r(j, i) = v;
    }
  }
  return r;
}

double path_loss(double distance_m, double exponent, double ref_distance_m, double ref_gain) {
  if (!(ref_distance_m > 0.0)) throw ConfigError("ref_distance_m", "must be positive");
  if (!(exponent > 0.0)) throw ConfigError("path_loss_exponent", "must be positive");
  if (distance_m < ref_distance_m) {
    throw std::domain_error("user distance is below the path-loss reference distance");
  }
  return ref_gain * std::pow(distance_m / ref_distance_m, -exponent);
}

double free_space_ref_gain(double wavelength, double ref_distance_m) {
  const double a = wavelength / (4.0 * kPi * ref_distance_m);
  return a * a;
}

HermitianSqrt hermitian_sqrt(const CMatrix& psd) {
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(psd);
  if (eig.info() != Eigen::Success) {
    throw NumericalError("Hermitian eigendecomposition failed");
  }
  const auto n = psd.rows();
  const double floor = -1e-10 * static_cast<double>(n);
  HermitianSqrt out;
  RVector roots(n);
  out.min_eigenvalue = n > 0 ? eig.eigenvalues().minCoeff() : 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double lambda = eig.eigenvalues()(i);
    if (lambda < floor) {
      std::ostringstream msg;
      msg << "covariance is indefinite: eigenvalue " << lambda << " below " << floor;
      throw NumericalError(msg.str());
    }
    if (lambda < 0.0) ++out.clipped;
    roots(i) = std::sqrt(std::max(lambda, 0.0));
  }
  const CMatrix& q = eig.eigenvectors();
  out.root = q * roots.asDiagonal() * q.adjoint();
  return out;
}

double ChannelStats::mean_path_loss() const {
  if (users.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& u : users) sum += u.path_loss;
  return sum / static_cast<double>(users.size());
}

ChannelStats build_channel_stats(const SimGeometry& geom, const UsersConfig& users,
                                 const PilotConfig& pilot) {
  if (users.distances_m.empty()) throw ConfigError("distances_m", "at least one user required");
  const int k = static_cast<int>(users.distances_m.size());

  ChannelStats stats;
  stats.pilot.power = pilot.power_w;
  stats.pilot.length = pilot.length.value_or(k);
  stats.pilot.noise_variance = pilot.noise_variance_w.value_or(dbm_to_watts(pilot.noise_dbm));
  if (!(stats.pilot.power > 0.0)) throw ConfigError("power_w", "must be positive");
  if (!(stats.pilot.noise_variance > 0.0)) throw ConfigError("noise_variance_w", "must be positive");
  if (stats.pilot.length < k) {
    throw ConfigError("pilot.length", "orthogonal pilots need length >= number of users");
  }

  const double ref_gain =
      users.ref_gain.value_or(free_space_ref_gain(geom.wavelength, users.ref_distance_m));
  const CMatrix corr = build_correlation(geom);
  const HermitianSqrt root = hermitian_sqrt(corr);
  if (root.clipped > 0) {
    std::ostringstream msg;
    msg << "clipped " << root.clipped << " slightly negative correlation eigenvalue(s), min "
        << root.min_eigenvalue;
    stats.warnings.push_back(msg.str());
  }

  for (double d : users.distances_m) {
    UserChannel u;
    u.distance = d;
    u.path_loss = path_loss(d, users.path_loss_exponent, users.ref_distance_m, ref_gain);
    u.correlation = corr;
    u.correlation_sqrt = root.root;
    stats.users.push_back(std::move(u));
  }
  return stats;
}

double effective_training_snr(const ChannelStats& stats) {
  return stats.pilot.power * stats.mean_path_loss() / stats.pilot.noise_variance;
}

double noise_for_effective_snr(double target_snr, double pilot_power, double mean_path_loss) {
  if (!(target_snr > 0.0)) throw ConfigError("effective_snr", "must be positive (linear)");
  return pilot_power * mean_path_loss / target_snr;
}

ChannelStats with_effective_snr_db(ChannelStats stats, double snr_db) {
  stats.pilot.noise_variance =
      noise_for_effective_snr(db_to_linear(snr_db), stats.pilot.power, stats.mean_path_loss());
  return stats;
}

}  // namespace simce
