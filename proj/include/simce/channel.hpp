#pragma once

#include <optional>
#include <string>
#include <vector>

#include "simce/geometry.hpp"

namespace simce {

// Isotropic-scattering spatial correlation of the last layer:
// [R]_{n,n'} = sinc(2 d_{n,n'} / lambda).
CMatrix build_correlation(const SimGeometry& geom);

double normalized_sinc(double x);

// Log-distance power law beta = ref_gain * (distance / ref_distance)^(-exponent).
double path_loss(double distance_m, double exponent, double ref_distance_m, double ref_gain);

// Free-space gain at the reference distance, (lambda / (4 pi d0))^2.
double free_space_ref_gain(double wavelength, double ref_distance_m);

struct HermitianSqrt {
  CMatrix root;
  int clipped = 0;           // eigenvalues in the tolerated negative band set to 0
  double min_eigenvalue = 0;
};

// Q diag(sqrt(max(lambda, 0))) Q^H. Eigenvalues below -1e-10 * N are rejected.
HermitianSqrt hermitian_sqrt(const CMatrix& psd);

struct UsersConfig {
  std::vector<double> distances_m{50.0, 60.0, 70.0, 80.0};
  double path_loss_exponent = 3.5;
  double ref_distance_m = 1.0;
  std::optional<double> ref_gain;  // defaults to free_space_ref_gain
};

struct PilotConfig {
  double power_w = 1.0;
  std::optional<int> length;  // defaults to K
  double noise_dbm = -110.0;
  std::optional<double> noise_variance_w;  // overrides noise_dbm
};

struct UserChannel {
  double distance = 0.0;
  double path_loss = 0.0;
  CMatrix correlation;       // unit diagonal
  CMatrix correlation_sqrt;  // correlation_sqrt * correlation_sqrt^H == correlation

  CMatrix scaled_covariance() const { return path_loss * correlation; }
  CMatrix scaled_sqrt() const { return std::sqrt(path_loss) * correlation_sqrt; }
};

struct PilotParams {
  double power = 1.0;
  int length = 1;
  double noise_variance = 1.0;

  double training_snr() const { return power / noise_variance; }
  // rho_p * tau_p, the per-user pilot energy over noise after correlation.
  double rho_tau() const { return training_snr() * length; }
};

struct ChannelStats {
  std::vector<UserChannel> users;
  PilotParams pilot;
  std::vector<std::string> warnings;

  int num_users() const { return static_cast<int>(users.size()); }
  double mean_path_loss() const;
};

ChannelStats build_channel_stats(const SimGeometry& geom, const UsersConfig& users,
                                 const PilotConfig& pilot);

// P_p * mean(beta) / sigma^2, linear.
double effective_training_snr(const ChannelStats& stats);

// Noise variance that yields `target_snr` (linear) for the given pilot power and mean path loss.
double noise_for_effective_snr(double target_snr, double pilot_power, double mean_path_loss);

// Copy of `stats` with sigma^2 re-solved so the effective SNR equals `snr_db`.
ChannelStats with_effective_snr_db(ChannelStats stats, double snr_db);

}  // namespace simce
