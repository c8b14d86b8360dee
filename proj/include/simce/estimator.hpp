#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "simce/channel.hpp"
#include "simce/wave_model.hpp"

namespace simce {

// Dense real tensor indexed (subphase, layer, atom), row-major in that order.
// Holds both phase configurations and their gradients.
class PhaseTensor {
 public:
  PhaseTensor() = default;
  PhaseTensor(int subphases, int layers, int atoms, double fill = 0.0)
      : subphases_(subphases), layers_(layers), atoms_(atoms),
        values_(static_cast<std::size_t>(subphases) * layers * atoms, fill) {
    if (subphases <= 0 || layers <= 0 || atoms <= 0) {
      throw DimensionError("phase tensor dimensions must be positive");
    }
  }

  int subphases() const { return subphases_; }
  int layers() const { return layers_; }
  int atoms() const { return atoms_; }

  double& operator()(int s, int l, int n) { return values_[index(s, l, n)]; }
  double operator()(int s, int l, int n) const { return values_[index(s, l, n)]; }

  std::span<double> slice(int s, int l) {
    return {values_.data() + index(s, l, 0), static_cast<std::size_t>(atoms_)};
  }
  std::span<const double> slice(int s, int l) const {
    return {values_.data() + index(s, l, 0), static_cast<std::size_t>(atoms_)};
  }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  bool same_shape(const PhaseTensor& o) const {
    return subphases_ == o.subphases_ && layers_ == o.layers_ && atoms_ == o.atoms_;
  }

 private:
  std::size_t index(int s, int l, int n) const {
    return (static_cast<std::size_t>(s) * layers_ + l) * atoms_ + n;
  }

  int subphases_ = 0;
  int layers_ = 0;
  int atoms_ = 0;
  std::vector<double> values_;
};

using PhaseBook = PhaseTensor;

double wrap_phase(double theta);
void wrap_phases(PhaseBook& phases);

PhaseBook random_phasebook(int subphases, int layers, int atoms, std::mt19937_64& rng);

// G_s = Theta_s^L W^L ... Theta_s^2 W^2 Theta_s^1.
CMatrix wave_response(const WaveModel& model, const PhaseBook& phases, int s);

// G_s W^1 (N x M), propagated column-block-wise without forming G_s.
CMatrix antenna_response(const WaveModel& model, const PhaseBook& phases, int s);

// A = blockdiag(W1^H) G~^H, shape MS x N; block s equals W1^H G_s^H.
CMatrix observation_map(const WaveModel& model, const PhaseBook& phases);

// Per-user closed-form NMSE,
// (||(D^H A - I) sqrt(C)||_F^2 + tr(D^H D) / rho_tau) / tr(C).
double nmse_closed_form(const CMatrix& a, const CMatrix& d, const CMatrix& cov, double rho_tau);

// MMSE digital stage (A C A^H + I / rho_tau)^{-1} A C, via Hermitian factorization.
CMatrix optimal_digital_estimator(const CMatrix& a, const CMatrix& cov, double rho_tau);

// Objective inputs for K users: the covariance the objective sees, a factor of
// it, and the pilot energy-to-noise ratio rho_p * tau_p.
struct DesignTarget {
  std::vector<CMatrix> covariances;
  std::vector<CMatrix> factors;  // factors[k] * factors[k]^H == covariances[k]
  std::vector<int> ranks;        // columns kept per user (N unless reduced)
  double rho_tau = 1.0;

  int num_users() const { return static_cast<int>(covariances.size()); }
  int atoms() const { return covariances.empty() ? 0 : static_cast<int>(covariances[0].rows()); }
  int max_rank() const;

  static DesignTarget from_stats(const ChannelStats& stats);
  static DesignTarget from_covariances(std::vector<CMatrix> covariances, double rho_tau);
  // Eigen-truncated covariances retaining `energy_threshold` of each trace.
  static DesignTarget low_rank(const ChannelStats& stats, double energy_threshold);
};

struct PhaseEvaluation {
  std::vector<CMatrix> digital;
  std::vector<double> user_nmse;
  double average_nmse = 0.0;
};

// Optimal D_k for the given phases and the resulting NMSE values.
PhaseEvaluation evaluate_phases(const WaveModel& model, const DesignTarget& target,
                                const PhaseBook& phases);

// Average-NMSE gradient with respect to every phase, holding the digital
// estimators fixed. Uses one forward and one adjoint sweep per sub-phase.
PhaseTensor nmse_gradient(const WaveModel& model, const PhaseBook& phases,
                          std::span<const CMatrix> digital, std::span<const CMatrix> factors);

// Scales each (s, l) slice so its largest magnitude is pi. Zero slices pass through.
PhaseTensor normalize_gradient(PhaseTensor grad);

struct DesignHyper {
  double learning_rate = 0.1;
  double decay = 0.5;
  double tolerance = 1e-3;
  int max_iters = 200;
  int num_restarts = 10;
  std::uint64_t seed = 1;
  bool relative_tolerance = false;
  bool decay_on_no_improvement = false;
};

struct EstimatorDesign {
  PhaseBook phases;
  std::vector<CMatrix> digital;
  std::vector<double> objective_trace;  // [0] is the initialization
  DesignHyper hyper;
  std::vector<double> user_nmse;
  double average_nmse = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> restart_objectives;
};

EstimatorDesign design_estimator(const WaveModel& model, const DesignTarget& target,
                                 int subphases, const DesignHyper& hyper, int workers = 1);

// Best of `codebook_size` random phase books, each with its optimal digital stage.
// Entry i is drawn from its own substream, so smaller codebooks are prefixes.
EstimatorDesign codebook_baseline(const WaveModel& model, const DesignTarget& target,
                                  int subphases, int codebook_size, std::uint64_t seed,
                                  int workers = 1);

struct ConventionalResult {
  std::vector<CMatrix> estimators;  // W_k, with h_hat = W_k y_k
  std::vector<double> user_nmse;
  double average_nmse = 0.0;
};

// Fully digital MMSE with one RF chain per element: y = h + n / rho_tau.
ConventionalResult conventional_mmse(std::span<const CMatrix> covariances, double rho_tau);

struct LowRankFactor {
  CMatrix basis;        // Q, N x R, orthonormal columns
  RVector eigenvalues;  // diag(Lambda), descending
  int rank = 0;
};

LowRankFactor low_rank_reduce(const CMatrix& cov, double energy_threshold);

// Number of eigenvalues above `relative` times the largest one.
int numerical_rank(const CMatrix& cov, double relative);

// ceil(unknowns / rf_chains).
int min_subphases(int unknowns, int rf_chains);

}  // namespace simce
