#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "simce/estimator.hpp"
#include "simce/random.hpp"

namespace simce {

// Column k is user k's pilot, scaled so ||x_k||^2 = rho_p * tau_p and
// columns are mutually orthogonal (scaled DFT rows).
CMatrix make_pilot_matrix(int length, int users, double training_snr);

// h = factor * z, z ~ CN(0, I).
template <class Rng>
CVector sample_channel(const CMatrix& factor, Rng& rng) {
  return factor * complex_gaussian(factor.cols(), rng);
}

template <class Rng>
CVector sample_channel(const ChannelStats& stats, int user, Rng& rng) {
  return sample_channel(stats.users.at(user).scaled_sqrt(), rng);
}

enum class TrainingPath {
  kReduced,  // r_k = A h_k + n_k / (rho_p tau_p)
  kFull,     // per-symbol Y_s, pilot correlation, stacking
};

struct TrainingOptions {
  TrainingPath path = TrainingPath::kReduced;
  bool noiseless = false;
};

// Stacked MS-vector observations r_k for every user.
std::vector<CVector> simulate_training(const WaveModel& model, const PhaseBook& phases,
                                       const std::vector<CVector>& channels,
                                       const PilotParams& pilot, std::mt19937_64& rng,
                                       const TrainingOptions& options = {});

// Same as above with a precomputed observation map (reduced path only).
std::vector<CVector> simulate_training(const CMatrix& observation,
                                       const std::vector<CVector>& channels,
                                       const PilotParams& pilot, std::mt19937_64& rng,
                                       bool noiseless = false);

struct TrialConfig {
  int trials = 1000;
  std::uint64_t seed = 1;
  int workers = 1;
  TrainingOptions training;
};

// Normalized squared errors ||h_hat - h||^2 / tr(C_k), indexed [trial][user].
struct TrialBatch {
  int num_trials = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<double>> normalized_errors;
};

struct NmseEstimate {
  std::vector<double> user_mean;
  std::vector<double> user_se;
  double mean = 0.0;  // over trials of the per-trial user average
  double se = 0.0;
  int trials = 0;
};

// Hybrid estimator h_hat = D_k^H r_k over `config.trials` independent draws.
TrialBatch run_trials(const WaveModel& model, const PhaseBook& phases,
                      const std::vector<CMatrix>& digital, const ChannelStats& stats,
                      const TrialConfig& config);

// Fully digital baseline: y_k = h_k + n_k / (rho_p tau_p), h_hat = W_k y_k.
TrialBatch run_conventional_trials(const ConventionalResult& conventional,
                                   const ChannelStats& stats, const TrialConfig& config);

NmseEstimate summarize(const TrialBatch& batch);

inline NmseEstimate empirical_nmse(const WaveModel& model, const EstimatorDesign& design,
                                   const ChannelStats& stats, const TrialConfig& config) {
  return summarize(run_trials(model, design.phases, design.digital, stats, config));
}

}  // namespace simce
