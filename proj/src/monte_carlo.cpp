#include "simce/monte_carlo.hpp"

#include <cmath>

#include "simce/parallel.hpp"

namespace simce {

CMatrix make_pilot_matrix(int length, int users, double training_snr) {
  if (users < 1) throw ConfigError("users", "at least one user required");
  if (length < users) {
    throw ConfigError("pilot.length", "orthogonal pilots need length >= number of users");
  }
  if (!(training_snr > 0.0)) throw ConfigError("training_snr", "must be positive");
  CMatrix x(length, users);
  const double amp = std::sqrt(training_snr);
  for (int t = 0; t < length; ++t) {
    for (int k = 0; k < users; ++k) {
      x(t, k) = std::polar(amp, -kTwoPi * static_cast<double>(t) * k / length);
    }
  }
  return x;
}

std::vector<CVector> simulate_training(const CMatrix& observation,
                                       const std::vector<CVector>& channels,
                                       const PilotParams& pilot, std::mt19937_64& rng,
                                       bool noiseless) {
  const double noise_std = 1.0 / std::sqrt(pilot.rho_tau());
  std::vector<CVector> r;
  r.reserve(channels.size());
  for (const auto& h : channels) {
    CVector obs = observation * h;
    if (!noiseless) obs += noise_std * complex_gaussian(obs.size(), rng);
    r.push_back(std::move(obs));
  }
  return r;
}

std::vector<CVector> simulate_training(const WaveModel& model, const PhaseBook& phases,
                                       const std::vector<CVector>& channels,
                                       const PilotParams& pilot, std::mt19937_64& rng,
                                       const TrainingOptions& options) {
  if (options.path == TrainingPath::kReduced) {
    return simulate_training(observation_map(model, phases), channels, pilot, rng,
                             options.noiseless);
  }

  const int users = static_cast<int>(channels.size());
  const int m = model.antennas();
  const int num_s = phases.subphases();
  const CMatrix pilots = make_pilot_matrix(pilot.length, users, pilot.training_snr());
  const double energy = pilot.rho_tau();

  std::vector<CVector> r(users, CVector(static_cast<Eigen::Index>(m) * num_s));
  for (int s = 0; s < num_s; ++s) {
    const CMatrix block = antenna_response(model, phases, s).adjoint();  // W1^H G_s^H
    CMatrix y = CMatrix::Zero(m, pilot.length);
    for (int k = 0; k < users; ++k) {
      y.noalias() += (block * channels[k]) * pilots.col(k).adjoint();
    }
    if (!options.noiseless) {
      for (int t = 0; t < pilot.length; ++t) y.col(t) += complex_gaussian(m, rng);
    }
    for (int k = 0; k < users; ++k) {
      r[k].segment(static_cast<Eigen::Index>(s) * m, m) = y * pilots.col(k) / energy;
    }
  }
  return r;
}

namespace {

template <class Estimate>
TrialBatch run_batch(const ChannelStats& stats, const TrialConfig& config, Estimate&& estimate) {
  if (config.trials < 1) throw ConfigError("trials", "must be at least 1");
  const int users = stats.num_users();
  std::vector<CMatrix> factors;
  std::vector<double> power;
  for (const auto& u : stats.users) {
    factors.push_back(u.scaled_sqrt());
    power.push_back(u.path_loss * u.correlation.diagonal().real().sum());
  }

  TrialBatch batch;
  batch.num_trials = config.trials;
  batch.seed = config.seed;
  batch.normalized_errors.assign(config.trials, std::vector<double>(users, 0.0));
  parallel_for(static_cast<std::size_t>(config.trials), config.workers, [&](std::size_t t) {
    auto rng = substream(config.seed, Stream::kTrial, t);
    std::vector<CVector> h;
    h.reserve(users);
    for (int k = 0; k < users; ++k) h.push_back(sample_channel(factors[k], rng));
    const std::vector<CVector> h_hat = estimate(h, rng);
    for (int k = 0; k < users; ++k) {
      batch.normalized_errors[t][k] = (h_hat[k] - h[k]).squaredNorm() / power[k];
    }
  });
  return batch;
}

}  // namespace

TrialBatch run_trials(const WaveModel& model, const PhaseBook& phases,
                      const std::vector<CMatrix>& digital, const ChannelStats& stats,
                      const TrialConfig& config) {
  if (static_cast<int>(digital.size()) != stats.num_users()) {
    throw DimensionError("run_trials: one digital estimator per user required");
  }
  const CMatrix observation = observation_map(model, phases);
  return run_batch(stats, config, [&](const std::vector<CVector>& h, std::mt19937_64& rng) {
    const std::vector<CVector> r =
        config.training.path == TrainingPath::kReduced
            ? simulate_training(observation, h, stats.pilot, rng, config.training.noiseless)
            : simulate_training(model, phases, h, stats.pilot, rng, config.training);
    std::vector<CVector> out;
    out.reserve(h.size());
    for (std::size_t k = 0; k < h.size(); ++k) out.push_back(digital[k].adjoint() * r[k]);
    return out;
  });
}

TrialBatch run_conventional_trials(const ConventionalResult& conventional,
                                   const ChannelStats& stats, const TrialConfig& config) {
  if (static_cast<int>(conventional.estimators.size()) != stats.num_users()) {
    throw DimensionError("run_conventional_trials: one estimator per user required");
  }
  const double noise_std = 1.0 / std::sqrt(stats.pilot.rho_tau());
  return run_batch(stats, config, [&](const std::vector<CVector>& h, std::mt19937_64& rng) {
    std::vector<CVector> out;
    out.reserve(h.size());
    for (std::size_t k = 0; k < h.size(); ++k) {
      CVector y = h[k];
      if (!config.training.noiseless) y += noise_std * complex_gaussian(y.size(), rng);
      out.push_back(conventional.estimators[k] * y);
    }
    return out;
  });
}

NmseEstimate summarize(const TrialBatch& batch) {
  NmseEstimate est;
  est.trials = batch.num_trials;
  if (batch.num_trials < 1 || batch.normalized_errors.empty()) {
    throw ConfigError("trials", "cannot summarize an empty batch");
  }
  const auto users = batch.normalized_errors.front().size();
  const double n = static_cast<double>(batch.num_trials);

  auto mean_se = [n](auto&& value, std::size_t count) {
    double sum = 0.0;
    for (std::size_t t = 0; t < count; ++t) sum += value(t);
    const double mean = sum / n;
    double ss = 0.0;
    for (std::size_t t = 0; t < count; ++t) {
      const double d = value(t) - mean;
      ss += d * d;
    }
    const double var = count > 1 ? ss / (n - 1.0) : 0.0;
    return std::pair{mean, std::sqrt(var / n)};
  };

  const auto trials = static_cast<std::size_t>(batch.num_trials);
  for (std::size_t k = 0; k < users; ++k) {
    auto [m, se] = mean_se([&](std::size_t t) { return batch.normalized_errors[t][k]; }, trials);
    est.user_mean.push_back(m);
    est.user_se.push_back(se);
  }
  auto [m, se] = mean_se(
      [&](std::size_t t) {
        double s = 0.0;
        for (double v : batch.normalized_errors[t]) s += v;
        return s / static_cast<double>(users);
      },
      trials);
  est.mean = m;
  est.se = se;
  return est;
}

}  // namespace simce
