#include "simce/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "simce/parallel.hpp"
#include "simce/random.hpp"

namespace simce {

namespace {

CVector phase_factors(std::span<const double> theta) {
  CVector phi(static_cast<Eigen::Index>(theta.size()));
  for (std::size_t n = 0; n < theta.size(); ++n) phi(n) = std::polar(1.0, theta[n]);
  return phi;
}

void check_shapes(const WaveModel& model, const PhaseBook& phases) {
  if (phases.layers() != model.num_layers() || phases.atoms() != model.atoms()) {
    std::ostringstream msg;
    msg << "phase book is " << phases.layers() << " layers x " << phases.atoms()
        << " atoms but the wave model has " << model.num_layers() << " x " << model.atoms();
    throw DimensionError(msg.str());
  }
}

double real_trace(const CMatrix& m) { return m.diagonal().real().sum(); }

bool all_finite(const CMatrix& m) { return m.allFinite(); }

}  // namespace

double wrap_phase(double theta) {
  double w = std::fmod(theta, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  // fmod of a tiny negative value can round back up to exactly 2 pi.
  if (w >= kTwoPi) w = 0.0;
  return w;
}

void wrap_phases(PhaseBook& phases) {
  for (double& v : phases.values()) v = wrap_phase(v);
}

PhaseBook random_phasebook(int subphases, int layers, int atoms, std::mt19937_64& rng) {
  PhaseBook book(subphases, layers, atoms);
  std::uniform_real_distribution<double> uniform(0.0, kTwoPi);
  for (double& v : book.values()) v = wrap_phase(uniform(rng));
  return book;
}

CMatrix wave_response(const WaveModel& model, const PhaseBook& phases, int s) {
  check_shapes(model, phases);
  if (s < 0 || s >= phases.subphases()) throw DimensionError("sub-phase index out of range");
  CMatrix g = phase_factors(phases.slice(s, 0)).asDiagonal();
  for (int l = 1; l < phases.layers(); ++l) {
    g = phase_factors(phases.slice(s, l)).asDiagonal() * (model.inter_layer[l - 1] * g);
  }
  return g;
}

CMatrix antenna_response(const WaveModel& model, const PhaseBook& phases, int s) {
  check_shapes(model, phases);
  if (s < 0 || s >= phases.subphases()) throw DimensionError("sub-phase index out of range");
  CMatrix x = phase_factors(phases.slice(s, 0)).asDiagonal() * model.w1;
  for (int l = 1; l < phases.layers(); ++l) {
    x = phase_factors(phases.slice(s, l)).asDiagonal() * (model.inter_layer[l - 1] * x);
  }
  return x;
}

CMatrix observation_map(const WaveModel& model, const PhaseBook& phases) {
  const int m = model.antennas();
  const int n = model.atoms();
  CMatrix a(static_cast<Eigen::Index>(m) * phases.subphases(), n);
  for (int s = 0; s < phases.subphases(); ++s) {
    a.middleRows(static_cast<Eigen::Index>(s) * m, m) = antenna_response(model, phases, s).adjoint();
  }
  return a;
}

double nmse_closed_form(const CMatrix& a, const CMatrix& d, const CMatrix& cov, double rho_tau) {
  if (a.rows() != d.rows() || a.cols() != d.cols() || cov.rows() != a.cols() ||
      cov.cols() != a.cols()) {
    throw DimensionError("nmse_closed_form: A, D and covariance shapes disagree");
  }
  const double power = real_trace(cov);
  if (!(power > 0.0)) throw NumericalError("degenerate user: covariance trace is zero");
  CMatrix err = d.adjoint() * a;
  err.diagonal().array() -= 1.0;
  const double distortion = real_trace(err * cov * err.adjoint());
  const double noise = d.squaredNorm() / rho_tau;
  return (distortion + noise) / power;
}

CMatrix optimal_digital_estimator(const CMatrix& a, const CMatrix& cov, double rho_tau) {
  if (cov.rows() != a.cols() || cov.cols() != a.cols()) {
    throw DimensionError("optimal_digital_estimator: covariance does not match A");
  }
  if (!all_finite(a) || !all_finite(cov) || !std::isfinite(rho_tau) || !(rho_tau > 0.0)) {
    throw NumericalError("optimal_digital_estimator: non-finite input");
  }
  const CMatrix ac = a * cov;
  CMatrix lhs = ac * a.adjoint();
  lhs.diagonal().array() += 1.0 / rho_tau;

  Eigen::LLT<CMatrix> llt(lhs);
  if (llt.info() != Eigen::Success) {
    const double loading = 1e-12 * std::max(real_trace(lhs), 0.0) /
                           static_cast<double>(std::max<Eigen::Index>(lhs.rows(), 1));
    lhs.diagonal().array() += loading;
    llt.compute(lhs);
    if (llt.info() != Eigen::Success) {
      std::ostringstream msg;
      msg << "digital estimator solve failed; reciprocal condition estimate " << llt.rcond();
      throw NumericalError(msg.str());
    }
  }
  CMatrix d = llt.solve(ac);
  if (!all_finite(d)) {
    std::ostringstream msg;
    msg << "digital estimator is non-finite; reciprocal condition estimate " << llt.rcond();
    throw NumericalError(msg.str());
  }
  return d;
}

int DesignTarget::max_rank() const {
  return ranks.empty() ? 0 : *std::max_element(ranks.begin(), ranks.end());
}

DesignTarget DesignTarget::from_stats(const ChannelStats& stats) {
  DesignTarget t;
  t.rho_tau = stats.pilot.rho_tau();
  for (const auto& u : stats.users) {
    t.covariances.push_back(u.scaled_covariance());
    t.factors.push_back(u.scaled_sqrt());
    t.ranks.push_back(static_cast<int>(u.correlation.rows()));
  }
  return t;
}

DesignTarget DesignTarget::from_covariances(std::vector<CMatrix> covariances, double rho_tau) {
  DesignTarget t;
  t.rho_tau = rho_tau;
  for (auto& c : covariances) {
    t.factors.push_back(hermitian_sqrt(c).root);
    t.ranks.push_back(static_cast<int>(c.rows()));
    t.covariances.push_back(std::move(c));
  }
  return t;
}

DesignTarget DesignTarget::low_rank(const ChannelStats& stats, double energy_threshold) {
  DesignTarget t;
  t.rho_tau = stats.pilot.rho_tau();
  for (const auto& u : stats.users) {
    const LowRankFactor f = low_rank_reduce(u.scaled_covariance(), energy_threshold);
    const CMatrix factor = f.basis * f.eigenvalues.cwiseSqrt().asDiagonal();
    t.covariances.push_back(factor * factor.adjoint());
    t.factors.push_back(factor);
    t.ranks.push_back(f.rank);
  }
  return t;
}

PhaseEvaluation evaluate_phases(const WaveModel& model, const DesignTarget& target,
                                const PhaseBook& phases) {
  const CMatrix a = observation_map(model, phases);
  PhaseEvaluation out;
  double sum = 0.0;
  for (const auto& cov : target.covariances) {
    CMatrix d = optimal_digital_estimator(a, cov, target.rho_tau);
    const double v = nmse_closed_form(a, d, cov, target.rho_tau);
    out.user_nmse.push_back(v);
    out.digital.push_back(std::move(d));
    sum += v;
  }
  out.average_nmse = sum / static_cast<double>(target.covariances.size());
  return out;
}

PhaseTensor nmse_gradient(const WaveModel& model, const PhaseBook& phases,
                          std::span<const CMatrix> digital, std::span<const CMatrix> factors) {
  check_shapes(model, phases);
  if (digital.size() != factors.size() || digital.empty()) {
    throw DimensionError("nmse_gradient: need one digital estimator per covariance factor");
  }
  const int num_s = phases.subphases();
  const int num_l = phases.layers();
  const int n = model.atoms();
  const int m = model.antennas();
  const auto k_users = static_cast<double>(digital.size());

  const CMatrix a = observation_map(model, phases);
  for (const auto& d : digital) {
    if (d.rows() != a.rows() || d.cols() != a.cols()) {
      throw DimensionError("nmse_gradient: digital estimator shape does not match A");
    }
  }

  // T_k = (2 / (K tr C_k)) C_k E_k^H with E_k = D_k^H A - I. The sub-phase-s
  // adjoint seed is sum_k T_k (D_k block s)^H.
  std::vector<CMatrix> seeds_t;
  seeds_t.reserve(digital.size());
  for (std::size_t k = 0; k < digital.size(); ++k) {
    const CMatrix cov = factors[k] * factors[k].adjoint();
    const double power = real_trace(cov);
    if (!(power > 0.0)) throw NumericalError("degenerate user: covariance trace is zero");
    CMatrix err_h = a.adjoint() * digital[k];
    err_h.diagonal().array() -= 1.0;
    seeds_t.push_back((2.0 / (k_users * power)) * (cov * err_h));
  }

  PhaseTensor grad(num_s, num_l, n);
  std::vector<CMatrix> forward(num_l);
  std::vector<CVector> phi(num_l);
  for (int s = 0; s < num_s; ++s) {
    for (int l = 0; l < num_l; ++l) phi[l] = phase_factors(phases.slice(s, l));

    // forward[l]: field arriving at layer l before its phase shift, N x M.
    forward[0] = model.w1;
    for (int l = 1; l < num_l; ++l) {
      forward[l] = model.inter_layer[l - 1] * (phi[l - 1].asDiagonal() * forward[l - 1]);
    }

    CMatrix back = CMatrix::Zero(n, m);
    for (std::size_t k = 0; k < digital.size(); ++k) {
      back.noalias() +=
          seeds_t[k] * digital[k].middleRows(static_cast<Eigen::Index>(s) * m, m).adjoint();
    }

    for (int l = num_l - 1; l >= 0; --l) {
      if (l < num_l - 1) {
        back = model.inter_layer[l].adjoint() * (phi[l + 1].conjugate().asDiagonal() * back);
      }
      auto out = grad.slice(s, l);
      for (int i = 0; i < n; ++i) {
        const cd c = forward[l].row(i).dot(back.row(i));  // sum_m conj(F) * B
        out[i] = (std::conj(phi[l](i)) * c).imag();
      }
    }
  }
  return grad;
}

PhaseTensor normalize_gradient(PhaseTensor grad) {
  for (int s = 0; s < grad.subphases(); ++s) {
    for (int l = 0; l < grad.layers(); ++l) {
      auto slice = grad.slice(s, l);
      double peak = 0.0;
      for (double v : slice) peak = std::max(peak, std::abs(v));
      if (peak == 0.0) continue;
      const double scale = kPi / peak;
      for (double& v : slice) v *= scale;
    }
  }
  return grad;
}

namespace {

void require_finite_objective(double value, int iteration) {
  if (!std::isfinite(value)) {
    std::ostringstream msg;
    msg << "non-finite objective at iteration " << iteration;
    throw NumericalError(msg.str());
  }
}

// Evaluates `count` phase books drawn from consecutive substreams and returns
// the index of the best one (lowest index on ties) plus every objective.
std::pair<std::size_t, std::vector<double>> best_of_random(const WaveModel& model,
                                                           const DesignTarget& target,
                                                           int subphases, int count,
                                                           std::uint64_t seed, Stream stream,
                                                           int workers) {
  std::vector<double> objectives(static_cast<std::size_t>(count));
  parallel_for(objectives.size(), workers, [&](std::size_t i) {
    auto rng = substream(seed, stream, i);
    const PhaseBook book = random_phasebook(subphases, model.num_layers(), model.atoms(), rng);
    objectives[i] = evaluate_phases(model, target, book).average_nmse;
  });
  std::size_t best = 0;
  for (std::size_t i = 0; i < objectives.size(); ++i) {
    require_finite_objective(objectives[i], 0);
    if (objectives[i] < objectives[best]) best = i;
  }
  return {best, std::move(objectives)};
}

PhaseBook regenerate(const WaveModel& model, int subphases, std::uint64_t seed, Stream stream,
                     std::size_t index) {
  auto rng = substream(seed, stream, index);
  return random_phasebook(subphases, model.num_layers(), model.atoms(), rng);
}

}  // namespace

EstimatorDesign design_estimator(const WaveModel& model, const DesignTarget& target,
                                 int subphases, const DesignHyper& hyper, int workers) {
  if (subphases < 1) throw ConfigError("subphases", "must be at least 1");
  if (hyper.num_restarts < 1) throw ConfigError("restarts", "must be at least 1");
  if (hyper.max_iters < 0) throw ConfigError("max_iters", "must be non-negative");
  if (!(hyper.decay > 0.0 && hyper.decay <= 1.0)) throw ConfigError("decay", "must be in (0, 1]");
  if (!(hyper.learning_rate > 0.0)) throw ConfigError("learning_rate", "must be positive");
  if (!(hyper.tolerance > 0.0)) throw ConfigError("tolerance", "must be positive");

  auto [best_restart, restart_objectives] = best_of_random(
      model, target, subphases, hyper.num_restarts, hyper.seed, Stream::kRestart, workers);

  PhaseBook phases = regenerate(model, subphases, hyper.seed, Stream::kRestart, best_restart);
  PhaseEvaluation current = evaluate_phases(model, target, phases);

  EstimatorDesign design;
  design.hyper = hyper;
  design.restart_objectives = std::move(restart_objectives);
  design.objective_trace.push_back(current.average_nmse);

  PhaseBook best_phases = phases;
  PhaseEvaluation best = current;
  double eta = hyper.learning_rate;

  for (int p = 1; p <= hyper.max_iters; ++p) {
    const PhaseTensor step =
        normalize_gradient(nmse_gradient(model, phases, current.digital, target.factors));
    auto& theta = phases.values();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      theta[i] = wrap_phase(theta[i] - eta * step.values()[i]);
    }
    const double previous = current.average_nmse;
    current = evaluate_phases(model, target, phases);
    require_finite_objective(current.average_nmse, p);
    design.objective_trace.push_back(current.average_nmse);
    design.iterations = p;

    if (!hyper.decay_on_no_improvement || current.average_nmse >= previous) eta *= hyper.decay;

    if (current.average_nmse < best.average_nmse) {
      best = current;
      best_phases = phases;
    }

    double change = current.average_nmse - previous;
    if (hyper.relative_tolerance) change /= previous;
    if (change * change < hyper.tolerance) {
      design.converged = true;
      break;
    }
  }

  design.phases = std::move(best_phases);
  design.digital = std::move(best.digital);
  design.user_nmse = std::move(best.user_nmse);
  design.average_nmse = best.average_nmse;
  return design;
}

EstimatorDesign codebook_baseline(const WaveModel& model, const DesignTarget& target,
                                  int subphases, int codebook_size, std::uint64_t seed,
                                  int workers) {
  if (codebook_size < 1) throw ConfigError("codebook_size", "must be at least 1");
  if (subphases < 1) throw ConfigError("subphases", "must be at least 1");
  auto [best_index, objectives] = best_of_random(model, target, subphases, codebook_size, seed,
                                                 Stream::kCodebook, workers);
  EstimatorDesign design;
  design.hyper.seed = seed;
  design.hyper.num_restarts = codebook_size;
  design.hyper.max_iters = 0;
  design.phases = regenerate(model, subphases, seed, Stream::kCodebook, best_index);
  PhaseEvaluation eval = evaluate_phases(model, target, design.phases);
  design.digital = std::move(eval.digital);
  design.user_nmse = std::move(eval.user_nmse);
  design.average_nmse = eval.average_nmse;
  design.objective_trace = {eval.average_nmse};
  design.converged = true;
  return design;
}

ConventionalResult conventional_mmse(std::span<const CMatrix> covariances, double rho_tau) {
  ConventionalResult out;
  double sum = 0.0;
  for (const auto& c : covariances) {
    if (!all_finite(c) || !(rho_tau > 0.0)) throw NumericalError("conventional_mmse: bad input");
    const double power = real_trace(c);
    if (!(power > 0.0)) throw NumericalError("degenerate user: covariance trace is zero");
    CMatrix lhs = c;
    lhs.diagonal().array() += 1.0 / rho_tau;
    Eigen::LLT<CMatrix> llt(lhs);
    if (llt.info() != Eigen::Success) {
      std::ostringstream msg;
      msg << "conventional MMSE solve failed; reciprocal condition estimate " << llt.rcond();
      throw NumericalError(msg.str());
    }
    // C (C + I/rho)^{-1} = ((C + I/rho)^{-1} C)^H for Hermitian C.
    CMatrix w = llt.solve(c).adjoint();
    const double err = real_trace(c - w * c);
    out.user_nmse.push_back(err / power);
    out.estimators.push_back(std::move(w));
    sum += err / power;
  }
  out.average_nmse = sum / static_cast<double>(covariances.size());
  return out;
}

LowRankFactor low_rank_reduce(const CMatrix& cov, double energy_threshold) {
  if (!(energy_threshold > 0.0 && energy_threshold <= 1.0)) {
    throw ConfigError("threshold", "energy threshold must lie in (0, 1]");
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  const auto n = cov.rows();
  // Eigen sorts ascending; walk from the top.
  RVector values = eig.eigenvalues().reverse().cwiseMax(0.0);
  const double total = values.sum();
  if (!(total > 0.0)) throw NumericalError("degenerate user: covariance trace is zero");
  const double goal = energy_threshold * total * (1.0 - 1e-12);
  int rank = 0;
  double kept = 0.0;
  while (rank < n && kept < goal) kept += values(rank++);

  LowRankFactor f;
  f.rank = rank;
  f.eigenvalues = values.head(rank);
  f.basis = eig.eigenvectors().rowwise().reverse().leftCols(rank);
  return f;
}

int numerical_rank(const CMatrix& cov, double relative) {
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(cov, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  const double top = eig.eigenvalues().maxCoeff();
  return static_cast<int>((eig.eigenvalues().array() > relative * top).count());
}

int min_subphases(int unknowns, int rf_chains) {
  if (unknowns < 1 || rf_chains < 1) throw ConfigError("min_subphases", "arguments must be >= 1");
  return (unknowns + rf_chains - 1) / rf_chains;
}

}  // namespace simce
