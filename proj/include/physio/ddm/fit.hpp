#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "physio/ddm/simulate.hpp"
#include "physio/ddm/wfpt.hpp"
#include "physio/numcore/nelder_mead.hpp"

namespace physio::ddm {

struct FitOptions {
  double diameter_tol = 1e-6;
  std::size_t max_iter = 2000;
  double density_tol = 1e-10;
};

struct FitResult {
  DdmParams params;
  double loglik;
  double init_loglik;
  std::size_t iterations;
  bool converged;
};

inline constexpr std::size_t kMinFitTrials = 50;

/// Maximum-likelihood (alpha, tau, delta) with bias fixed at 0.5, by Nelder-Mead on
/// (log alpha, logit(tau / min rt), delta) so every simplex vertex is admissible.
inline FitResult fit_mle(std::span<const Trial> trials, DdmParams init, const FitOptions& opts = {}) {
  if (trials.size() < kMinFitTrials) {
    throw ConfigError("fit_mle: need at least 50 trials, got " + std::to_string(trials.size()));
  }
  init.bias = 0.5;
  init.validate();
  double min_rt = trials.front().rt;
  for (const auto& t : trials) min_rt = std::min(min_rt, t.rt);
  if (!(min_rt > 0.0)) throw ConfigError("fit_mle: response times must be positive");
  if (init.tau >= min_rt) {
    throw NumericError("fit_mle: non-finite log-likelihood at the initial point; tau=" + std::to_string(init.tau) +
                       " must be below the smallest rt (" + std::to_string(min_rt) + ")");
  }

  auto decode = [&](const std::vector<double>& th) {
    return DdmParams{std::exp(th[0]), min_rt / (1.0 + std::exp(-th[1])), th[2], 0.5};
  };
  auto objective = [&](const std::vector<double>& th) {
    const auto p = decode(th);
    if (!(p.alpha > 0.0) || !std::isfinite(p.alpha)) return std::numeric_limits<double>::infinity();
    return -wfpt_loglik(trials, p, opts.density_tol).value;
  };

  const double frac = std::max(init.tau / min_rt, 1e-6);
  const std::vector<double> th0{std::log(init.alpha), std::log(frac / (1.0 - frac)), init.delta};
  const double f0 = objective(th0);
  if (!std::isfinite(f0)) {
    throw NumericError("fit_mle: non-finite log-likelihood at the initial point; check that tau < min(rt) and "
                       "that alpha is not so small that early trials fall outside the series' range");
  }
  num::NelderMeadOptions nm;
  nm.initial_step = {0.2, 0.5, 0.3};
  nm.diameter_tol = opts.diameter_tol;
  nm.max_iter = opts.max_iter;
  const auto r = num::nelder_mead(objective, th0, nm);
  return {decode(r.x), -r.fx, -f0, r.iterations, r.converged};
}

struct RecoveryResult {
  DdmParams truth;
  FitResult fit;
  std::size_t censored;
};

/// One recovery replicate: draw delta ~ N(1.5, 0.2), tau ~ N(0.3, 0.05) with alpha = 1.5,
/// simulate `n_trials`, then fit from a neutral start.
inline RecoveryResult recovery_run(std::uint64_t seed, std::size_t n_trials = 5000, unsigned threads = 1,
                                   double dt = 1e-4) {
  auto rng = num::make_stream(seed, "ddm.recovery");
  std::normal_distribution<double> d_delta(1.5, 0.2), d_tau(0.3, 0.05);
  DdmParams truth{1.5, 0.0, 0.0, 0.5};
  truth.delta = d_delta(rng);
  truth.tau = std::max(0.05, d_tau(rng));
  const auto sim = simulate_ddm(truth, n_trials, seed, dt, threads);
  double min_rt = sim.trials.front().rt;
  for (const auto& t : sim.trials) min_rt = std::min(min_rt, t.rt);
  const DdmParams init{1.0, 0.5 * min_rt, 0.5, 0.5};
  return {truth, fit_mle(sim.trials, init), sim.censored.size()};
}

}  // namespace physio::ddm
