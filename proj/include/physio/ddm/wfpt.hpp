#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "physio/error.hpp"

namespace physio::ddm {

enum class Choice : int { lower = 0, upper = 1 };

struct DdmParams {
  double alpha = 1.5;  // boundary separation
  double tau = 0.3;    // non-decision time (s)
  double delta = 1.5;  // drift rate
  double bias = 0.5;   // starting point as a fraction of alpha

  void validate() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("ddm: alpha must be > 0");
    if (!(tau >= 0.0) || !std::isfinite(tau)) throw ConfigError("ddm: tau must be >= 0");
    if (!std::isfinite(delta)) throw ConfigError("ddm: delta must be finite");
    if (!(bias > 0.0 && bias < 1.0)) throw ConfigError("ddm: bias must lie in (0,1)");
  }

  friend bool operator==(const DdmParams&, const DdmParams&) = default;
};

struct Trial {
  double rt;
  Choice choice;

  friend bool operator==(const Trial&, const Trial&) = default;
};

inline constexpr std::size_t kMaxSeriesTerms = 1000;

struct DensityEval {
  double density;
  std::size_t terms;  // series terms summed (0 when rt <= tau)
};

/// Wiener first-passage density, large-time series with unit diffusion.
///
/// Lower boundary: (pi/a^2) exp(-a b d - d^2 t/2) sum_k k sin(pi k b) exp(-k^2 pi^2 t / (2 a^2)),
/// t = rt - tau. The upper boundary reflects b -> 1-b, d -> -d.
/// Summation stops once the integral bound on the remaining tail, scaled by the
/// prefactor, is below tol; the bound is only valid past the largest term.
inline DensityEval wfpt_density_eval(double rt, Choice choice, const DdmParams& p, double tol = 1e-10) {
  p.validate();
  if (!(tol > 0.0)) throw ConfigError("wfpt_density: tol must be > 0");
  if (!std::isfinite(rt)) throw ConfigError("wfpt_density: rt must be finite");
  const double t = rt - p.tau;
  if (t <= 0.0) return {0.0, 0};
  const double b = choice == Choice::upper ? 1.0 - p.bias : p.bias;
  const double d = choice == Choice::upper ? -p.delta : p.delta;
  const double a2 = p.alpha * p.alpha;
  const double pi = std::numbers::pi;
  const double prefactor = (pi / a2) * std::exp(-p.alpha * b * d - 0.5 * d * d * t);
  const double c = pi * pi * t / (2.0 * a2);  // term k decays as exp(-c k^2)
  const double k_peak = 1.0 / std::sqrt(2.0 * c);
  double sum = 0.0;
  for (std::size_t k = 1; k <= kMaxSeriesTerms; ++k) {
    const double kd = static_cast<double>(k);
    const double decay = std::exp(-c * kd * kd);
    sum += kd * std::sin(pi * kd * b) * decay;
    // sum_{j>k} j exp(-c j^2) <= int_k^inf x exp(-c x^2) dx = exp(-c k^2) / (2c)
    if (kd >= k_peak && prefactor * decay / (2.0 * c) < tol) {
      return {std::max(0.0, prefactor * sum), k};
    }
  }
  throw ConvergenceError("wfpt_density: series did not reach tol=" + std::to_string(tol) + " within " +
                         std::to_string(kMaxSeriesTerms) + " terms at rt - tau = " + std::to_string(t) +
                         " s (decision time too small for the large-time expansion)");
}

inline double wfpt_density(double rt, Choice choice, const DdmParams& p, double tol = 1e-10) {
  return wfpt_density_eval(rt, choice, p, tol).density;
}

/// Closed-form probability of absorbing at the upper boundary.
inline double upper_probability(const DdmParams& p) {
  p.validate();
  if (p.delta == 0.0) return p.bias;
  // P(upper) = (1 - exp(-2 d a b)) / (1 - exp(-2 d a)), written with expm1 for accuracy.
  return std::expm1(-2.0 * p.delta * p.alpha * p.bias) / std::expm1(-2.0 * p.delta * p.alpha);
}

struct LogLik {
  double value = 0.0;
  bool finite = true;
  std::size_t n_nonfinite = 0;  // trials with zero density or no series convergence
};

/// Sum of log densities. Trials with rt <= tau, zero density or a failed series
/// contribute -inf and are counted; the call itself never throws for them.
inline LogLik wfpt_loglik(std::span<const Trial> trials, const DdmParams& p, double tol = 1e-10) {
  p.validate();
  LogLik out;
  for (const auto& tr : trials) {
    double dens = 0.0;
    try {
      dens = wfpt_density(tr.rt, tr.choice, p, tol);
    } catch (const ConvergenceError&) {
      dens = 0.0;
    }
    if (dens > 0.0) {
      out.value += std::log(dens);
    } else {
      ++out.n_nonfinite;
    }
  }
  if (out.n_nonfinite > 0) {
    out.value = -std::numeric_limits<double>::infinity();
    out.finite = false;
  }
  return out;
}

}  // namespace physio::ddm
