#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "physio/numcore/autodiff.hpp"
#include "physio/numcore/random.hpp"

namespace physio::num {

/// Additive floor applied to every network-emitted variance.
inline constexpr double kVarianceFloor = 1e-6;

/// Gaussian with diagonal covariance.
struct DiagGaussian {
  std::vector<double> mean;
  std::vector<double> var;

  std::size_t dim() const { return mean.size(); }

  void validate() const {
    if (mean.size() != var.size()) {
      throw ShapeError("DiagGaussian: mean has " + std::to_string(mean.size()) + " entries, var has " +
                       std::to_string(var.size()));
    }
    for (double v : var) {
      if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("DiagGaussian: variance must be positive and finite");
    }
  }

  double log_density(const std::vector<double>& x) const {
    double lp = 0.0;
    for (std::size_t i = 0; i < mean.size(); ++i) {
      const double d = x[i] - mean[i];
      lp += -0.5 * (std::log(2.0 * std::numbers::pi * var[i]) + d * d / var[i]);
    }
    return lp;
  }
};

/// mean + sqrt(var) * eps with eps ~ N(0, I) drawn from rng. Variances below
/// the floor are clamped to it, so a zero-variance input returns mean up to
/// sqrt(kVarianceFloor) * |eps|.
inline std::vector<double> reparam_sample(const DiagGaussian& q, Rng& rng) {
  if (q.mean.size() != q.var.size()) throw ShapeError("reparam_sample: mean/var length mismatch");
  const auto eps = standard_normal(rng, q.dim());
  std::vector<double> z(q.dim());
  for (std::size_t i = 0; i < z.size(); ++i) {
    z[i] = q.mean[i] + std::sqrt(std::max(q.var[i], kVarianceFloor)) * eps[i];
  }
  return z;
}

inline std::vector<double> reparam_sample(const DiagGaussian& q, std::uint64_t seed) {
  Rng rng = make_stream(seed, "reparam");
  return reparam_sample(q, rng);
}

/// Differentiable reparameterised draw: mean + sqrt(var) * eps for a fixed eps.
inline Var reparam(Var mean, Var var, const Tensor& eps) {
  Var e = mean.tape()->constant(eps);
  return add(mean, mul(sqrt(var), e));
}

/// Closed-form KL(q || p) for diagonal Gaussians.
inline double kl_diag_gaussian(const DiagGaussian& q, const DiagGaussian& p) {
  if (q.dim() != p.dim()) {
    throw ShapeError("kl_diag_gaussian: dimension " + std::to_string(q.dim()) + " vs " +
                     std::to_string(p.dim()));
  }
  q.validate();
  p.validate();
  double kl = 0.0;
  for (std::size_t i = 0; i < q.dim(); ++i) {
    const double d = q.mean[i] - p.mean[i];
    kl += 0.5 * (std::log(p.var[i] / q.var[i]) + (q.var[i] + d * d) / p.var[i] - 1.0);
  }
  return std::max(kl, 0.0);
}

}  // namespace physio::num
