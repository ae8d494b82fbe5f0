#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "physio/numcore/params.hpp"

namespace physio::num {

struct AdamConfig {
  double lr = 8e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  /// lr == 0 is accepted and freezes the parameters.
  void validate() const {
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("adam: lr must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("adam: beta1 must lie in [0,1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("adam: beta2 must lie in [0,1)");
    if (!(eps > 0.0)) throw ConfigError("adam: eps must be > 0");
  }
};

/// First/second moment accumulators over the flattened parameter vector.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// One bias-corrected Adam descent step on a flat parameter buffer.
inline void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
                      const AdamConfig& cfg) {
  cfg.validate();
  if (params.size() != grads.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " parameters but " +
                     std::to_string(grads.size()) + " gradients");
  }
  if (state.m.empty() && state.v.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeError("adam_step: optimizer state sized for " + std::to_string(state.m.size()) +
                     " parameters, got " + std::to_string(params.size()));
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

/// Adam step applied to a ParamSet; grads follow ParamSet::flatten() layout.
inline void adam_step(ParamSet& params, std::span<const double> grads, AdamState& state,
                      const AdamConfig& cfg) {
  if (grads.size() != params.total_size()) {
    throw ShapeError("adam_step: " + std::to_string(params.total_size()) + " parameters but " +
                     std::to_string(grads.size()) + " gradients");
  }
  auto flat = params.flatten();
  adam_step(std::span<double>(flat), grads, state, cfg);
  params.assign_flat(flat);
}

}  // namespace physio::num
