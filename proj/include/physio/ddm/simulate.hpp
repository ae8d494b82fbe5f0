#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <thread>
#include <vector>

#include "physio/ddm/wfpt.hpp"
#include "physio/numcore/random.hpp"

namespace physio::ddm {

inline constexpr double kCensorSeconds = 60.0;

struct SimulationResult {
  std::vector<Trial> trials;          // completed trials, in trial-index order
  std::vector<std::size_t> censored;  // indices of trials that hit the 60 s horizon
};

namespace detail {

/// Returns false when the walk is censored.
inline bool simulate_trial(const DdmParams& p, double dt, std::uint64_t seed, std::uint64_t index, Trial& out) {
  auto rng = num::make_stream(seed, "ddm.trial", index);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double step_mean = p.delta * dt;
  const double step_sd = std::sqrt(dt);
  const auto max_steps = static_cast<std::uint64_t>(std::ceil(kCensorSeconds / dt));
  double x = p.bias * p.alpha;
  for (std::uint64_t n = 1; n <= max_steps; ++n) {
    x += step_mean + step_sd * normal(rng);
    if (x <= 0.0 || x >= p.alpha) {
      out = {p.tau + static_cast<double>(n) * dt, x >= p.alpha ? Choice::upper : Choice::lower};
      return true;
    }
  }
  return false;
}

}  // namespace detail

/// Euler-Maruyama walk from bias*alpha until it leaves (0, alpha). Trial i uses
/// its own stream derived from (seed, i), so results do not depend on `threads`.
inline SimulationResult simulate_ddm(const DdmParams& p, std::size_t n_trials, std::uint64_t seed, double dt = 1e-4,
                                     unsigned threads = 1) {
  p.validate();
  if (!(dt > 0.0)) throw ConfigError("simulate_ddm: dt must be > 0");
  if (n_trials == 0) throw ConfigError("simulate_ddm: n_trials must be >= 1");
  std::vector<Trial> all(n_trials);
  std::vector<char> ok(n_trials, 0);
  auto work = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) ok[i] = detail::simulate_trial(p, dt, seed, i, all[i]) ? 1 : 0;
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n_trials)));
  if (threads == 1) {
    work(0, n_trials);
  } else {
    std::vector<std::thread> pool;
    const std::size_t per = (n_trials + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t lo = t * per, hi = std::min(n_trials, lo + per);
      if (lo < hi) pool.emplace_back(work, lo, hi);
    }
    for (auto& th : pool) th.join();
  }
  SimulationResult out;
  out.trials.reserve(n_trials);
  for (std::size_t i = 0; i < n_trials; ++i) {
    if (ok[i]) {
      out.trials.push_back(all[i]);
    } else {
      out.censored.push_back(i);
    }
  }
  return out;
}

}  // namespace physio::ddm
