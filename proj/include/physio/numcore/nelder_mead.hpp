#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "physio/error.hpp"

namespace physio::num {

struct NelderMeadOptions {
  std::vector<double> initial_step;  // per-coordinate simplex offsets; empty -> 0.1
  double diameter_tol = 1e-6;        // max vertex distance from the best vertex
  std::size_t max_iter = 2000;
};

struct NelderMeadResult {
  std::vector<double> x;
  double fx;
  std::size_t iterations;
  bool converged;
};

/// Derivative-free minimisation (standard coefficients 1, 2, 0.5, 0.5).
/// Non-finite objective values are treated as +inf, so the simplex retreats from them.
inline NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x0,
                                    const NelderMeadOptions& opt = {}) {
  const std::size_t n = x0.size();
  if (n == 0) throw ConfigError("nelder_mead: empty starting point");
  if (!opt.initial_step.empty() && opt.initial_step.size() != n) {
    throw ShapeError("nelder_mead: initial_step has " + std::to_string(opt.initial_step.size()) + " entries for " +
                     std::to_string(n) + " coordinates");
  }
  auto eval = [&](const std::vector<double>& x) {
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };
  std::vector<std::vector<double>> simplex(n + 1, x0);
  for (std::size_t i = 0; i < n; ++i) simplex[i + 1][i] += opt.initial_step.empty() ? 0.1 : opt.initial_step[i];
  std::vector<double> fv(n + 1);
  for (std::size_t i = 0; i <= n; ++i) fv[i] = eval(simplex[i]);

  std::vector<std::size_t> order(n + 1);
  auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    std::vector<std::vector<double>> s2;
    std::vector<double> f2;
    for (auto i : order) {
      s2.push_back(simplex[i]);
      f2.push_back(fv[i]);
    }
    simplex = std::move(s2);
    fv = std::move(f2);
  };
  auto diameter = [&] {
    double d = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += (simplex[i][k] - simplex[0][k]) * (simplex[i][k] - simplex[0][k]);
      d = std::max(d, std::sqrt(s));
    }
    return d;
  };
  auto along = [&](const std::vector<double>& c, const std::vector<double>& w, double coef) {
    std::vector<double> x(n);
    for (std::size_t k = 0; k < n; ++k) x[k] = c[k] + coef * (w[k] - c[k]);
    return x;
  };

  std::size_t it = 0;
  sort_simplex();
  while (it < opt.max_iter && diameter() >= opt.diameter_tol) {
    ++it;
    std::vector<double> centroid(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < n; ++k) centroid[k] += simplex[i][k] / static_cast<double>(n);
    }
    const auto xr = along(centroid, simplex[n], -1.0);
    const double fr = eval(xr);
    if (fr < fv[0]) {
      const auto xe = along(centroid, simplex[n], -2.0);
      const double fe = eval(xe);
      if (fe < fr) {
        simplex[n] = xe;
        fv[n] = fe;
      } else {
        simplex[n] = xr;
        fv[n] = fr;
      }
    } else if (fr < fv[n - 1]) {
      simplex[n] = xr;
      fv[n] = fr;
    } else {
      const bool outside = fr < fv[n];
      const auto xc = outside ? along(centroid, xr, 0.5) : along(centroid, simplex[n], 0.5);
      const double fc = eval(xc);
      if (fc < (outside ? fr : fv[n])) {
        simplex[n] = xc;
        fv[n] = fc;
      } else {
        for (std::size_t i = 1; i <= n; ++i) {
          simplex[i] = along(simplex[0], simplex[i], 0.5);
          fv[i] = eval(simplex[i]);
        }
      }
    }
    sort_simplex();
  }
  return {simplex[0], fv[0], it, diameter() < opt.diameter_tol};
}

}  // namespace physio::num
