#pragma once

#include <cmath>
#include <functional>

namespace physio::testing {

namespace detail {

inline double simpson_step(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
                           double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson quadrature with Richardson correction.
inline double integrate(const std::function<double(double)>& f, double a, double b, double tol = 1e-10,
                        int max_depth = 40) {
  const double fa = f(a), fb = f(b), m = 0.5 * (a + b), fm = f(m);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::simpson_step(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

/// Splits [a, b] into `pieces` panels first, so narrow features are not missed.
inline double integrate_panels(const std::function<double(double)>& f, double a, double b, int pieces,
                               double tol = 1e-10) {
  double total = 0.0;
  for (int i = 0; i < pieces; ++i) {
    const double lo = a + (b - a) * i / pieces, hi = a + (b - a) * (i + 1) / pieces;
    total += integrate(f, lo, hi, tol / pieces);
  }
  return total;
}

}  // namespace physio::testing
