#pragma once

#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include "physio/error.hpp"

namespace physio::num {

using Complex = std::complex<double>;

namespace detail {

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

/// In-place iterative radix-2 transform, unnormalised; sign = -1 forward, +1 inverse.
inline void fft_radix2(std::vector<Complex>& a, int sign) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = sign * 2.0 * std::numbers::pi / static_cast<double>(len);
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        const Complex w = std::polar(1.0, ang * static_cast<double>(k));
        const Complex u = a[i + k];
        const Complex v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
      }
    }
  }
}

/// Direct O(T^2) sum, unnormalised.
inline std::vector<Complex> dft_direct(std::span<const Complex> x, int sign) {
  const std::size_t n = x.size();
  std::vector<Complex> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    Complex acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      // (k*t) mod n keeps the twiddle angle small and exact for large T.
      const double ang = sign * 2.0 * std::numbers::pi * static_cast<double>((k * t) % n) /
                         static_cast<double>(n);
      acc += x[t] * std::polar(1.0, ang);
    }
    out[k] = acc;
  }
  return out;
}

inline std::vector<Complex> transform(std::vector<Complex> x, int sign) {
  if (is_power_of_two(x.size())) {
    fft_radix2(x, sign);
    return x;
  }
  return dft_direct(x, sign);
}

}  // namespace detail

/// Fourier coefficients X_k = (1/T) sum_t x_t e^{-j 2 pi k t / T}, so X_0 is the mean.
inline std::vector<Complex> dft(std::span<const double> x) {
  if (x.empty()) throw Error("dft: empty input");
  std::vector<Complex> buf(x.begin(), x.end());
  auto out = detail::transform(std::move(buf), -1);
  const double inv = 1.0 / static_cast<double>(x.size());
  for (auto& c : out) c *= inv;
  return out;
}

/// x_t = sum_k X_k e^{+j 2 pi k t / T}; inverse of dft().
inline std::vector<Complex> inverse_dft(std::span<const Complex> coeffs) {
  if (coeffs.empty()) throw Error("inverse_dft: empty input");
  return detail::transform(std::vector<Complex>(coeffs.begin(), coeffs.end()), +1);
}

/// Real part of inverse_dft(), for spectra of real signals.
inline std::vector<double> inverse_dft_real(std::span<const Complex> coeffs) {
  auto z = inverse_dft(coeffs);
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i].real();
  return out;
}

}  // namespace physio::num
