#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "physio/error.hpp"
#include "physio/numcore/dft.hpp"
#include "physio/numcore/random.hpp"

namespace physio::metrics {

namespace detail {

inline void require_same_length(std::span<const double> a, std::span<const double> b, const char* who) {
  if (a.size() != b.size()) {
    throw ShapeError(std::string(who) + ": length mismatch " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
}

inline double sq_norm(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return s;
}

inline double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

}  // namespace detail

/// Pearson correlation from centred dot products.
inline double pearson(std::span<const double> y, std::span<const double> yhat) {
  detail::require_same_length(y, yhat, "pearson");
  if (y.size() < 2) throw ShapeError("pearson: need at least 2 samples");
  const double n = static_cast<double>(y.size());
  double my = 0.0, mh = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    my += y[i];
    mh += yhat[i];
  }
  my /= n;
  mh /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double a = y[i] - my, b = yhat[i] - mh;
    sxy += a * b;
    sxx += a * a;
    syy += b * b;
  }
  if (sxx == 0.0 || syy == 0.0) throw NumericError("pearson: correlation undefined for a constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline double rmse(std::span<const double> y, std::span<const double> yhat) {
  detail::require_same_length(y, yhat, "rmse");
  if (y.empty()) throw ShapeError("rmse: empty input");
  return std::sqrt(detail::sq_dist(y, yhat) / static_cast<double>(y.size()));
}

/// 20*log10(||y||^2 / ||y - yhat||^2). Note the squared norms inside a 20*log10:
/// this is twice the usual 10*log10 power-ratio figure.
inline double snr_db(std::span<const double> y, std::span<const double> yhat) {
  detail::require_same_length(y, yhat, "snr_db");
  const double resid = detail::sq_dist(y, yhat);
  if (resid == 0.0) throw NumericError("snr_db: zero residual, SNR is infinite");
  return 20.0 * std::log10(detail::sq_norm(y) / resid);
}

/// Sum of absolute differences.
inline double rec_l1(std::span<const double> x, std::span<const double> xr) {
  detail::require_same_length(x, xr, "rec_l1");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(x[i] - xr[i]);
  return s;
}

/// Row-major sample set: n points of dimension d.
struct SampleSet {
  std::size_t dim = 1;
  std::vector<double> data;

  std::size_t count() const { return dim == 0 ? 0 : data.size() / dim; }
};

/// Sliced 2-Wasserstein distance: root of the mean squared 1D W2 over n_proj random
/// unit directions, each computed by pairing sorted projections.
inline double swd(const SampleSet& a, const SampleSet& b, std::size_t n_proj = 128, std::uint64_t seed = 0) {
  if (a.dim == 0 || a.dim != b.dim) throw ShapeError("swd: dimension mismatch");
  if (a.data.size() % a.dim != 0 || b.data.size() % b.dim != 0) throw ShapeError("swd: ragged sample set");
  if (a.count() == 0 || b.count() == 0) throw ShapeError("swd: empty sample set");
  if (a.count() != b.count()) {
    throw ShapeError("swd: sample counts differ (" + std::to_string(a.count()) + " vs " + std::to_string(b.count()) +
                     "); subsample the larger set first");
  }
  if (n_proj == 0) throw ConfigError("swd: n_proj must be >= 1");
  const std::size_t d = a.dim, n = a.count();
  auto rng = num::make_stream(seed, "metrics.swd");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> dir(d), pa(n), pb(n);
  double total = 0.0;
  for (std::size_t p = 0; p < n_proj; ++p) {
    double norm = 0.0;
    do {
      norm = 0.0;
      for (auto& v : dir) {
        v = normal(rng);
        norm += v * v;
      }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    for (auto& v : dir) v /= norm;
    for (std::size_t i = 0; i < n; ++i) {
      double sa = 0.0, sb = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        sa += a.data[i * d + k] * dir[k];
        sb += b.data[i * d + k] * dir[k];
      }
      pa[i] = sa;
      pb[i] = sb;
    }
    std::sort(pa.begin(), pa.end());
    std::sort(pb.begin(), pb.end());
    total += detail::sq_dist(pa, pb) / static_cast<double>(n);
  }
  return std::sqrt(total / static_cast<double>(n_proj));
}

/// Seeded subsample of `k` points without replacement (order preserved).
inline SampleSet subsample(const SampleSet& s, std::size_t k, std::uint64_t seed) {
  if (k > s.count()) throw ShapeError("subsample: k exceeds sample count");
  std::vector<std::size_t> idx(s.count());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  auto rng = num::make_stream(seed, "metrics.subsample");
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  SampleSet out{s.dim, {}};
  out.data.reserve(k * s.dim);
  for (auto i : idx) out.data.insert(out.data.end(), s.data.begin() + static_cast<std::ptrdiff_t>(i * s.dim),
                                     s.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * s.dim));
  return out;
}

/// Normalised rectangular periodogram over bins 0..floor(T/2).
inline std::vector<double> normalized_psd(std::span<const double> x) {
  if (x.size() < 2) throw ShapeError("spectral_entropy: need at least 2 samples");
  const auto X = num::dft(x);
  std::vector<double> p(x.size() / 2 + 1);
  double total = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    p[k] = std::norm(X[k]);
    total += p[k];
  }
  if (total == 0.0) throw NumericError("spectral_entropy: all-zero signal has no defined PSD");
  for (auto& v : p) v /= total;
  return p;
}

/// Shannon entropy (bits) of the normalised PSD. fs only relabels the bins and
/// does not change the value.
inline double spectral_entropy(std::span<const double> x, double fs = 1.0) {
  if (!(fs > 0.0)) throw ConfigError("spectral_entropy: fs must be > 0");
  double h = 0.0;
  for (double p : normalized_psd(x)) {
    if (p > 0.0) h -= p * std::log2(p);
  }
  return h;
}

/// Entropy of an explicit spectrum (normalised internally).
inline double spectrum_entropy(std::span<const double> power) {
  double total = 0.0;
  for (double v : power) {
    if (v < 0.0) throw NumericError("spectrum_entropy: negative power");
    total += v;
  }
  if (total == 0.0) throw NumericError("spectrum_entropy: all-zero spectrum");
  double h = 0.0;
  for (double v : power) {
    const double p = v / total;
    if (p > 0.0) h -= p * std::log2(p);
  }
  return h;
}

struct SpectrumStats {
  std::vector<double> magnitude;  // mean |X_k|
  std::vector<double> phase;      // circular mean of arg X_k
};

/// Per-bin batch mean of |X_k| and circular mean of arg(X_k). Where the mean
/// resultant vanishes (|sum e^{i phi}| < 1e-12 * count) the phase is reported as 0.
inline SpectrumStats fft_batch_stats(std::span<const std::vector<double>> batch) {
  if (batch.empty()) throw ShapeError("fft_batch_stats: empty batch");
  const std::size_t t = batch.front().size();
  SpectrumStats out{std::vector<double>(t, 0.0), std::vector<double>(t, 0.0)};
  std::vector<std::complex<double>> resultant(t, 0.0);
  for (const auto& x : batch) {
    if (x.size() != t) throw ShapeError("fft_batch_stats: signals differ in length");
    const auto X = num::dft(x);
    for (std::size_t k = 0; k < t; ++k) {
      out.magnitude[k] += std::abs(X[k]);
      const double ph = std::arg(X[k]);
      resultant[k] += std::polar(1.0, ph);
    }
  }
  const double n = static_cast<double>(batch.size());
  for (std::size_t k = 0; k < t; ++k) {
    out.magnitude[k] /= n;
    out.phase[k] = std::abs(resultant[k]) < 1e-12 * n ? 0.0 : std::arg(resultant[k]);
  }
  if (batch.size() == 1) {
    // Exact single-signal spectrum, free of the polar round trip.
    const auto X = num::dft(batch.front());
    for (std::size_t k = 0; k < t; ++k) out.phase[k] = std::arg(X[k]);
  }
  return out;
}

}  // namespace physio::metrics
