#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "physio/preprocess/segments.hpp"
#include "physio/signal.hpp"

namespace physio::prep {

struct PeakDetectConfig {
  double window_s = 0.75;
  double k = 1.0;
  double refractory_s = 0.3;

  void validate() const {
    if (!(window_s > 0.0) || !(k > 0.0) || !(refractory_s > 0.0)) {
      throw ConfigError("peak detection: window_s, k and refractory_s must all be > 0");
    }
  }

  friend bool operator==(const PeakDetectConfig&, const PeakDetectConfig&) = default;
};

/// Centered rolling mean/std over `w` samples (clipped at the borders), via prefix sums.
inline std::pair<std::vector<double>, std::vector<double>> rolling_stats(std::span<const double> x, std::size_t w) {
  const std::size_t n = x.size();
  std::vector<double> s1(n + 1, 0.0), s2(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    s1[i + 1] = s1[i] + x[i];
    s2[i + 1] = s2[i] + x[i] * x[i];
  }
  const std::size_t h = w / 2;
  std::vector<double> mean(n), sd(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= h ? i - h : 0;
    const std::size_t hi = std::min(n, i + h + 1);
    const double cnt = static_cast<double>(hi - lo);
    const double m = (s1[hi] - s1[lo]) / cnt;
    mean[i] = m;
    sd[i] = std::sqrt(std::max(0.0, (s2[hi] - s2[lo]) / cnt - m * m));
  }
  return {std::move(mean), std::move(sd)};
}

/// Strict local maxima above rolling mean + k*std, thinned so peaks are at
/// least refractory_s apart (the higher one survives).
inline std::vector<std::size_t> detect_peaks(const Signal& s, const PeakDetectConfig& cfg = {}) {
  s.validate();
  cfg.validate();
  const auto w = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.window_s * s.fs)));
  if (s.size() < 2 * w) {
    throw ShapeError("detect_peaks: signal of " + std::to_string(s.size()) + " samples is shorter than 2*window (" +
                     std::to_string(2 * w) + ")");
  }
  const auto& x = s.samples;
  const auto [mean, sd] = rolling_stats(x, w);
  std::vector<std::size_t> cand;
  for (std::size_t i = 1; i + 1 < x.size(); ++i) {
    if (x[i] > x[i - 1] && x[i] > x[i + 1] && x[i] > mean[i] + cfg.k * sd[i]) cand.push_back(i);
  }
  const auto refractory = static_cast<std::size_t>(std::llround(cfg.refractory_s * s.fs));
  std::vector<std::size_t> order(cand.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[cand[a]] > x[cand[b]]; });
  std::vector<std::size_t> kept;
  for (auto o : order) {
    const auto i = cand[o];
    const bool clear = std::none_of(kept.begin(), kept.end(), [&](std::size_t p) {
      return (p > i ? p - i : i - p) < refractory;
    });
    if (clear) kept.push_back(i);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

/// Half-open sample ranges [first, second).
using Interval = std::pair<std::size_t, std::size_t>;

/// Resamples each interval to length 90; intervals under 3 samples are skipped
/// and recorded in `dropped`.
inline SegmentSequence segment_intervals(const Signal& s, std::span<const Interval> intervals) {
  SegmentSequence out;
  out.fs = s.fs;
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    const auto [a, b] = intervals[i];
    if (b > s.size() || b < a) throw ShapeError("segment_intervals: interval outside signal");
    const std::size_t len = b - a;
    if (len < kMinIntervalSamples) {
      out.dropped.push_back({i, len});
      continue;
    }
    out.segments.push_back(resample_linear(std::span(s.samples).subspan(a, len), kSegmentLength));
    out.orig_lengths.push_back(len);
  }
  return out;
}

/// Segment i spans samples[peaks[i], peaks[i+1]).
inline SegmentSequence segment_resample(const Signal& s, std::span<const std::size_t> peaks) {
  if (peaks.size() < 2) throw ShapeError("segment_resample: need at least 2 peaks, got " + std::to_string(peaks.size()));
  std::vector<Interval> iv;
  for (std::size_t i = 0; i + 1 < peaks.size(); ++i) {
    if (peaks[i + 1] <= peaks[i]) throw ShapeError("segment_resample: peaks must be strictly increasing");
    iv.emplace_back(peaks[i], peaks[i + 1]);
  }
  return segment_intervals(s, iv);
}

inline NormStats fit_norm(std::span<const double> x) {
  if (x.empty()) throw ShapeError("normalize: empty input");
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  return {*lo, *hi, *lo == *hi};
}

/// Min-max map onto [-1, 1]; constant input maps to zeros with the degenerate flag set.
inline std::pair<Signal, NormStats> normalize(const Signal& s) {
  const auto st = fit_norm(s.samples);
  Signal out{s.fs, s.samples};
  for (auto& v : out.samples) v = st.forward(v);
  return {std::move(out), st};
}

inline std::pair<SegmentSequence, NormStats> normalize(const SegmentSequence& seq) {
  std::vector<double> all;
  for (const auto& seg : seq.segments) all.insert(all.end(), seg.begin(), seg.end());
  const auto st = fit_norm(all);
  SegmentSequence out = seq;
  for (auto& seg : out.segments) {
    for (auto& v : seg) v = st.forward(v);
  }
  out.norm_stats = st;
  return {std::move(out), st};
}

inline Signal denormalize(const Signal& s, const NormStats& st) {
  Signal out = s;
  for (auto& v : out.samples) v = st.inverse(v);
  return out;
}

inline SegmentSequence denormalize(const SegmentSequence& seq, const NormStats& st) {
  SegmentSequence out = seq;
  for (auto& seg : out.segments) {
    for (auto& v : seg) v = st.inverse(v);
  }
  return out;
}

/// Consecutive non-overlapping chunks of round(fs*chunk_s) samples; the remainder is dropped.
inline std::vector<Signal> chunk(const Signal& s, double chunk_s = 4.0) {
  const auto n = static_cast<std::size_t>(std::llround(s.fs * chunk_s));
  if (n < 1) throw ConfigError("chunk: fs*chunk_s must be >= 1");
  std::vector<Signal> out;
  for (std::size_t off = 0; off + n <= s.size(); off += n) {
    out.push_back({s.fs, std::vector<double>(s.samples.begin() + static_cast<std::ptrdiff_t>(off),
                                             s.samples.begin() + static_cast<std::ptrdiff_t>(off + n))});
  }
  return out;
}

/// Inverse of segment_resample: segment i is stretched back to lengths[i] samples.
inline Signal restore_lengths(const SegmentSequence& seq, std::span<const std::size_t> lengths) {
  if (lengths.size() != seq.steps()) {
    throw ShapeError("restore_lengths: " + std::to_string(seq.steps()) + " segments but " +
                     std::to_string(lengths.size()) + " lengths");
  }
  Signal out{seq.fs, {}};
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    if (lengths[i] == 0) continue;
    if (lengths[i] == 1) {
      out.samples.push_back(seq.segments[i].front());
      continue;
    }
    const auto r = resample_linear(seq.segments[i], lengths[i]);
    out.samples.insert(out.samples.end(), r.begin(), r.end());
  }
  return out;
}

/// Moving-average detrend (centered window), for baseline-wander suppression.
inline Signal detrend(const Signal& s, double window_s = 1.0) {
  const auto w = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(window_s * s.fs)));
  const auto mean = rolling_stats(s.samples, w).first;
  Signal out = s;
  for (std::size_t i = 0; i < out.size(); ++i) out.samples[i] -= mean[i];
  return out;
}

}  // namespace physio::prep
