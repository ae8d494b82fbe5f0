#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "physio/cardiosynth/config.hpp"
#include "physio/numcore/random.hpp"
#include "physio/signal.hpp"

namespace physio::synth {

inline constexpr double kMinRr = 0.3;
inline constexpr double kMaxRr = 2.0;

/// RR intervals in seconds; t_i is the onset time of beat i (t_0 = 0).
inline std::vector<double> gen_rr_series(const CardiacSimConfig& cfg, std::size_t n_beats, std::uint64_t seed) {
  cfg.validate();
  if (n_beats == 0) throw ConfigError("gen_rr_series: n_beats must be >= 1");
  auto rng = num::make_stream(seed, "cardiosynth.rr");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> rr(n_beats);
  double t = 0.0;
  for (std::size_t i = 0; i < n_beats; ++i) {
    const double eps = normal(rng);
    const double mod = cfg.hrv_mod.amplitude * std::sin(2.0 * std::numbers::pi * cfg.hrv_mod.frequency * t);
    rr[i] = std::clamp(cfg.mean_rr + cfg.rr_std * eps + mod, kMinRr, kMaxRr);
    t += rr[i];
  }
  return rr;
}

/// Sample index of each beat onset, plus the end index as the final entry.
inline std::vector<std::size_t> beat_starts(std::span<const double> rr, double fs) {
  if (rr.empty()) throw ConfigError("beat_starts: empty RR series");
  std::vector<std::size_t> starts(rr.size() + 1);
  double t = 0.0;
  starts[0] = 0;
  for (std::size_t i = 0; i < rr.size(); ++i) {
    t += rr[i];
    starts[i + 1] = static_cast<std::size_t>(std::llround(t * fs));
    if (starts[i + 1] < starts[i] + 2) {
      throw ConfigError("beat_starts: beat " + std::to_string(i) + " spans fewer than 2 samples at fs=" +
                        std::to_string(fs));
    }
  }
  return starts;
}

/// Sample index where each beat reaches intra-beat phase `phase`.
inline std::vector<std::size_t> phase_indices(std::span<const double> rr, double fs, double phase) {
  const auto starts = beat_starts(rr, fs);
  std::vector<std::size_t> out(rr.size());
  for (std::size_t i = 0; i < rr.size(); ++i) {
    const double len = static_cast<double>(starts[i + 1] - starts[i]);
    out[i] = starts[i] + static_cast<std::size_t>(std::llround(phase * len));
  }
  return out;
}

/// Ground-truth R-peak sample indices for gen_ecg(rr, cfg).
inline std::vector<std::size_t> r_peak_indices(std::span<const double> rr, const CardiacSimConfig& cfg) {
  cfg.validate();
  return phase_indices(rr, cfg.fs, cfg.ecg_waves[CardiacSimConfig::kRWave].phase);
}

namespace detail {

inline double gauss_bump(double u, double centre, double width) {
  const double d = (u - centre) / width;
  return std::exp(-0.5 * d * d);
}

inline double ppg_shape(double u, const PpgPulse& p) {
  if (u <= p.lag) return gauss_bump(u, p.lag, p.rise);
  return std::exp(-(u - p.lag) / p.decay);
}

}  // namespace detail

inline Signal gen_ecg(std::span<const double> rr, const CardiacSimConfig& cfg) {
  cfg.validate();
  const auto starts = beat_starts(rr, cfg.fs);
  Signal out{cfg.fs, std::vector<double>(starts.back(), 0.0)};
  for (std::size_t b = 0; b < rr.size(); ++b) {
    const double len = static_cast<double>(starts[b + 1] - starts[b]);
    for (std::size_t n = starts[b]; n < starts[b + 1]; ++n) {
      const double u = static_cast<double>(n - starts[b]) / len;
      double v = 0.0;
      for (const auto& w : cfg.ecg_waves) {
        if (w.amplitude != 0.0) v += w.amplitude * detail::gauss_bump(u, w.phase, w.width);
      }
      out.samples[n] = v;
    }
  }
  return out;
}

/// One pulse per beat; the decaying tail of the previous pulse carries into the next beat.
inline Signal gen_ppg(std::span<const double> rr, const CardiacSimConfig& cfg) {
  cfg.validate();
  const auto& p = cfg.ppg_pulse;
  const auto starts = beat_starts(rr, cfg.fs);
  Signal out{cfg.fs, std::vector<double>(starts.back(), 0.0)};
  if (p.amplitude == 0.0) return out;
  for (std::size_t b = 0; b < rr.size(); ++b) {
    const double len = static_cast<double>(starts[b + 1] - starts[b]);
    const double prev_len = b > 0 ? static_cast<double>(starts[b] - starts[b - 1]) : 0.0;
    for (std::size_t n = starts[b]; n < starts[b + 1]; ++n) {
      const double u = static_cast<double>(n - starts[b]) / len;
      double v = detail::ppg_shape(u, p);
      if (b > 0) {
        const double u_prev = static_cast<double>(n - starts[b - 1]) / prev_len;
        v += std::exp(-(u_prev - p.lag) / p.decay);
      }
      out.samples[n] = p.amplitude * v;
    }
  }
  return out;
}

/// out[t] = s[t] + sum_j a_j sin(2 pi f_j t / fs) + sigma * eps_t.
inline Signal add_noise(const Signal& s, const NoiseConfig& n, std::uint64_t seed) {
  s.validate();
  n.validate();
  Signal out = s;
  for (const auto& b : n.baseline) {
    if (b.amplitude == 0.0) continue;
    for (std::size_t t = 0; t < out.samples.size(); ++t) {
      const double time = static_cast<double>(t) / s.fs;
      out.samples[t] += b.amplitude * std::sin(2.0 * std::numbers::pi * b.frequency * time);
    }
  }
  if (n.gaussian_std > 0.0) {
    auto rng = num::make_stream(seed, "cardiosynth.noise");
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& v : out.samples) v += n.gaussian_std * normal(rng);
  }
  return out;
}

/// Paired PPG/ECG record of a fixed duration sharing one RR series.
struct PairedRecord {
  Signal ppg;
  Signal ecg;
  std::vector<double> rr;
  std::vector<std::size_t> r_peaks;
};

/// Generates beats until `duration_s` is covered, then truncates both signals
/// to round(duration_s * fs) samples.
inline PairedRecord synthesize_record(const CardiacSimConfig& cfg, double duration_s, std::uint64_t seed) {
  cfg.validate();
  if (!(duration_s > 0.0)) throw ConfigError("synthesize_record: duration must be > 0");
  std::size_t n = static_cast<std::size_t>(std::ceil(duration_s / cfg.mean_rr)) + 2;
  std::vector<double> rr;
  for (;;) {
    rr = gen_rr_series(cfg, n, seed);
    double total = 0.0;
    std::size_t keep = 0;
    while (keep < rr.size() && total < duration_s) total += rr[keep++];
    if (total >= duration_s) {
      rr.resize(keep);
      break;
    }
    n *= 2;
  }
  const auto n_samples = static_cast<std::size_t>(std::llround(duration_s * cfg.fs));
  PairedRecord rec{gen_ppg(rr, cfg), gen_ecg(rr, cfg), rr, {}};
  rec.ppg.samples.resize(std::min(rec.ppg.samples.size(), n_samples));
  rec.ecg.samples.resize(std::min(rec.ecg.samples.size(), n_samples));
  for (auto idx : r_peak_indices(rr, cfg)) {
    if (idx < rec.ecg.size()) rec.r_peaks.push_back(idx);
  }
  return rec;
}

}  // namespace physio::synth
