#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "json.hpp"

#include "physio/error.hpp"

namespace physio::synth {

/// One Gaussian bump of the beat template, in intra-beat phase units.
struct EcgWave {
  double phase;
  double amplitude;
  double width;

  friend bool operator==(const EcgWave&, const EcgWave&) = default;
};

/// Asymmetric pulse: Gaussian rise up to the apex at `lag`, exponential decay after.
struct PpgPulse {
  double amplitude = 1.0;
  double lag = 0.25;
  double rise = 0.07;
  double decay = 0.2;

  friend bool operator==(const PpgPulse&, const PpgPulse&) = default;
};

/// Sinusoidal modulation of the RR series (respiratory-sinus-like HRV).
struct HrvModulation {
  double amplitude = 0.03;
  double frequency = 0.1;

  friend bool operator==(const HrvModulation&, const HrvModulation&) = default;
};

struct CardiacSimConfig {
  double mean_rr = 1.0;
  double rr_std = 0.05;
  HrvModulation hrv_mod{};
  // P, Q, R, S, T in that order.
  std::array<EcgWave, 5> ecg_waves{{{0.15, 0.12, 0.025},
                                    {0.28, -0.10, 0.010},
                                    {0.30, 1.00, 0.012},
                                    {0.32, -0.15, 0.010},
                                    {0.55, 0.25, 0.040}}};
  PpgPulse ppg_pulse{};
  double fs = 125.0;

  static constexpr std::size_t kRWave = 2;

  void validate() const {
    auto fail = [](const std::string& m) { throw ConfigError("cardiac config: " + m); };
    if (!(mean_rr > 0.0)) fail("mean_rr must be > 0");
    if (!(rr_std >= 0.0)) fail("rr_std must be >= 0");
    if (!(hrv_mod.amplitude >= 0.0) || !(hrv_mod.frequency >= 0.0)) fail("hrv modulation must be >= 0");
    if (!(fs > 0.0)) fail("fs must be > 0");
    double prev = 0.0;
    for (std::size_t i = 0; i < ecg_waves.size(); ++i) {
      const auto& w = ecg_waves[i];
      if (!(w.phase > prev && w.phase < 1.0)) fail("ecg wave phases must increase strictly within (0,1)");
      if (!(w.width > 0.0)) fail("ecg wave widths must be > 0");
      if (!std::isfinite(w.amplitude)) fail("ecg wave amplitude must be finite");
      prev = w.phase;
    }
    if (!(ppg_pulse.lag >= 0.0 && ppg_pulse.lag <= 0.5)) fail("ppg lag must lie in [0,0.5]");
    if (!(ppg_pulse.rise > 0.0) || !(ppg_pulse.decay > 0.0)) fail("ppg rise/decay widths must be > 0");
    if (!std::isfinite(ppg_pulse.amplitude)) fail("ppg amplitude must be finite");
  }

  friend bool operator==(const CardiacSimConfig&, const CardiacSimConfig&) = default;
};

struct Sinusoid {
  double amplitude;
  double frequency;

  friend bool operator==(const Sinusoid&, const Sinusoid&) = default;
};

/// Baseline wander (sum of sinusoids) plus white Gaussian noise.
struct NoiseConfig {
  std::vector<Sinusoid> baseline;
  double gaussian_std = 0.0;

  /// Three baseline sinusoids (0.3 @ 0.3 Hz, 0.4 @ 0.2 Hz, 0.1 @ 0.9 Hz) and sigma 0.3.
  static NoiseConfig standard() { return {{{0.3, 0.3}, {0.4, 0.2}, {0.1, 0.9}}, 0.3}; }

  void validate() const {
    for (const auto& s : baseline) {
      if (!(s.frequency > 0.0)) throw ConfigError("noise config: baseline frequencies must be > 0");
      if (!(s.amplitude >= 0.0)) throw ConfigError("noise config: baseline amplitudes must be >= 0");
    }
    if (!(gaussian_std >= 0.0)) throw ConfigError("noise config: gaussian_std must be >= 0");
  }

  friend bool operator==(const NoiseConfig&, const NoiseConfig&) = default;
};

// ---- JSON ------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const EcgWave& w) {
  j = {{"phase", w.phase}, {"amplitude", w.amplitude}, {"width", w.width}};
}
inline void from_json(const nlohmann::json& j, EcgWave& w) {
  w = {j.at("phase").get<double>(), j.at("amplitude").get<double>(), j.at("width").get<double>()};
}

inline void to_json(nlohmann::json& j, const CardiacSimConfig& c) {
  j = {{"mean_rr", c.mean_rr},
       {"rr_std", c.rr_std},
       {"hrv_mod", {{"amplitude", c.hrv_mod.amplitude}, {"frequency", c.hrv_mod.frequency}}},
       {"ecg_waves", c.ecg_waves},
       {"ppg_pulse",
        {{"amplitude", c.ppg_pulse.amplitude},
         {"lag", c.ppg_pulse.lag},
         {"rise", c.ppg_pulse.rise},
         {"decay", c.ppg_pulse.decay}}},
       {"fs", c.fs}};
}
inline void from_json(const nlohmann::json& j, CardiacSimConfig& c) {
  c.mean_rr = j.at("mean_rr").get<double>();
  c.rr_std = j.at("rr_std").get<double>();
  c.hrv_mod = {j.at("hrv_mod").at("amplitude").get<double>(), j.at("hrv_mod").at("frequency").get<double>()};
  c.ecg_waves = j.at("ecg_waves").get<std::array<EcgWave, 5>>();
  const auto& p = j.at("ppg_pulse");
  c.ppg_pulse = {p.at("amplitude").get<double>(), p.at("lag").get<double>(), p.at("rise").get<double>(),
                 p.at("decay").get<double>()};
  c.fs = j.at("fs").get<double>();
}

inline void to_json(nlohmann::json& j, const NoiseConfig& n) {
  j = nlohmann::json{{"gaussian_std", n.gaussian_std}, {"baseline", nlohmann::json::array()}};
  for (const auto& s : n.baseline) j["baseline"].push_back({{"amplitude", s.amplitude}, {"frequency", s.frequency}});
}
inline void from_json(const nlohmann::json& j, NoiseConfig& n) {
  n.gaussian_std = j.at("gaussian_std").get<double>();
  n.baseline.clear();
  for (const auto& s : j.at("baseline")) n.baseline.push_back({s.at("amplitude").get<double>(), s.at("frequency").get<double>()});
}

}  // namespace physio::synth
