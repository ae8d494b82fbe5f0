#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "physio/error.hpp"

namespace physio {

/// Uniformly sampled real-valued waveform.
struct Signal {
  double fs = 125.0;
  std::vector<double> samples;

  std::size_t size() const { return samples.size(); }
  double duration() const { return static_cast<double>(samples.size()) / fs; }

  void validate() const {
    if (!(fs > 0.0) || !std::isfinite(fs)) throw ConfigError("signal: sampling rate must be positive, got " + std::to_string(fs));
    for (double v : samples) {
      if (!std::isfinite(v)) throw NumericError("signal: non-finite sample");
    }
  }

  friend bool operator==(const Signal&, const Signal&) = default;
};

}  // namespace physio
