#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "json.hpp"
#include "physio/signal.hpp"

namespace physio::prep {

inline constexpr std::size_t kSegmentLength = 90;
inline constexpr std::size_t kMinIntervalSamples = 3;

/// Affine map used by min-max normalisation; degenerate when max == min.
struct NormStats {
  double min = 0.0;
  double max = 0.0;
  bool degenerate = false;

  double forward(double v) const {
    if (degenerate) return 0.0;
    return 2.0 * (v - min) / (max - min) - 1.0;
  }
  double inverse(double v) const {
    if (degenerate) return min;
    return (v + 1.0) * 0.5 * (max - min) + min;
  }

  friend bool operator==(const NormStats&, const NormStats&) = default;
};

/// Interval skipped by segmentation because it was too short to resample.
struct DroppedInterval {
  std::size_t index;   // interval position in the peak list
  std::size_t length;  // sample count

  friend bool operator==(const DroppedInterval&, const DroppedInterval&) = default;
};

/// T fixed-length segments with the sample counts they were resampled from.
struct SegmentSequence {
  double fs = 125.0;
  std::vector<std::vector<double>> segments;
  std::vector<std::size_t> orig_lengths;
  NormStats norm_stats{};
  std::vector<DroppedInterval> dropped;

  std::size_t steps() const { return segments.size(); }

  void validate() const {
    if (segments.size() != orig_lengths.size()) {
      throw ShapeError("segment sequence: " + std::to_string(segments.size()) + " segments but " +
                       std::to_string(orig_lengths.size()) + " lengths");
    }
    for (std::size_t i = 0; i < segments.size(); ++i) {
      if (segments[i].size() != kSegmentLength) {
        throw ShapeError("segment sequence: segment " + std::to_string(i) + " has length " +
                         std::to_string(segments[i].size()) + ", expected 90");
      }
      if (orig_lengths[i] < kMinIntervalSamples) {
        throw ShapeError("segment sequence: original length " + std::to_string(orig_lengths[i]) + " < 3");
      }
    }
  }

  friend bool operator==(const SegmentSequence&, const SegmentSequence&) = default;
};

/// Piecewise-linear resampling onto n_out points; output[j] sits at j*(n-1)/(n_out-1),
/// so both endpoints are preserved.
inline std::vector<double> resample_linear(std::span<const double> x, std::size_t n_out) {
  if (x.size() < 2 || n_out < 2) throw ShapeError("resample_linear: need at least 2 input and output points");
  std::vector<double> out(n_out);
  const double scale = static_cast<double>(x.size() - 1) / static_cast<double>(n_out - 1);
  for (std::size_t j = 0; j < n_out; ++j) {
    const double pos = static_cast<double>(j) * scale;
    auto i = static_cast<std::size_t>(pos);
    if (i >= x.size() - 1) {
      out[j] = x.back();
      continue;
    }
    const double frac = pos - static_cast<double>(i);
    out[j] = frac == 0.0 ? x[i] : x[i] + frac * (x[i + 1] - x[i]);
  }
  return out;
}

// ---- JSON ------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const NormStats& n) {
  j = {{"min", n.min}, {"max", n.max}, {"degenerate", n.degenerate}};
}
inline void from_json(const nlohmann::json& j, NormStats& n) {
  n = {j.at("min").get<double>(), j.at("max").get<double>(), j.at("degenerate").get<bool>()};
}

inline void to_json(nlohmann::json& j, const SegmentSequence& s) {
  j = {{"fs", s.fs},
       {"L", kSegmentLength},
       {"segments", s.segments},
       {"orig_lengths", s.orig_lengths},
       {"norm_stats", s.norm_stats}};
  if (!s.dropped.empty()) {
    auto& d = j["dropped"] = nlohmann::json::array();
    for (const auto& x : s.dropped) d.push_back({{"index", x.index}, {"length", x.length}});
  }
}
inline void from_json(const nlohmann::json& j, SegmentSequence& s) {
  if (j.at("L").get<std::size_t>() != kSegmentLength) throw FormatError("segment sequence: L must be 90");
  s.fs = j.at("fs").get<double>();
  s.segments = j.at("segments").get<std::vector<std::vector<double>>>();
  s.orig_lengths = j.at("orig_lengths").get<std::vector<std::size_t>>();
  s.norm_stats = j.at("norm_stats").get<NormStats>();
  s.dropped.clear();
  if (j.contains("dropped")) {
    for (const auto& d : j.at("dropped")) s.dropped.push_back({d.at("index").get<std::size_t>(), d.at("length").get<std::size_t>()});
  }
  s.validate();
}

}  // namespace physio::prep
