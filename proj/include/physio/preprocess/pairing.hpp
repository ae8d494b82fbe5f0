#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "physio/preprocess/preprocess.hpp"

namespace physio::prep {

struct PrepConfig {
  PeakDetectConfig ppg_peaks{};
  PeakDetectConfig ecg_peaks{};
  double chunk_s = 4.0;
  std::size_t min_steps = 1;  // chunks yielding fewer paired intervals are skipped

  void validate() const {
    ppg_peaks.validate();
    ecg_peaks.validate();
    if (!(chunk_s > 0.0)) throw ConfigError("prep: chunk_s must be > 0");
    if (min_steps < 1) throw ConfigError("prep: min_steps must be >= 1");
  }

  friend bool operator==(const PrepConfig&, const PrepConfig&) = default;
};

struct IntervalPair {
  Interval ppg;
  Interval ecg;
};

/// Pairs PP interval [p_j, p_{j+1}) with RR interval [r_k, r_{k+1}) where r_k is
/// the R peak nearest p_j, accepted only within half a PP interval. Each R peak
/// starts at most one pair, and pairs with a side shorter than 3 samples are skipped.
inline std::vector<IntervalPair> pair_intervals(std::span<const std::size_t> ppg_peaks,
                                                std::span<const std::size_t> ecg_peaks) {
  std::vector<IntervalPair> out;
  if (ppg_peaks.size() < 2 || ecg_peaks.size() < 2) return out;
  std::size_t next_free = 0;
  for (std::size_t j = 0; j + 1 < ppg_peaks.size(); ++j) {
    const std::size_t p = ppg_peaks[j];
    const std::size_t pp_len = ppg_peaks[j + 1] - p;
    auto it = std::lower_bound(ecg_peaks.begin(), ecg_peaks.end(), p);
    std::size_t k = static_cast<std::size_t>(it - ecg_peaks.begin());
    auto dist = [&](std::size_t idx) { return ecg_peaks[idx] > p ? ecg_peaks[idx] - p : p - ecg_peaks[idx]; };
    if (k == ecg_peaks.size() || (k > 0 && dist(k - 1) <= dist(k))) --k;
    if (2 * dist(k) > pp_len || k < next_free || k + 1 >= ecg_peaks.size()) continue;
    const Interval rr{ecg_peaks[k], ecg_peaks[k + 1]};
    next_free = k + 1;
    if (pp_len < kMinIntervalSamples || rr.second - rr.first < kMinIntervalSamples) continue;
    out.push_back({{p, ppg_peaks[j + 1]}, rr});
  }
  return out;
}

/// One 4-s chunk of a paired record after normalisation and segmentation.
struct ChunkPair {
  std::size_t record = 0;
  std::size_t chunk = 0;
  Signal ppg;  // normalised chunk
  Signal ecg;  // normalised chunk
  std::vector<IntervalPair> intervals;
  SegmentSequence x;  // PPG segments
  SegmentSequence y;  // ECG segments
};

/// Re-segments a (possibly corrupted) PPG chunk at the intervals found on the clean one.
inline SegmentSequence resegment_ppg(const ChunkPair& cp, const Signal& ppg) {
  std::vector<Interval> iv;
  for (const auto& p : cp.intervals) iv.push_back(p.ppg);
  auto seq = segment_intervals(ppg, iv);
  seq.norm_stats = cp.x.norm_stats;
  return seq;
}

/// chunk -> normalise -> detect peaks -> pair -> resample, for one record.
inline std::vector<ChunkPair> make_chunk_pairs(const Signal& ppg, const Signal& ecg, const PrepConfig& cfg,
                                               std::size_t record = 0) {
  cfg.validate();
  if (ppg.fs != ecg.fs) throw ConfigError("make_chunk_pairs: PPG and ECG sampling rates differ");
  const auto pc = chunk(ppg, cfg.chunk_s);
  const auto ec = chunk(ecg, cfg.chunk_s);
  std::vector<ChunkPair> out;
  for (std::size_t c = 0; c < std::min(pc.size(), ec.size()); ++c) {
    auto [pn, pstats] = normalize(pc[c]);
    auto [en, estats] = normalize(ec[c]);
    if (pstats.degenerate || estats.degenerate) continue;
    const auto pairs = pair_intervals(detect_peaks(pn, cfg.ppg_peaks), detect_peaks(en, cfg.ecg_peaks));
    if (pairs.size() < cfg.min_steps) continue;
    ChunkPair cp{record, c, std::move(pn), std::move(en), pairs, {}, {}};
    std::vector<Interval> pi, ei;
    for (const auto& p : pairs) {
      pi.push_back(p.ppg);
      ei.push_back(p.ecg);
    }
    cp.x = segment_intervals(cp.ppg, pi);
    cp.y = segment_intervals(cp.ecg, ei);
    cp.x.norm_stats = pstats;
    cp.y.norm_stats = estats;
    out.push_back(std::move(cp));
  }
  return out;
}

}  // namespace physio::prep
