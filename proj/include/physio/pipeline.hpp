#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "physio/adssm/model.hpp"
#include "physio/cardiosynth/generator.hpp"
#include "physio/metrics/metrics.hpp"
#include "physio/metrics/report.hpp"
#include "physio/numcore/random.hpp"
#include "physio/preprocess/pairing.hpp"
#include "physio/trainkit/train.hpp"

// End-to-end glue: synthetic corpus -> record-level split -> training examples
// -> translation and scoring on original-length signals.
namespace physio::pipeline {

struct CorpusConfig {
  std::size_t records = 50;
  double duration_s = 160.0;
  std::uint64_t seed = 0;
  synth::CardiacSimConfig cardiac;
  prep::PrepConfig prep;
};

/// Record r is synthesised from its own derived seed, so the corpus is
/// independent of how many records are requested.
inline std::vector<prep::ChunkPair> build_corpus(const CorpusConfig& cfg) {
  std::vector<prep::ChunkPair> out;
  for (std::size_t r = 0; r < cfg.records; ++r) {
    const auto rec = synth::synthesize_record(cfg.cardiac, cfg.duration_s, num::derive_seed(cfg.seed, "corpus.record", r));
    auto chunks = prep::make_chunk_pairs(rec.ppg, rec.ecg, cfg.prep, r);
    for (auto& c : chunks) out.push_back(std::move(c));
  }
  return out;
}

enum class Split { train, val, test };

/// 80/10/10 assignment of record ids after a seeded shuffle.
inline std::vector<Split> split_records(std::size_t n_records, std::uint64_t seed) {
  std::vector<std::size_t> order(n_records);
  std::iota(order.begin(), order.end(), 0);
  auto rng = num::make_stream(seed, "split");
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(0.8 * static_cast<double>(n_records)));
  const auto n_val = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n_records)));
  std::vector<Split> out(n_records, Split::test);
  for (std::size_t i = 0; i < n_records; ++i) {
    out[order[i]] = i < n_train ? Split::train : (i < n_train + n_val ? Split::val : Split::test);
  }
  return out;
}

inline trainkit::Example to_example(const prep::ChunkPair& c) { return {c.x.segments, c.y.segments}; }

struct SplitCorpus {
  std::vector<prep::ChunkPair> train, val, test;
};

inline SplitCorpus split_corpus(std::vector<prep::ChunkPair> chunks, std::size_t n_records, std::uint64_t seed) {
  const auto assign = split_records(n_records, seed);
  SplitCorpus s;
  for (auto& c : chunks) {
    switch (assign.at(c.record)) {
      case Split::train: s.train.push_back(std::move(c)); break;
      case Split::val: s.val.push_back(std::move(c)); break;
      case Split::test: s.test.push_back(std::move(c)); break;
    }
  }
  return s;
}

inline trainkit::Dataset to_dataset(const SplitCorpus& s) {
  trainkit::Dataset d;
  for (const auto& c : s.train) d.train.push_back(to_example(c));
  for (const auto& c : s.val) d.val.push_back(to_example(c));
  return d;
}

/// Ground-truth ECG over the paired intervals, in the chunk's normalised units.
inline std::vector<double> reference_ecg(const prep::ChunkPair& c) {
  std::vector<double> out;
  for (const auto& p : c.intervals) {
    out.insert(out.end(), c.ecg.samples.begin() + static_cast<std::ptrdiff_t>(p.ecg.first),
               c.ecg.samples.begin() + static_cast<std::ptrdiff_t>(p.ecg.second));
  }
  return out;
}

/// Translated segments stretched back to the ECG interval lengths.
inline std::vector<double> restore_prediction(const prep::ChunkPair& c, const adssm::Segments& pred) {
  prep::SegmentSequence seq = c.y;
  seq.segments = pred;
  return prep::restore_lengths(seq, c.y.orig_lengths).samples;
}

struct ChunkScore {
  double pearson = 0.0;
  double rmse = 0.0;
  double snr_db = 0.0;
};

/// SNR of a perfect reconstruction is reported as +inf rather than thrown.
inline ChunkScore score(std::span<const double> truth, std::span<const double> pred) {
  ChunkScore s;
  s.pearson = metrics::pearson(truth, pred);
  s.rmse = metrics::rmse(truth, pred);
  try {
    s.snr_db = metrics::snr_db(truth, pred);
  } catch (const NumericError&) {
    s.snr_db = std::numeric_limits<double>::infinity();
  }
  return s;
}

/// PPG segments of a chunk after the paper-default noise is added to its
/// normalised signal; segmentation reuses the intervals found on the clean chunk.
inline adssm::Segments noisy_inputs(const prep::ChunkPair& c, const synth::NoiseConfig& noise, std::uint64_t seed) {
  const auto noisy = synth::add_noise(c.ppg, noise, num::derive_seed(seed, "eval.noise", c.record * 100003 + c.chunk));
  return prep::resegment_ppg(c, noisy).segments;
}

struct EvalOptions {
  bool noisy = false;
  synth::NoiseConfig noise = synth::NoiseConfig::standard();
  std::uint64_t noise_seed = 0;
  std::size_t threads = 1;
};

/// Mean-mode translation of every chunk, scored against the reference ECG.
inline metrics::MetricReport evaluate(const num::ParamSet& ps, const adssm::AdssmConfig& cfg,
                                      const std::vector<prep::ChunkPair>& chunks, const EvalOptions& opt = {}) {
  std::vector<ChunkScore> scores(chunks.size());
  trainkit::parallel_for(chunks.size(), opt.threads, [&](std::size_t i) {
    const auto& c = chunks[i];
    const auto x = opt.noisy ? noisy_inputs(c, opt.noise, opt.noise_seed) : c.x.segments;
    const auto pred = adssm::translate(ps, cfg, x, adssm::TranslateMode::mean);
    scores[i] = score(reference_ecg(c), restore_prediction(c, pred.mean));
  });
  metrics::MetricReport report;
  for (const auto& s : scores) report.add_record({{"pearson", s.pearson}, {"rmse", s.rmse}, {"snr_db", s.snr_db}});
  return report;
}

}  // namespace physio::pipeline
