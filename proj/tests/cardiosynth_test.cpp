#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <numeric>
#include <vector>

#include "physio/cardiosynth/generator.hpp"
#include "physio/cardiosynth/io.hpp"

using namespace physio;
using namespace physio::synth;

namespace {

CardiacSimConfig steady() {
  CardiacSimConfig cfg;
  cfg.rr_std = 0.0;
  cfg.hrv_mod.amplitude = 0.0;
  return cfg;
}

double sample_variance(const std::vector<double>& v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size() - 1);
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("physio_cardiosynth_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST(RrSeries, ConstantWithoutVariability) {
  const auto rr = gen_rr_series(steady(), 10, 1);
  ASSERT_EQ(rr.size(), 10u);
  for (double v : rr) EXPECT_EQ(v, 1.0);
}

TEST(RrSeries, DeterministicPerSeed) {
  CardiacSimConfig cfg;
  EXPECT_EQ(gen_rr_series(cfg, 100, 5), gen_rr_series(cfg, 100, 5));
  EXPECT_NE(gen_rr_series(cfg, 100, 5), gen_rr_series(cfg, 100, 6));
}

TEST(RrSeries, SampleStdMatchesConfig) {
  CardiacSimConfig cfg;
  cfg.hrv_mod.amplitude = 0.0;
  const auto rr = gen_rr_series(cfg, 10000, 11);
  const double sd = std::sqrt(sample_variance(rr));
  EXPECT_GE(sd, 0.045);
  EXPECT_LE(sd, 0.055);
}

TEST(RrSeries, ClampedToPhysiologicalRange) {
  CardiacSimConfig cfg;
  cfg.rr_std = 1.0;
  for (double v : gen_rr_series(cfg, 5000, 3)) {
    EXPECT_GE(v, kMinRr);
    EXPECT_LE(v, kMaxRr);
  }
}

TEST(RrSeries, RejectsInvalidConfig) {
  CardiacSimConfig cfg;
  EXPECT_THROW(gen_rr_series(cfg, 0, 1), ConfigError);
  cfg.mean_rr = 0.0;
  EXPECT_THROW(gen_rr_series(cfg, 5, 1), ConfigError);
  cfg = CardiacSimConfig{};
  cfg.ecg_waves[1].phase = 0.1;  // Q before P
  EXPECT_THROW(gen_rr_series(cfg, 5, 1), ConfigError);
  cfg = CardiacSimConfig{};
  cfg.ecg_waves[0].width = 0.0;
  EXPECT_THROW(gen_rr_series(cfg, 5, 1), ConfigError);
}

TEST(Ecg, ZeroAmplitudesGiveZeroSignal) {
  auto cfg = steady();
  for (auto& w : cfg.ecg_waves) w.amplitude = 0.0;
  const auto s = gen_ecg(std::vector<double>(4, 1.0), cfg);
  EXPECT_TRUE(std::all_of(s.samples.begin(), s.samples.end(), [](double v) { return v == 0.0; }));
}

TEST(Ecg, ConstantRateSpacing) {
  const auto cfg = steady();
  const std::vector<double> rr(5, 1.0);
  const auto s = gen_ecg(rr, cfg);
  EXPECT_EQ(s.size(), 625u);
  const auto peaks = r_peak_indices(rr, cfg);
  for (std::size_t i = 1; i < peaks.size(); ++i) EXPECT_EQ(peaks[i] - peaks[i - 1], 125u);
}

TEST(Ecg, BeatArgmaxAtRPhase) {
  CardiacSimConfig cfg;
  const auto rr = gen_rr_series(cfg, 60, 21);
  const auto s = gen_ecg(rr, cfg);
  const auto starts = beat_starts(rr, cfg.fs);
  const auto truth = r_peak_indices(rr, cfg);
  for (std::size_t b = 0; b < rr.size(); ++b) {
    auto first = s.samples.begin() + static_cast<std::ptrdiff_t>(starts[b]);
    auto last = s.samples.begin() + static_cast<std::ptrdiff_t>(starts[b + 1]);
    const auto argmax = static_cast<std::size_t>(std::max_element(first, last) - s.samples.begin());
    EXPECT_LE(std::abs(static_cast<long>(argmax) - static_cast<long>(truth[b])), 2) << "beat " << b;
  }
}

TEST(Ppg, SystolicPeakAfterLag) {
  const auto cfg = steady();
  const std::vector<double> rr(3, 1.0);
  const auto s = gen_ppg(rr, cfg);
  for (std::size_t b = 0; b < 3; ++b) {
    auto first = s.samples.begin() + static_cast<std::ptrdiff_t>(b * 125);
    const auto offset = std::max_element(first, first + 125) - first;
    EXPECT_NEAR(static_cast<double>(offset), 31.0, 1.0);
  }
}

TEST(Ppg, ZeroAmplitudeGivesZeroSignal) {
  auto cfg = steady();
  cfg.ppg_pulse.amplitude = 0.0;
  const auto s = gen_ppg(std::vector<double>(3, 1.0), cfg);
  EXPECT_TRUE(std::all_of(s.samples.begin(), s.samples.end(), [](double v) { return v == 0.0; }));
}

TEST(Ppg, OneDominantMaximumPerBeat) {
  CardiacSimConfig cfg;
  const auto rr = gen_rr_series(cfg, 60, 8);
  const auto s = gen_ppg(rr, cfg);
  const auto starts = beat_starts(rr, cfg.fs);
  const double peak = *std::max_element(s.samples.begin(), s.samples.end());
  for (std::size_t b = 0; b < rr.size(); ++b) {
    int count = 0;
    for (std::size_t n = std::max<std::size_t>(starts[b], 1); n < starts[b + 1] && n + 1 < s.size(); ++n) {
      const double v = s.samples[n];
      if (v > s.samples[n - 1] && v >= s.samples[n + 1] && v > 0.5 * peak) ++count;
    }
    EXPECT_EQ(count, 1) << "beat " << b;
  }
}

TEST(Ppg, SameLengthAsEcg) {
  CardiacSimConfig cfg;
  const auto rr = gen_rr_series(cfg, 37, 2);
  EXPECT_EQ(gen_ppg(rr, cfg).size(), gen_ecg(rr, cfg).size());
}

TEST(Noise, ZeroConfigIsIdentity) {
  CardiacSimConfig cfg;
  const auto s = gen_ecg(gen_rr_series(cfg, 10, 1), cfg);
  EXPECT_EQ(add_noise(s, NoiseConfig{}, 9), s);
}

TEST(Noise, SingleSinusoidExact) {
  Signal zero{125.0, std::vector<double>(500, 0.0)};
  const auto out = add_noise(zero, NoiseConfig{{{0.5, 1.0}}, 0.0}, 1);
  for (std::size_t t = 0; t < out.size(); ++t) {
    const double time = static_cast<double>(t) / 125.0;
    EXPECT_EQ(out.samples[t], 0.5 * std::sin(2.0 * std::numbers::pi * 1.0 * time));
  }
}

TEST(Noise, GaussianVariance) {
  Signal zero{125.0, std::vector<double>(100000, 0.0)};
  const auto out = add_noise(zero, NoiseConfig{{}, 0.3}, 17);
  EXPECT_NEAR(sample_variance(out.samples), 0.09, 0.003);
}

TEST(Noise, StandardConfigEnergy) {
  CardiacSimConfig cfg;
  const auto rec = synthesize_record(cfg, 120.0, 4);
  const auto noisy = add_noise(rec.ppg, NoiseConfig::standard(), 4);
  double ms = 0.0;
  for (std::size_t t = 0; t < noisy.size(); ++t) {
    const double d = noisy.samples[t] - rec.ppg.samples[t];
    ms += d * d;
  }
  ms /= static_cast<double>(noisy.size());
  const double expected = 0.3 * 0.3 + 0.5 * (0.09 + 0.16 + 0.01);
  EXPECT_NEAR(ms, expected, 0.05 * expected);
}

TEST(Noise, RejectsInvalidConfig) {
  Signal s{125.0, {0.0, 1.0}};
  EXPECT_THROW(add_noise(s, NoiseConfig{{{0.1, 0.0}}, 0.0}, 1), ConfigError);
  EXPECT_THROW(add_noise(s, NoiseConfig{{{-0.1, 1.0}}, 0.0}, 1), ConfigError);
  EXPECT_THROW(add_noise(s, NoiseConfig{{}, -1.0}, 1), ConfigError);
}

TEST(Record, CoversDurationAndIsDeterministic) {
  CardiacSimConfig cfg;
  const auto a = synthesize_record(cfg, 30.0, 12);
  const auto b = synthesize_record(cfg, 30.0, 12);
  EXPECT_EQ(a.ppg.size(), 3750u);
  EXPECT_EQ(a.ecg.size(), 3750u);
  EXPECT_EQ(a.ppg, b.ppg);
  EXPECT_EQ(a.ecg, b.ecg);
  EXPECT_GE(std::accumulate(a.rr.begin(), a.rr.end(), 0.0), 30.0);
}

TEST(Io, CsvRoundTripIsBitExact) {
  const auto dir = temp_dir("io");
  CardiacSimConfig cfg;
  const auto rec = synthesize_record(cfg, 5.0, 3);
  const auto path = dir / "ppg.csv";
  write_signal(path, rec.ppg, {"ppg", 3, cfg, std::nullopt, std::nullopt});
  EXPECT_EQ(read_signal(path), rec.ppg);
  const auto side = nlohmann::json::parse(std::ifstream(sidecar_path(path)));
  EXPECT_EQ(side.at("cardiac_config").get<CardiacSimConfig>(), cfg);
  EXPECT_EQ(side.at("seed").get<std::uint64_t>(), 3u);
}

TEST(Io, FsInferredWithoutSidecar) {
  const auto dir = temp_dir("nosidecar");
  const Signal s{250.0, {0.0, 1.0, 2.0}};
  write_signal_csv(dir / "x.csv", s);
  const auto back = read_signal(dir / "x.csv");
  EXPECT_DOUBLE_EQ(back.fs, 250.0);
  EXPECT_EQ(back.samples, s.samples);
}

TEST(Io, MalformedCsvRejected) {
  const auto dir = temp_dir("bad");
  std::ofstream(dir / "bad.csv") << "time_s,value\n0,1\n0.008,abc\n";
  EXPECT_THROW(read_signal(dir / "bad.csv"), FormatError);
  std::ofstream(dir / "hdr.csv") << "t,v\n0,1\n";
  EXPECT_THROW(read_signal(dir / "hdr.csv"), FormatError);
}
