#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>

#include "json.hpp"
#include "physio/cardiosynth/config.hpp"
#include "physio/signal.hpp"

namespace physio::synth {

/// Shortest decimal string that parses back to exactly `v`.
inline std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw FormatError("format_double: conversion failed");
  return std::string(buf, end);
}

inline double parse_double(std::string_view s, const std::string& where) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  while (first < last && (*first == ' ' || *first == '\t')) ++first;
  while (last > first && (last[-1] == ' ' || last[-1] == '\t' || last[-1] == '\r')) --last;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) throw FormatError(where + ": cannot parse number '" + std::string(s) + "'");
  return v;
}

/// Sidecar path for a signal CSV: "x.csv" -> "x.json".
inline std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
  auto p = csv;
  p.replace_extension(".json");
  return p;
}

/// Provenance written next to a signal CSV.
struct SignalMeta {
  std::string kind;  // "ppg" / "ecg" / free-form
  std::uint64_t seed = 0;
  std::optional<CardiacSimConfig> cardiac;
  std::optional<NoiseConfig> noise;
  std::optional<std::uint64_t> noise_seed;
};

inline void write_signal_csv(const std::filesystem::path& path, const Signal& s) {
  s.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "time_s,value\n";
  for (std::size_t n = 0; n < s.samples.size(); ++n) {
    out << format_double(static_cast<double>(n) / s.fs) << ',' << format_double(s.samples[n]) << '\n';
  }
  if (!out) throw Error("write failed: " + path.string());
}

inline void write_signal(const std::filesystem::path& csv, const Signal& s, const SignalMeta& meta) {
  write_signal_csv(csv, s);
  nlohmann::json j{{"fs", s.fs}, {"n_samples", s.size()}, {"kind", meta.kind}, {"seed", meta.seed}};
  if (meta.cardiac) j["cardiac_config"] = *meta.cardiac;
  if (meta.noise) j["noise_config"] = *meta.noise;
  if (meta.noise_seed) j["noise_seed"] = *meta.noise_seed;
  std::ofstream out(sidecar_path(csv), std::ios::binary);
  if (!out) throw Error("cannot open " + sidecar_path(csv).string() + " for writing");
  out << j.dump(2) << '\n';
}

/// Reads a time_s,value CSV. fs comes from the sidecar JSON when present,
/// otherwise from the first time step.
inline Signal read_signal(const std::filesystem::path& csv) {
  std::ifstream in(csv, std::ios::binary);
  if (!in) throw Error("cannot open " + csv.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(csv.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "time_s,value") throw FormatError(csv.string() + ": expected header 'time_s,value', got '" + line + "'");
  std::vector<double> times;
  Signal s;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto comma = line.find(',');
    const std::string where = csv.string() + ":" + std::to_string(lineno);
    if (comma == std::string::npos) throw FormatError(where + ": expected two columns");
    std::string_view sv(line);
    times.push_back(parse_double(sv.substr(0, comma), where));
    s.samples.push_back(parse_double(sv.substr(comma + 1), where));
  }
  const auto side = sidecar_path(csv);
  if (std::filesystem::exists(side)) {
    std::ifstream js(side);
    try {
      s.fs = nlohmann::json::parse(js).at("fs").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(side.string() + ": " + e.what());
    }
  } else if (times.size() >= 2 && times[1] > times[0]) {
    s.fs = 1.0 / (times[1] - times[0]);
  } else {
    throw FormatError(csv.string() + ": cannot determine sampling rate (no sidecar, fewer than 2 samples)");
  }
  s.validate();
  return s;
}

}  // namespace physio::synth
