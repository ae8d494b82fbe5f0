#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <boost/crc.hpp>

#include "json.hpp"
#include "physio/cardiosynth/io.hpp"
#include "physio/pipeline.hpp"

namespace physio::cli {

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + p.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + p.string() + "'");
  out << text;
  if (!out) throw FormatError("short write to '" + p.string() + "'");
}

inline std::uint32_t file_crc32(const std::filesystem::path& p) {
  const auto s = read_file(p);
  boost::crc_32_type crc;
  crc.process_bytes(s.data(), s.size());
  return crc.checksum();
}

// ---- chunk-pair file -------------------------------------------------------------

/// One chunk pair with the split its record belongs to.
struct ChunkRecord {
  prep::ChunkPair pair;
  pipeline::Split split = pipeline::Split::train;
};

inline std::string to_string(pipeline::Split s) {
  return s == pipeline::Split::train ? "train" : (s == pipeline::Split::val ? "val" : "test");
}

inline pipeline::Split split_from_string(const std::string& s) {
  if (s == "train") return pipeline::Split::train;
  if (s == "val") return pipeline::Split::val;
  if (s == "test") return pipeline::Split::test;
  throw FormatError("split must be train, val or test, got '" + s + "'");
}

inline nlohmann::json chunk_to_json(const ChunkRecord& r) {
  const auto& c = r.pair;
  nlohmann::json iv = nlohmann::json::array();
  for (const auto& p : c.intervals) iv.push_back({p.ppg.first, p.ppg.second, p.ecg.first, p.ecg.second});
  return {{"record", c.record}, {"chunk", c.chunk}, {"split", to_string(r.split)}, {"intervals", iv},
          {"ppg", c.ppg.samples}, {"ecg", c.ecg.samples},   {"x", c.x},          {"y", c.y}};
}

inline ChunkRecord chunk_from_json(const nlohmann::json& j, double fs) {
  ChunkRecord r;
  auto& c = r.pair;
  c.record = j.at("record").get<std::size_t>();
  c.chunk = j.at("chunk").get<std::size_t>();
  r.split = split_from_string(j.at("split").get<std::string>());
  c.ppg = {fs, j.at("ppg").get<std::vector<double>>()};
  c.ecg = {fs, j.at("ecg").get<std::vector<double>>()};
  const std::string id = "chunk " + std::to_string(c.record) + "/" + std::to_string(c.chunk);
  for (const auto& v : j.at("intervals")) {
    const auto a = v.get<std::vector<std::size_t>>();
    if (a.size() != 4 || a[0] >= a[1] || a[2] >= a[3] || a[1] > c.ppg.size() || a[3] > c.ecg.size()) {
      throw FormatError(id + ": bad interval");
    }
    c.intervals.push_back({{a[0], a[1]}, {a[2], a[3]}});
  }
  c.x = j.at("x").get<prep::SegmentSequence>();
  c.y = j.at("y").get<prep::SegmentSequence>();
  c.x.validate();
  c.y.validate();
  if (c.x.steps() != c.intervals.size() || c.y.steps() != c.intervals.size()) {
    throw FormatError(id + ": segment count does not match the interval count");
  }
  return r;
}

struct ChunkFile {
  double fs = 125.0;
  bool noisy = false;
  std::vector<ChunkRecord> chunks;
};

inline void write_chunk_file(const std::filesystem::path& p, const ChunkFile& f) {
  nlohmann::json chunks = nlohmann::json::array();
  for (const auto& c : f.chunks) chunks.push_back(chunk_to_json(c));
  write_file(p, nlohmann::json{{"format", "physio-chunks"}, {"version", 1}, {"fs", f.fs}, {"noisy", f.noisy},
                               {"chunks", chunks}}
                        .dump() +
                    "\n");
}

inline ChunkFile read_chunk_file(const std::filesystem::path& p) {
  ChunkFile f;
  try {
    const auto j = nlohmann::json::parse(read_file(p));
    if (j.at("format") != "physio-chunks" || j.at("version") != 1) throw FormatError("not a version-1 chunk file");
    f.fs = j.at("fs").get<double>();
    f.noisy = j.at("noisy").get<bool>();
    for (const auto& c : j.at("chunks")) f.chunks.push_back(chunk_from_json(c, f.fs));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(p.string() + ": " + e.what());
  } catch (const Error& e) {
    throw FormatError(p.string() + ": " + e.what());
  }
  return f;
}

inline std::vector<prep::ChunkPair> select(const ChunkFile& f, const std::string& split) {
  std::vector<prep::ChunkPair> out;
  for (const auto& c : f.chunks) {
    if (split == "all" || to_string(c.split) == split) out.push_back(c.pair);
  }
  return out;
}

// ---- per-chunk series CSV ------------------------------------------------------------

/// Series keyed by (record, chunk), in file order.
using SeriesKey = std::pair<std::size_t, std::size_t>;
using SeriesSet = std::vector<std::pair<SeriesKey, std::vector<double>>>;

/// "record,chunk,t,value": one row per sample.
inline void write_series_csv(const std::filesystem::path& p, const SeriesSet& s) {
  std::string out = "record,chunk,t,value\n";
  for (const auto& [key, v] : s) {
    for (std::size_t t = 0; t < v.size(); ++t) {
      out += std::to_string(key.first) + ',' + std::to_string(key.second) + ',' + std::to_string(t) + ',' +
             synth::format_double(v[t]) + '\n';
    }
  }
  write_file(p, out);
}

/// Reads a series CSV, or a "time_s,value" signal CSV as a single series (0, 0).
inline SeriesSet read_series_csv(const std::filesystem::path& p) {
  std::istringstream in(read_file(p));
  std::string line;
  if (!std::getline(in, line)) throw FormatError(p.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line == "time_s,value") return {{{0, 0}, synth::read_signal(p).samples}};
  if (line != "record,chunk,t,value") {
    throw FormatError(p.string() + ": expected header 'record,chunk,t,value' or 'time_s,value', got '" + line + "'");
  }
  SeriesSet out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = p.string() + ":" + std::to_string(lineno);
    std::vector<std::string_view> cols;
    std::string_view sv(line);
    for (std::size_t pos; (pos = sv.find(',')) != std::string_view::npos; sv = sv.substr(pos + 1)) cols.push_back(sv.substr(0, pos));
    cols.push_back(sv);
    if (cols.size() != 4) throw FormatError(where + ": expected 4 columns");
    auto as_index = [&](std::string_view c) {
      std::size_t v = 0;
      const auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
      if (ec != std::errc{} || ptr != c.data() + c.size()) throw FormatError(where + ": bad integer '" + std::string(c) + "'");
      return v;
    };
    const SeriesKey key{as_index(cols[0]), as_index(cols[1])};
    const std::size_t t = as_index(cols[2]);
    if (out.empty() || out.back().first != key) {
      for (const auto& e : out)
        if (e.first == key) throw FormatError(where + ": series rows are not contiguous");
      out.push_back({key, {}});
    }
    if (t != out.back().second.size()) throw FormatError(where + ": sample index out of order");
    out.back().second.push_back(synth::parse_double(cols[3], where));
  }
  return out;
}

// ---- plot data ----------------------------------------------------------------------

/// Long-format "series,x,y" rows.
class PlotData {
 public:
  void add(const std::string& series, double x, double y) { rows_.push_back({series, x, y}); }
  bool empty() const { return rows_.empty(); }

  void write(const std::filesystem::path& p) const {
    if (rows_.empty()) throw ConfigError("plot data '" + p.string() + "' has no rows");
    std::string out = "series,x,y\n";
    for (const auto& r : rows_) out += r.series + ',' + synth::format_double(r.x) + ',' + synth::format_double(r.y) + '\n';
    write_file(p, out);
  }

 private:
  struct Row {
    std::string series;
    double x, y;
  };
  std::vector<Row> rows_;
};

inline PlotData history_plot(const trainkit::TrainHistory& h) {
  PlotData d;
  for (const auto& r : h) d.add("train_elbo", static_cast<double>(r.epoch), r.train_elbo);
  for (const auto& r : h) d.add("val_elbo", static_cast<double>(r.epoch), r.val_elbo);
  for (const auto& r : h) d.add("beta", static_cast<double>(r.epoch), r.beta);
  return d;
}

inline PlotData report_plot(const metrics::MetricReport& rep) {
  PlotData d;
  for (const auto& name : rep.names()) {
    const auto& v = rep.values(name);
    for (std::size_t i = 0; i < v.size(); ++i) d.add(name, static_cast<double>(i), v[i]);
  }
  return d;
}

/// Reference, translated mean and translated spread of one chunk, by sample index.
inline PlotData overlay_plot(std::span<const double> reference, std::span<const double> mean,
                             std::span<const double> spread) {
  PlotData d;
  for (std::size_t t = 0; t < reference.size(); ++t) d.add("reference", static_cast<double>(t), reference[t]);
  for (std::size_t t = 0; t < mean.size(); ++t) d.add("translated-mean", static_cast<double>(t), mean[t]);
  for (std::size_t t = 0; t < spread.size(); ++t) d.add("translated-spread", static_cast<double>(t), spread[t]);
  return d;
}

}  // namespace physio::cli
