#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <boost/crc.hpp>

#include "json.hpp"
#include "physio/adssm/config.hpp"
#include "physio/adssm/params.hpp"
#include "physio/numcore/adam.hpp"
#include "physio/trainkit/config.hpp"

namespace physio::trainkit {

static_assert(std::endian::native == std::endian::little, "checkpoint payload is stored little-endian");

/// Everything needed to continue training exactly where it stopped. Shuffling
/// and sampling streams are derived from (seed, epoch), so the epoch counter is
/// the whole random state.
struct TrainState {
  adssm::AdssmConfig model;
  TrainConfig train;
  num::ParamSet params;
  num::AdamState adam;
  std::size_t epoch = 0;  // completed epochs
  TrainHistory history;
};

inline constexpr char kCheckpointMagic[8] = {'P', 'H', 'Y', 'S', 'I', 'O', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout: magic[8] | u32 version | u64 header bytes | JSON header |
//         f64 params | f64 adam.m | f64 adam.v | u32 CRC-32 of all preceding bytes.

namespace detail {

template <class T>
void put(std::string& buf, T v) {
  char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  buf.append(b, sizeof(T));
}

inline void put_doubles(std::string& buf, const std::vector<double>& v) {
  buf.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
}

inline std::uint32_t crc32(const char* data, std::size_t n) {
  boost::crc_32_type crc;
  crc.process_bytes(data, n);
  return crc.checksum();
}

}  // namespace detail

inline std::string encode_checkpoint(const TrainState& s) {
  nlohmann::json tensors = nlohmann::json::array();
  for (std::size_t i = 0; i < s.params.count(); ++i) {
    tensors.push_back({{"name", s.params.name(i)}, {"shape", s.params.value(i).shape()}});
  }
  const bool has_moments = !s.adam.m.empty();
  const nlohmann::json header = {{"model", s.model},
                                 {"train", s.train},
                                 {"epoch", s.epoch},
                                 {"history", s.history},
                                 {"tensors", tensors},
                                 {"adam_step", s.adam.step},
                                 {"adam_moments", has_moments}};
  const std::string h = header.dump();
  std::string buf(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put(buf, kCheckpointVersion);
  detail::put(buf, static_cast<std::uint64_t>(h.size()));
  buf += h;
  detail::put_doubles(buf, s.params.flatten());
  if (has_moments) {
    detail::put_doubles(buf, s.adam.m);
    detail::put_doubles(buf, s.adam.v);
  }
  detail::put(buf, detail::crc32(buf.data(), buf.size()));
  return buf;
}

inline TrainState decode_checkpoint(const std::string& buf, const std::string& where) {
  auto fail = [&](const std::string& msg) { return FormatError(where + ": " + msg); };
  const std::size_t fixed = sizeof(kCheckpointMagic) + 4 + 8;
  if (buf.size() < fixed + 4) throw fail("file too short to be a checkpoint");
  if (std::memcmp(buf.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) throw fail("bad magic");
  std::uint32_t version = 0, stored_crc = 0;
  std::uint64_t hlen = 0;
  std::memcpy(&version, buf.data() + 8, 4);
  std::memcpy(&hlen, buf.data() + 12, 8);
  if (version != kCheckpointVersion) {
    throw fail("unsupported version " + std::to_string(version) + " (expected " +
               std::to_string(kCheckpointVersion) + ")");
  }
  std::memcpy(&stored_crc, buf.data() + buf.size() - 4, 4);
  if (detail::crc32(buf.data(), buf.size() - 4) != stored_crc) throw fail("checksum mismatch (truncated or corrupt)");
  if (hlen > buf.size() - fixed - 4) throw fail("header length exceeds file size");

  TrainState s;
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(buf.begin() + static_cast<std::ptrdiff_t>(fixed),
                                   buf.begin() + static_cast<std::ptrdiff_t>(fixed + hlen));
    s.model = header.at("model").get<adssm::AdssmConfig>();
    s.train = header.at("train").get<TrainConfig>();
    s.epoch = header.at("epoch").get<std::size_t>();
    s.history = header.at("history").get<TrainHistory>();
    s.adam.step = header.at("adam_step").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw fail(std::string("bad header: ") + e.what());
  }

  std::size_t total = 0;
  for (const auto& t : header.at("tensors")) {
    const auto shape = t.at("shape").get<num::Shape>();
    s.params.add(t.at("name").get<std::string>(), num::Tensor::zeros(shape));
    total += num::shape_size(shape);
  }
  const bool has_moments = header.at("adam_moments").get<bool>();
  const std::size_t n_doubles = total * (has_moments ? 3 : 1);
  if (buf.size() - fixed - hlen - 4 != n_doubles * sizeof(double)) throw fail("payload size does not match header");
  const char* p = buf.data() + fixed + hlen;
  auto take = [&](std::size_t n) {
    std::vector<double> v(n);
    std::memcpy(v.data(), p, n * sizeof(double));
    p += n * sizeof(double);
    return v;
  };
  s.params.assign_flat(take(total));
  if (has_moments) {
    s.adam.m = take(total);
    s.adam.v = take(total);
  }
  adssm::check_params(s.params, s.model);
  return s;
}

/// Writes to a temporary sibling and renames it into place.
inline void save_checkpoint(const std::filesystem::path& path, const TrainState& s) {
  const std::string buf = encode_checkpoint(s);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write checkpoint '" + tmp.string() + "'");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw FormatError("short write to '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline TrainState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint '" + path.string() + "'");
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(buf, path.string());
}

}  // namespace physio::trainkit
