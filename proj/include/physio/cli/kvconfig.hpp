#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "physio/cardiosynth/io.hpp"
#include "physio/error.hpp"

namespace physio::cli {

/// Flat `key = value` text: one pair per line, `#` starts a comment, blank lines ignored.
struct KvEntry {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<KvEntry> parse_kv(std::string_view text, const std::string& where) {
  std::vector<KvEntry> out;
  std::map<std::string, std::size_t> seen;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string loc = where + ":" + std::to_string(line_no);
    if (eq == std::string_view::npos) throw ConfigError(loc + ": expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw ConfigError(loc + ": empty key");
    if (auto it = seen.find(key); it != seen.end()) {
      throw ConfigError(loc + ": duplicate key '" + key + "' (first set on line " + std::to_string(it->second) + ")");
    }
    seen.emplace(key, line_no);
    out.push_back({key, std::string(trim(line.substr(eq + 1))), line_no});
  }
  return out;
}

inline std::vector<KvEntry> load_kv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_kv(ss.str(), path.string());
}

// ---- typed values ------------------------------------------------------------

inline double kv_double(std::string_view v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || p != end) throw ConfigError("expected a number, got '" + std::string(v) + "'");
  return out;
}

inline std::uint64_t kv_uint(std::string_view v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || p != end) throw ConfigError("expected a non-negative integer, got '" + std::string(v) + "'");
  return out;
}

/// One configurable key of a typed config `T`.
template <class T>
struct KvField {
  std::string key;
  std::function<void(T&, std::string_view)> set;
  std::function<std::string(const T&)> get;
};

using DoubleCheck = std::function<void(double)>;

inline DoubleCheck positive() {
  return [](double v) {
    if (!(v > 0.0)) throw ConfigError("must be > 0");
  };
}

inline DoubleCheck nonnegative() {
  return [](double v) {
    if (!(v >= 0.0)) throw ConfigError("must be >= 0");
  };
}

inline DoubleCheck finite() {
  return [](double v) {
    if (!std::isfinite(v)) throw ConfigError("must be finite");
  };
}

template <class T, class M>
KvField<T> double_field(std::string key, M T::*member, DoubleCheck check = finite()) {
  return {std::move(key),
          [member, check](T& t, std::string_view v) {
            const double d = kv_double(v);
            check(d);
            t.*member = d;
          },
          [member](const T& t) { return synth::format_double(t.*member); }};
}

template <class T, class M>
KvField<T> uint_field(std::string key, M T::*member, std::uint64_t min = 0) {
  return {std::move(key),
          [member, min](T& t, std::string_view v) {
            const auto u = kv_uint(v);
            if (u < min) throw ConfigError("must be >= " + std::to_string(min));
            t.*member = static_cast<M>(u);
          },
          [member](const T& t) { return std::to_string(t.*member); }};
}

/// Applies `entries` over `cfg`, then runs `validate(cfg)` for cross-key rules.
/// Per-key errors name the file, line and key; unknown keys are rejected. Keys
/// listed in `first` are applied before all others regardless of position.
template <class T>
void apply_kv(T& cfg, const std::vector<KvField<T>>& schema, const std::vector<KvEntry>& entries,
              const std::string& where, const std::function<void(const T&)>& validate,
              const std::vector<std::string>& first = {}) {
  auto apply = [&](const KvEntry& e) {
    const std::string loc = where + ":" + std::to_string(e.line);
    for (const auto& f : schema) {
      if (f.key != e.key) continue;
      try {
        f.set(cfg, e.value);
      } catch (const Error& err) {
        throw ConfigError(loc + ": key '" + e.key + "': " + err.what());
      }
      return;
    }
    throw ConfigError(loc + ": unknown key '" + e.key + "'");
  };
  for (const auto& k : first)
    for (const auto& e : entries)
      if (e.key == k) apply(e);
  for (const auto& e : entries) {
    if (std::find(first.begin(), first.end(), e.key) == first.end()) apply(e);
  }
  try {
    validate(cfg);
  } catch (const Error& err) {
    throw ConfigError(where + ": " + err.what());
  }
}

/// Canonical text: every key of the schema in schema order.
template <class T>
std::string dump_kv(const T& cfg, const std::vector<KvField<T>>& schema) {
  std::string out;
  for (const auto& f : schema) out += f.key + " = " + f.get(cfg) + "\n";
  return out;
}

}  // namespace physio::cli
