#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace physio::num {

using Rng = std::mt19937_64;

constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// splitmix64 finaliser; decorrelates nearby integers.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of the independent stream identified by (master seed, purpose, index).
///
/// Every consumer (data synthesis, init, sampling, shuffling, ...) draws from
/// its own stream, so adding or reordering draws in one consumer leaves the
/// others untouched.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose,
                                    std::uint64_t index = 0) {
  return mix64(mix64(seed ^ fnv1a(purpose)) + mix64(index + 0x632be59bd9b4e019ULL));
}

inline Rng make_stream(std::uint64_t seed, std::string_view purpose, std::uint64_t index = 0) {
  return Rng(derive_seed(seed, purpose, index));
}

inline std::vector<double> standard_normal(Rng& rng, std::size_t n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> out(n);
  for (auto& v : out) v = normal(rng);
  return out;
}

}  // namespace physio::num
