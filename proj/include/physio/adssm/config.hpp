#pragma once

#include <string>

#include "json.hpp"
#include "physio/error.hpp"

namespace physio::adssm {

/// Which observations the posterior at step t (producing z_{t+1}, which emits y_t
/// in 0-based segment indexing) conditions on besides z_t.
enum class PosteriorWindow {
  future,     // y_t .. y_{T-1}: the segment z_{t+1} emits and everything after it
  inclusive,  // additionally the preceding segment y_{t-1} when it exists
};

struct AdssmConfig {
  std::size_t seg_len = 90;
  std::size_t hidden = 256;
  std::size_t latent = 128;
  PosteriorWindow window = PosteriorWindow::future;

  static AdssmConfig desk() { return {90, 64, 32, PosteriorWindow::future}; }

  void validate() const {
    if (seg_len < 1 || hidden < 1 || latent < 1) throw ConfigError("adssm config: all sizes must be >= 1");
  }

  friend bool operator==(const AdssmConfig&, const AdssmConfig&) = default;
};

inline std::string to_string(PosteriorWindow w) { return w == PosteriorWindow::future ? "future" : "inclusive"; }

inline PosteriorWindow window_from_string(const std::string& s) {
  if (s == "future") return PosteriorWindow::future;
  if (s == "inclusive") return PosteriorWindow::inclusive;
  throw ConfigError("adssm config: posterior window must be 'future' or 'inclusive', got '" + s + "'");
}

inline void to_json(nlohmann::json& j, const AdssmConfig& c) {
  j = {{"seg_len", c.seg_len}, {"hidden", c.hidden}, {"latent", c.latent}, {"window", to_string(c.window)}};
}

inline void from_json(const nlohmann::json& j, AdssmConfig& c) {
  c.seg_len = j.at("seg_len").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::size_t>();
  c.latent = j.at("latent").get<std::size_t>();
  c.window = window_from_string(j.at("window").get<std::string>());
  c.validate();
}

}  // namespace physio::adssm
