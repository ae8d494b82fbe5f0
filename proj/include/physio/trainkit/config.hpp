#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "physio/cardiosynth/io.hpp"
#include "physio/error.hpp"
#include "physio/numcore/adam.hpp"

namespace physio::trainkit {

struct TrainConfig {
  std::size_t epochs = 5000;
  std::size_t batch = 128;
  double lr = 8e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::size_t anneal_end_epoch = 1250;
  double grad_clip_norm = 10.0;  // <= 0 disables clipping
  std::uint64_t seed = 0;

  static TrainConfig desk() {
    TrainConfig c;
    c.epochs = 200;
    c.batch = 32;
    c.anneal_end_epoch = 50;
    return c;
  }

  num::AdamConfig adam() const { return {lr, beta1, beta2, 1e-8}; }

  void validate() const {
    if (epochs < 1) throw ConfigError("train config: epochs must be >= 1");
    if (batch < 1) throw ConfigError("train config: batch must be >= 1");
    if (anneal_end_epoch > epochs) throw ConfigError("train config: anneal_end_epoch must not exceed epochs");
    if (!std::isfinite(grad_clip_norm)) throw ConfigError("train config: grad_clip_norm must be finite");
    adam().validate();
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Linear KL weight ramp from 0 at epoch 0 to 1 at anneal_end_epoch, then held.
inline double kl_anneal(std::size_t epoch, std::size_t anneal_end_epoch) {
  if (anneal_end_epoch == 0) return 1.0;
  return std::min(1.0, static_cast<double>(epoch) / static_cast<double>(anneal_end_epoch));
}

inline double kl_anneal(std::size_t epoch, const TrainConfig& cfg) { return kl_anneal(epoch, cfg.anneal_end_epoch); }

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based count of completed epochs
  double beta = 0.0;
  double train_elbo = 0.0;
  double val_elbo = 0.0;
  double wall_ms = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

using TrainHistory = std::vector<EpochRecord>;

inline void write_history_csv(const std::filesystem::path& path, const TrainHistory& h) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write history '" + path.string() + "'");
  out << "epoch,beta,train_elbo,val_elbo,wall_ms\n";
  for (const auto& r : h) {
    out << r.epoch << ',' << synth::format_double(r.beta) << ',' << synth::format_double(r.train_elbo) << ','
        << synth::format_double(r.val_elbo) << ',' << synth::format_double(r.wall_ms) << '\n';
  }
}

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"epochs", c.epochs},
       {"batch", c.batch},
       {"lr", c.lr},
       {"beta1", c.beta1},
       {"beta2", c.beta2},
       {"anneal_end_epoch", c.anneal_end_epoch},
       {"grad_clip_norm", c.grad_clip_norm},
       {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.epochs = j.at("epochs").get<std::size_t>();
  c.batch = j.at("batch").get<std::size_t>();
  c.lr = j.at("lr").get<double>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.anneal_end_epoch = j.at("anneal_end_epoch").get<std::size_t>();
  c.grad_clip_norm = j.at("grad_clip_norm").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.validate();
}

inline void to_json(nlohmann::json& j, const EpochRecord& r) {
  j = {{"epoch", r.epoch},
       {"beta", r.beta},
       {"train_elbo", r.train_elbo},
       {"val_elbo", r.val_elbo},
       {"wall_ms", r.wall_ms}};
}

inline void from_json(const nlohmann::json& j, EpochRecord& r) {
  r.epoch = j.at("epoch").get<std::size_t>();
  r.beta = j.at("beta").get<double>();
  r.train_elbo = j.at("train_elbo").get<double>();
  r.val_elbo = j.at("val_elbo").get<double>();
  r.wall_ms = j.at("wall_ms").get<double>();
}

}  // namespace physio::trainkit
