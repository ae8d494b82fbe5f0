#pragma once

#include <string>
#include <vector>

#include "physio/adssm/config.hpp"
#include "physio/cardiosynth/config.hpp"
#include "physio/cli/kvconfig.hpp"
#include "physio/pipeline.hpp"
#include "physio/preprocess/pairing.hpp"
#include "physio/trainkit/config.hpp"

// Typed configs behind each subcommand's --config file. Every key is optional;
// the defaults are the values printed by `physio <command> --print-config`.
namespace physio::cli {

// ---- synth -------------------------------------------------------------------

struct SynthOptions {
  std::size_t records = 50;
  double duration_s = 160.0;
  synth::CardiacSimConfig cardiac;

  void validate() const {
    if (records < 1) throw ConfigError("records must be >= 1");
    if (!(duration_s > 0.0)) throw ConfigError("duration_s must be > 0");
    cardiac.validate();
  }
};

template <class F>
KvField<SynthOptions> cardiac_field(std::string key, F ref, DoubleCheck check = finite()) {
  return {std::move(key),
          [ref, check](SynthOptions& o, std::string_view v) {
            const double d = kv_double(v);
            check(d);
            ref(o.cardiac) = d;
          },
          [ref](const SynthOptions& o) { return synth::format_double(ref(o.cardiac)); }};
}

inline const std::vector<KvField<SynthOptions>>& synth_schema() {
  static const std::vector<KvField<SynthOptions>> s = {
      uint_field("records", &SynthOptions::records, 1),
      double_field("duration_s", &SynthOptions::duration_s, positive()),
      cardiac_field("fs", [](auto& c) -> auto& { return c.fs; }, positive()),
      cardiac_field("mean_rr", [](auto& c) -> auto& { return c.mean_rr; }, positive()),
      cardiac_field("rr_std", [](auto& c) -> auto& { return c.rr_std; }, nonnegative()),
      cardiac_field("hrv_amplitude", [](auto& c) -> auto& { return c.hrv_mod.amplitude; }, nonnegative()),
      cardiac_field("hrv_frequency", [](auto& c) -> auto& { return c.hrv_mod.frequency; }, nonnegative()),
      cardiac_field("ppg_amplitude", [](auto& c) -> auto& { return c.ppg_pulse.amplitude; }),
      cardiac_field("ppg_lag", [](auto& c) -> auto& { return c.ppg_pulse.lag; }, nonnegative()),
      cardiac_field("ppg_rise", [](auto& c) -> auto& { return c.ppg_pulse.rise; }, positive()),
      cardiac_field("ppg_decay", [](auto& c) -> auto& { return c.ppg_pulse.decay; }, positive()),
  };
  return s;
}

// ---- prep --------------------------------------------------------------------

struct PrepOptions {
  prep::PrepConfig prep;
  synth::NoiseConfig noise = synth::NoiseConfig::standard();

  void validate() const {
    prep.validate();
    noise.validate();
  }
};

/// Baseline wander as "amplitude@frequency" terms separated by commas; "none" for no terms.
inline std::string format_baseline(const std::vector<synth::Sinusoid>& b) {
  if (b.empty()) return "none";
  std::string out;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (i) out += ",";
    out += synth::format_double(b[i].amplitude) + "@" + synth::format_double(b[i].frequency);
  }
  return out;
}

inline std::vector<synth::Sinusoid> parse_baseline(std::string_view v) {
  std::vector<synth::Sinusoid> out;
  if (v == "none") return out;
  while (!v.empty()) {
    const auto comma = v.find(',');
    const auto term = trim(v.substr(0, comma));
    v = comma == std::string_view::npos ? std::string_view{} : v.substr(comma + 1);
    const auto at = term.find('@');
    if (at == std::string_view::npos) throw ConfigError("baseline term '" + std::string(term) + "' is not amplitude@frequency");
    out.push_back({kv_double(trim(term.substr(0, at))), kv_double(trim(term.substr(at + 1)))});
  }
  synth::NoiseConfig{out, 0.0}.validate();
  return out;
}

template <class F>
KvField<PrepOptions> prep_field(std::string key, F ref, DoubleCheck check) {
  return {std::move(key),
          [ref, check](PrepOptions& o, std::string_view v) {
            const double d = kv_double(v);
            check(d);
            ref(o) = d;
          },
          [ref](const PrepOptions& o) { return synth::format_double(ref(o)); }};
}

inline const std::vector<KvField<PrepOptions>>& prep_schema() {
  static const std::vector<KvField<PrepOptions>> s = {
      prep_field("chunk_s", [](auto& o) -> auto& { return o.prep.chunk_s; }, positive()),
      {"min_steps",
       [](PrepOptions& o, std::string_view v) {
         const auto u = kv_uint(v);
         if (u < 1) throw ConfigError("must be >= 1");
         o.prep.min_steps = u;
       },
       [](const PrepOptions& o) { return std::to_string(o.prep.min_steps); }},
      prep_field("ppg_window_s", [](auto& o) -> auto& { return o.prep.ppg_peaks.window_s; }, positive()),
      prep_field("ppg_k", [](auto& o) -> auto& { return o.prep.ppg_peaks.k; }, positive()),
      prep_field("ppg_refractory_s", [](auto& o) -> auto& { return o.prep.ppg_peaks.refractory_s; }, positive()),
      prep_field("ecg_window_s", [](auto& o) -> auto& { return o.prep.ecg_peaks.window_s; }, positive()),
      prep_field("ecg_k", [](auto& o) -> auto& { return o.prep.ecg_peaks.k; }, positive()),
      prep_field("ecg_refractory_s", [](auto& o) -> auto& { return o.prep.ecg_peaks.refractory_s; }, positive()),
      prep_field("noise_std", [](auto& o) -> auto& { return o.noise.gaussian_std; }, nonnegative()),
      {"noise_baseline", [](PrepOptions& o, std::string_view v) { o.noise.baseline = parse_baseline(v); },
       [](const PrepOptions& o) { return format_baseline(o.noise.baseline); }},
  };
  return s;
}

// ---- train -------------------------------------------------------------------

struct TrainOptions {
  trainkit::TrainConfig train;
  adssm::AdssmConfig model;
  std::size_t checkpoint_every = 10;  // epochs between checkpoint writes; 0 writes only the final one
  std::string preset = "paper";

  void validate() const {
    train.validate();
    model.validate();
  }

  void apply_preset(const std::string& name) {
    if (name == "paper") {
      train = trainkit::TrainConfig{};
      model = adssm::AdssmConfig{};
    } else if (name == "desk") {
      train = trainkit::TrainConfig::desk();
      model = adssm::AdssmConfig::desk();
    } else {
      throw ConfigError("preset must be 'paper' or 'desk', got '" + name + "'");
    }
    preset = name;
  }
};

template <class F>
KvField<TrainOptions> train_double(std::string key, F ref, DoubleCheck check) {
  return {std::move(key),
          [ref, check](TrainOptions& o, std::string_view v) {
            const double d = kv_double(v);
            check(d);
            ref(o) = d;
          },
          [ref](const TrainOptions& o) { return synth::format_double(ref(o)); }};
}

template <class F>
KvField<TrainOptions> train_uint(std::string key, F ref, std::uint64_t min) {
  return {std::move(key),
          [ref, min](TrainOptions& o, std::string_view v) {
            const auto u = kv_uint(v);
            if (u < min) throw ConfigError("must be >= " + std::to_string(min));
            ref(o) = static_cast<std::remove_cvref_t<decltype(ref(o))>>(u);
          },
          [ref](const TrainOptions& o) { return std::to_string(ref(o)); }};
}

inline DoubleCheck unit_interval() {
  return [](double v) {
    if (!(v >= 0.0 && v < 1.0)) throw ConfigError("must lie in [0, 1)");
  };
}

inline const std::vector<KvField<TrainOptions>>& train_schema() {
  using T = TrainOptions;
  static const std::vector<KvField<TrainOptions>> s = {
      {"preset", [](T& o, std::string_view v) { o.apply_preset(std::string(v)); },
       [](const T& o) { return o.preset; }},
      train_uint("epochs", [](auto& o) -> auto& { return o.train.epochs; }, 1),
      train_uint("batch", [](auto& o) -> auto& { return o.train.batch; }, 1),
      train_double("lr", [](auto& o) -> auto& { return o.train.lr; }, nonnegative()),
      train_double("beta1", [](auto& o) -> auto& { return o.train.beta1; }, unit_interval()),
      train_double("beta2", [](auto& o) -> auto& { return o.train.beta2; }, unit_interval()),
      train_uint("anneal_end_epoch", [](auto& o) -> auto& { return o.train.anneal_end_epoch; }, 0),
      train_double("grad_clip_norm", [](auto& o) -> auto& { return o.train.grad_clip_norm; }, finite()),
      train_uint("seed", [](auto& o) -> auto& { return o.train.seed; }, 0),
      train_uint("hidden", [](auto& o) -> auto& { return o.model.hidden; }, 1),
      train_uint("latent", [](auto& o) -> auto& { return o.model.latent; }, 1),
      {"window", [](T& o, std::string_view v) { o.model.window = adssm::window_from_string(std::string(v)); },
       [](const T& o) { return adssm::to_string(o.model.window); }},
      train_uint("checkpoint_every", [](auto& o) -> auto& { return o.checkpoint_every; }, 0),
  };
  return s;
}

// ---- loading -------------------------------------------------------------------

inline SynthOptions parse_synth(const std::vector<KvEntry>& e, const std::string& where) {
  SynthOptions o;
  apply_kv<SynthOptions>(o, synth_schema(), e, where, [](const SynthOptions& x) { x.validate(); });
  return o;
}

inline PrepOptions parse_prep(const std::vector<KvEntry>& e, const std::string& where) {
  PrepOptions o;
  apply_kv<PrepOptions>(o, prep_schema(), e, where, [](const PrepOptions& x) { x.validate(); });
  return o;
}

inline TrainOptions parse_train(const std::vector<KvEntry>& e, const std::string& where) {
  TrainOptions o;
  apply_kv<TrainOptions>(o, train_schema(), e, where, [](const TrainOptions& x) { x.validate(); }, {"preset"});
  return o;
}

/// Reads `path` when given, else returns defaults.
template <class T>
T load_options(const std::string& path, T (*parse)(const std::vector<KvEntry>&, const std::string&)) {
  return path.empty() ? parse({}, "<defaults>") : parse(load_kv(path), path);
}

}  // namespace physio::cli
