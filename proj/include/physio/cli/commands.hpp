#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "physio/cli/files.hpp"
#include "physio/cli/options.hpp"
#include "physio/ddm/fit.hpp"
#include "physio/ddm/io.hpp"
#include "physio/trainkit/checkpoint.hpp"

namespace physio::cli {

inline constexpr const char* kVersion = "1.0.0";

namespace fs = std::filesystem;

inline std::string fnv1a_hex(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Run record written next to the outputs. Files are named relative to their
/// directory so reruns elsewhere produce the same bytes.
class Manifest {
 public:
  Manifest(std::string command, std::string config_text, std::optional<std::uint64_t> seed)
      : command_(std::move(command)), config_(std::move(config_text)), seed_(seed) {}

  void input(const fs::path& p) { inputs_.push_back(p); }
  void output(const fs::path& p) { outputs_.push_back(p); }

  void write(const fs::path& out_dir) const {
    auto entry = [](const fs::path& p, const std::string& key) {
      return nlohmann::json{{key, p.filename().string()}, {"bytes", fs::file_size(p)}, {"crc32", file_crc32(p)}};
    };
    nlohmann::json in = nlohmann::json::array(), out = nlohmann::json::array();
    for (const auto& p : inputs_) in.push_back(entry(p, "name"));
    for (const auto& p : outputs_) out.push_back(entry(p, "file"));
    const nlohmann::json j{{"command", command_},
                           {"config", config_},
                           {"config_hash", fnv1a_hex(config_)},
                           {"seed", seed_ ? nlohmann::json(*seed_) : nlohmann::json(nullptr)},
                           {"versions", {{"physio", kVersion}, {"checkpoint", trainkit::kCheckpointVersion}}},
                           {"inputs", in},
                           {"outputs", out}};
    write_file(out_dir / "manifest.json", j.dump(2) + "\n");
  }

 private:
  std::string command_, config_;
  std::optional<std::uint64_t> seed_;
  std::vector<fs::path> inputs_, outputs_;
};

inline fs::path make_out_dir(const std::string& out) {
  const fs::path p(out);
  fs::create_directories(p);
  return p;
}

inline std::string record_name(std::size_t r, const std::string& kind) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "record_%03zu_%s.csv", r, kind.c_str());
  return buf;
}

// ---- synth ---------------------------------------------------------------------

struct SynthArgs {
  std::string config, out;
  std::uint64_t seed = 0;
};

inline void cmd_synth(const SynthArgs& a) {
  const auto opt = load_options(a.config, parse_synth);
  const auto dir = make_out_dir(a.out);
  Manifest m("synth", dump_kv(opt, synth_schema()), a.seed);
  if (!a.config.empty()) m.input(a.config);
  for (std::size_t r = 0; r < opt.records; ++r) {
    const auto seed = num::derive_seed(a.seed, "corpus.record", r);
    const auto rec = synth::synthesize_record(opt.cardiac, opt.duration_s, seed);
    for (const auto& [kind, sig] : {std::pair{"ppg", &rec.ppg}, std::pair{"ecg", &rec.ecg}}) {
      const auto csv = dir / record_name(r, kind);
      synth::write_signal(csv, *sig, {kind, seed, opt.cardiac, std::nullopt, std::nullopt});
      m.output(csv);
      m.output(synth::sidecar_path(csv));
    }
  }
  m.write(dir);
  std::cout << "synth: " << opt.records << " records written to " << a.out << "\n";
}

// ---- prep ----------------------------------------------------------------------

struct PrepArgs {
  std::string in, out, config;
  std::uint64_t seed = 0;
  bool noise = false;
};

inline void cmd_prep(const PrepArgs& a) {
  const auto opt = load_options(a.config, parse_prep);
  if (!fs::is_directory(a.in)) throw ConfigError("prep: input directory '" + a.in + "' does not exist");
  const std::regex name_re(R"(record_(\d+)_ppg\.csv)");
  std::vector<std::pair<std::size_t, fs::path>> records;
  for (const auto& e : fs::directory_iterator(a.in)) {
    std::smatch mt;
    const auto name = e.path().filename().string();
    if (std::regex_match(name, mt, name_re)) records.push_back({std::stoul(mt[1].str()), e.path()});
  }
  if (records.empty()) throw ConfigError("prep: no record_NNN_ppg.csv files in '" + a.in + "'");
  std::sort(records.begin(), records.end());

  std::string cfg_text = dump_kv(opt, prep_schema()) + "noise = " + (a.noise ? "true" : "false") + "\n";
  Manifest m("prep", cfg_text, a.seed);
  ChunkFile file;
  file.noisy = a.noise;
  const std::size_t n_records = records.back().first + 1;
  const auto split = pipeline::split_records(n_records, a.seed);
  for (const auto& [r, ppg_path] : records) {
    const auto ecg_path = ppg_path.parent_path() / record_name(r, "ecg");
    const auto ppg = synth::read_signal(ppg_path);
    const auto ecg = synth::read_signal(ecg_path);
    m.input(ppg_path);
    m.input(ecg_path);
    file.fs = ppg.fs;
    for (auto& c : prep::make_chunk_pairs(ppg, ecg, opt.prep, r)) {
      if (a.noise) {
        c.ppg = synth::add_noise(c.ppg, opt.noise, num::derive_seed(a.seed, "eval.noise", c.record * 100003 + c.chunk));
        c.x = prep::resegment_ppg(c, c.ppg);
      }
      file.chunks.push_back({std::move(c), split[r]});
    }
  }
  const auto dir = make_out_dir(a.out);
  write_chunk_file(dir / "pairs.json", file);
  m.output(dir / "pairs.json");
  m.write(dir);
  std::size_t counts[3] = {0, 0, 0};
  for (const auto& c : file.chunks) ++counts[static_cast<int>(c.split)];
  std::cout << "prep: " << file.chunks.size() << " chunks (train " << counts[0] << ", val " << counts[1] << ", test "
            << counts[2] << ")\n";
}

// ---- train ---------------------------------------------------------------------

struct TrainArgs {
  std::string data, config, out, resume;
  bool timing = false;
  std::size_t threads = 1;
};

inline trainkit::Dataset to_dataset(const ChunkFile& f) {
  trainkit::Dataset d;
  for (const auto& c : f.chunks) {
    if (c.split == pipeline::Split::train) d.train.push_back(pipeline::to_example(c.pair));
    if (c.split == pipeline::Split::val) d.val.push_back(pipeline::to_example(c.pair));
  }
  return d;
}

/// A resumed run must keep every setting except the epoch budget.
inline void check_resumable(const trainkit::TrainState& s, const TrainOptions& opt) {
  if (!(s.model == opt.model)) throw ConfigError("train --resume: model settings differ from the checkpoint");
  auto t = opt.train;
  t.epochs = s.train.epochs;
  if (!(t == s.train)) throw ConfigError("train --resume: training settings other than epochs differ from the checkpoint");
  if (opt.train.epochs < s.epoch) {
    throw ConfigError("train --resume: epochs " + std::to_string(opt.train.epochs) + " is below the checkpoint epoch " +
                      std::to_string(s.epoch));
  }
}

inline void cmd_train(const TrainArgs& a) {
  const auto opt = load_options(a.config, parse_train);
  const auto data = read_chunk_file(a.data);
  const auto ds = to_dataset(data);
  Manifest m("train", dump_kv(opt, train_schema()), opt.train.seed);
  if (!a.config.empty()) m.input(a.config);
  m.input(a.data);

  trainkit::TrainState state;
  if (!a.resume.empty()) {
    state = trainkit::load_checkpoint(a.resume);
    check_resumable(state, opt);
    state.train.epochs = opt.train.epochs;
    m.input(a.resume);
  } else {
    state = trainkit::fresh_state(opt.model, opt.train);
  }

  const auto dir = make_out_dir(a.out);
  const auto ckpt = dir / "model.ckpt";
  trainkit::RunOptions run{a.threads, a.timing, {}};
  run.on_epoch = [&](const trainkit::TrainState& s) {
    const auto& r = s.history.back();
    std::printf("epoch %zu/%zu  beta %.3f  train_elbo %.3f  val_elbo %.3f\n", r.epoch, s.train.epochs, r.beta,
                r.train_elbo, r.val_elbo);
    std::fflush(stdout);
    if (opt.checkpoint_every && s.epoch % opt.checkpoint_every == 0) trainkit::save_checkpoint(ckpt, s);
  };
  trainkit::train(ds, state, run);
  trainkit::save_checkpoint(ckpt, state);
  trainkit::write_history_csv(dir / "history.csv", state.history);
  history_plot(state.history).write(dir / "plot_history.csv");
  for (const char* f : {"model.ckpt", "history.csv", "plot_history.csv"}) m.output(dir / f);
  m.write(dir);
}

// ---- translate -----------------------------------------------------------------

struct TranslateArgs {
  std::string model, in, out, mode = "mean", split = "test";
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

inline void cmd_translate(const TranslateArgs& a) {
  const auto state = trainkit::load_checkpoint(a.model);
  const auto data = read_chunk_file(a.in);
  const auto chunks = select(data, a.split);
  if (chunks.empty()) throw ConfigError("translate: no chunks in split '" + a.split + "'");
  const auto mode = a.mode == "sample" ? adssm::TranslateMode::sample : adssm::TranslateMode::mean;

  std::vector<std::vector<double>> mean(chunks.size()), spread(chunks.size());
  trainkit::parallel_for(chunks.size(), a.threads, [&](std::size_t i) {
    const auto& c = chunks[i];
    const auto seed = num::derive_seed(a.seed, "cli.translate", c.record * 100003 + c.chunk);
    const auto t = adssm::translate(state.params, state.model, c.x.segments, mode, seed);
    mean[i] = pipeline::restore_prediction(c, t.mean);
    spread[i] = mode == adssm::TranslateMode::sample ? pipeline::restore_prediction(c, t.spread)
                                                     : std::vector<double>(mean[i].size(), 0.0);
  });

  SeriesSet hyp, ref;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    const SeriesKey key{chunks[i].record, chunks[i].chunk};
    hyp.push_back({key, mean[i]});
    ref.push_back({key, pipeline::reference_ecg(chunks[i])});
  }
  const auto dir = make_out_dir(a.out);
  write_series_csv(dir / "translated.csv", hyp);
  write_series_csv(dir / "reference.csv", ref);
  if (mode == adssm::TranslateMode::sample) {
    SeriesSet sp;
    for (std::size_t i = 0; i < chunks.size(); ++i) sp.push_back({hyp[i].first, spread[i]});
    write_series_csv(dir / "spread.csv", sp);
  }
  overlay_plot(ref.front().second, mean.front(), spread.front()).write(dir / "plot_overlay.csv");

  Manifest m("translate", "mode = " + a.mode + "\nsplit = " + a.split + "\nseed = " + std::to_string(a.seed) + "\n",
             a.seed);
  m.input(a.model);
  m.input(a.in);
  for (const char* f : {"translated.csv", "reference.csv", "spread.csv", "plot_overlay.csv"}) {
    if (fs::exists(dir / f) && (mode == adssm::TranslateMode::sample || std::string(f) != "spread.csv")) m.output(dir / f);
  }
  m.write(dir);
  std::cout << "translate: " << chunks.size() << " chunks (" << a.mode << " mode)\n";
}

// ---- eval ----------------------------------------------------------------------

struct EvalArgs {
  std::string ref, hyp, out;
};

inline metrics::MetricReport evaluate_series(const SeriesSet& ref, const SeriesSet& hyp) {
  if (ref.size() != hyp.size()) {
    throw ShapeError("eval: reference has " + std::to_string(ref.size()) + " series, hypothesis " +
                     std::to_string(hyp.size()));
  }
  metrics::MetricReport report;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    if (ref[i].first != hyp[i].first) {
      throw ShapeError("eval: series " + std::to_string(i) + " is record " + std::to_string(ref[i].first.first) +
                       " chunk " + std::to_string(ref[i].first.second) + " in the reference but not in the hypothesis");
    }
    const auto s = pipeline::score(ref[i].second, hyp[i].second);
    report.add_record({{"pearson", s.pearson}, {"rmse", s.rmse}, {"snr_db", s.snr_db}});
  }
  return report;
}

inline void cmd_eval(const EvalArgs& a) {
  const auto report = evaluate_series(read_series_csv(a.ref), read_series_csv(a.hyp));
  const auto dir = make_out_dir(a.out);
  write_file(dir / "report.json", report.to_json().dump(2) + "\n");
  write_file(dir / "report.txt", report.to_table());
  report_plot(report).write(dir / "plot_metrics.csv");
  Manifest m("eval", "", std::nullopt);
  m.input(a.ref);
  m.input(a.hyp);
  for (const char* f : {"report.json", "report.txt", "plot_metrics.csv"}) m.output(dir / f);
  m.write(dir);
  std::cout << report.to_table();
}

// ---- ddm -----------------------------------------------------------------------

struct DdmSimArgs {
  ddm::DdmParams params;
  std::size_t n = 5000;
  double dt = 1e-4;
  std::uint64_t seed = 0;
  std::string out;
  std::size_t threads = 1;
};

/// Response-time histogram per boundary, 50 bins from 0 to the slowest trial.
inline PlotData rt_histogram(std::span<const ddm::Trial> trials, std::size_t bins = 50) {
  double max_rt = 0.0;
  for (const auto& t : trials) max_rt = std::max(max_rt, t.rt);
  const double w = max_rt / static_cast<double>(bins);
  std::vector<double> upper(bins, 0.0), lower(bins, 0.0);
  for (const auto& t : trials) {
    const auto b = std::min(bins - 1, static_cast<std::size_t>(t.rt / w));
    (t.choice == ddm::Choice::upper ? upper : lower)[b] += 1.0;
  }
  PlotData d;
  for (std::size_t b = 0; b < bins; ++b) d.add("upper", (b + 0.5) * w, upper[b]);
  for (std::size_t b = 0; b < bins; ++b) d.add("lower", (b + 0.5) * w, lower[b]);
  return d;
}

inline void cmd_ddm_sim(const DdmSimArgs& a) {
  const auto sim = ddm::simulate_ddm(a.params, a.n, a.seed, a.dt, static_cast<unsigned>(a.threads));
  if (sim.trials.empty()) throw NumericError("ddm-sim: every trial was censored");
  const auto dir = make_out_dir(a.out);
  ddm::write_trials_csv(dir / "trials.csv", sim.trials);
  write_file(dir / "params.json", nlohmann::json{{"params", ddm::to_json(a.params)},
                                                 {"n", a.n},
                                                 {"dt", a.dt},
                                                 {"seed", a.seed},
                                                 {"censored", sim.censored.size()}}
                                          .dump(2) +
                                      "\n");
  rt_histogram(sim.trials).write(dir / "plot_rt_hist.csv");
  const std::string cfg = "alpha = " + synth::format_double(a.params.alpha) +
                          "\ntau = " + synth::format_double(a.params.tau) +
                          "\ndelta = " + synth::format_double(a.params.delta) + "\nn = " + std::to_string(a.n) +
                          "\ndt = " + synth::format_double(a.dt) + "\n";
  Manifest m("ddm-sim", cfg, a.seed);
  for (const char* f : {"trials.csv", "params.json", "plot_rt_hist.csv"}) m.output(dir / f);
  m.write(dir);
  std::cout << "ddm-sim: " << sim.trials.size() << " trials, " << sim.censored.size() << " censored\n";
}

struct DdmFitArgs {
  std::string trials, out;
  double init_alpha = 1.0, init_delta = 0.5;
  std::optional<double> init_tau;  // half the fastest response time when unset
};

inline void cmd_ddm_fit(const DdmFitArgs& a) {
  const auto trials = ddm::read_trials_csv(a.trials);
  if (trials.empty()) throw ConfigError("ddm-fit: no trials in '" + a.trials + "'");
  double min_rt = trials.front().rt;
  for (const auto& t : trials) min_rt = std::min(min_rt, t.rt);
  const ddm::DdmParams init{a.init_alpha, a.init_tau.value_or(0.5 * min_rt), a.init_delta, 0.5};
  const auto r = ddm::fit_mle(trials, init);
  const auto dir = make_out_dir(a.out);
  write_file(dir / "fit.json", ddm::to_json(r).dump(2) + "\n");
  const std::string cfg = "init_alpha = " + synth::format_double(init.alpha) +
                          "\ninit_tau = " + synth::format_double(init.tau) +
                          "\ninit_delta = " + synth::format_double(init.delta) + "\n";
  Manifest m("ddm-fit", cfg, std::nullopt);
  m.input(a.trials);
  m.output(dir / "fit.json");
  m.write(dir);
  std::printf("ddm-fit: alpha %.4f  tau %.4f  delta %.4f  loglik %.3f  %s\n", r.params.alpha, r.params.tau,
              r.params.delta, r.loglik, r.converged ? "converged" : "not converged");
}

// ---- dispatch ------------------------------------------------------------------

/// Exit codes: 0 success, 1 usage error (bad flags or invalid configuration),
/// 2 runtime error.
inline int run(int argc, const char* const* argv) {
  CLI::App app{"Physiological signal translation and drift-diffusion toolkit", "physio"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::function<void()> action;
  std::string print_text;
  bool print_config = false;
  auto add_print = [&](CLI::App* sub) { sub->add_flag("--print-config", print_config, "Print the canonical config and exit"); };

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Synthesise paired PPG/ECG records");
  s->add_option("--config", synth.config, "key = value config file")->check(CLI::ExistingFile);
  s->add_option("--seed", synth.seed, "Master seed")->capture_default_str();
  s->add_option("--out", synth.out, "Output directory");
  add_print(s);
  s->callback([&] {
    if (print_config) return void(print_text = dump_kv(load_options(synth.config, parse_synth), synth_schema()));
    if (synth.out.empty()) throw CLI::RequiredError("--out");
    action = [&] { cmd_synth(synth); };
  });

  PrepArgs prep;
  auto* p = app.add_subcommand("prep", "Chunk, segment and pair records; assign splits");
  p->add_option("--in", prep.in, "Directory of synth records")->check(CLI::ExistingDirectory);
  p->add_option("--out", prep.out, "Output directory");
  p->add_option("--config", prep.config, "key = value config file")->check(CLI::ExistingFile);
  p->add_option("--seed", prep.seed, "Split and noise seed")->capture_default_str();
  p->add_flag("--noise", prep.noise, "Corrupt the PPG with the configured noise");
  add_print(p);
  p->callback([&] {
    if (print_config) return void(print_text = dump_kv(load_options(prep.config, parse_prep), prep_schema()));
    if (prep.in.empty() || prep.out.empty()) throw CLI::RequiredError("--in and --out");
    action = [&] { cmd_prep(prep); };
  });

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train the translation model");
  t->add_option("--data", train.data, "pairs.json from prep")->check(CLI::ExistingFile);
  t->add_option("--config", train.config, "key = value config file")->check(CLI::ExistingFile);
  t->add_option("--out", train.out, "Output directory");
  t->add_option("--resume", train.resume, "Checkpoint to continue from")->check(CLI::ExistingFile);
  t->add_flag("--timing", train.timing, "Record wall-clock time per epoch in the history");
  t->add_option("--threads", train.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  add_print(t);
  t->callback([&] {
    if (print_config) return void(print_text = dump_kv(load_options(train.config, parse_train), train_schema()));
    if (train.data.empty() || train.out.empty()) throw CLI::RequiredError("--data and --out");
    action = [&] { cmd_train(train); };
  });

  TranslateArgs tr;
  auto* x = app.add_subcommand("translate", "Translate PPG chunks to ECG with a trained model");
  x->add_option("--model", tr.model, "Checkpoint")->required()->check(CLI::ExistingFile);
  x->add_option("--in", tr.in, "pairs.json from prep")->required()->check(CLI::ExistingFile);
  x->add_option("--out", tr.out, "Output directory")->required();
  x->add_option("--mode", tr.mode, "mean or sample")->check(CLI::IsMember({"mean", "sample"}))->capture_default_str();
  x->add_option("--split", tr.split, "Chunks to translate")->check(CLI::IsMember({"train", "val", "test", "all"}))->capture_default_str();
  x->add_option("--seed", tr.seed, "Sampling seed")->capture_default_str();
  x->add_option("--threads", tr.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  x->callback([&] { action = [&] { cmd_translate(tr); }; });

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score translated signals against references");
  e->add_option("--ref", ev.ref, "Reference CSV")->required()->check(CLI::ExistingFile);
  e->add_option("--hyp", ev.hyp, "Hypothesis CSV")->required()->check(CLI::ExistingFile);
  e->add_option("--out", ev.out, "Output directory")->required();
  e->callback([&] { action = [&] { cmd_eval(ev); }; });

  DdmSimArgs ds;
  auto* d = app.add_subcommand("ddm-sim", "Simulate drift-diffusion trials");
  d->add_option("--alpha", ds.params.alpha, "Boundary separation")->capture_default_str();
  d->add_option("--tau", ds.params.tau, "Non-decision time (s)")->capture_default_str();
  d->add_option("--delta", ds.params.delta, "Drift rate")->capture_default_str();
  d->add_option("--n", ds.n, "Trials")->check(CLI::PositiveNumber)->capture_default_str();
  d->add_option("--dt", ds.dt, "Euler step (s)")->capture_default_str();
  d->add_option("--seed", ds.seed, "Seed")->capture_default_str();
  d->add_option("--out", ds.out, "Output directory")->required();
  d->add_option("--threads", ds.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  d->callback([&] { action = [&] { cmd_ddm_sim(ds); }; });

  DdmFitArgs df;
  auto* f = app.add_subcommand("ddm-fit", "Maximum-likelihood drift-diffusion fit");
  f->add_option("--trials", df.trials, "trials.csv")->required()->check(CLI::ExistingFile);
  f->add_option("--init-alpha", df.init_alpha, "Initial boundary separation")->capture_default_str();
  f->add_option("--init-tau", df.init_tau, "Initial non-decision time (default: half the fastest RT)");
  f->add_option("--init-delta", df.init_delta, "Initial drift rate")->capture_default_str();
  f->add_option("--out", df.out, "Output directory")->required();
  f->callback([&] { action = [&] { cmd_ddm_fit(df); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 1;
  } catch (const ConfigError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  }
  try {
    if (print_config) {
      std::cout << print_text;
      return 0;
    }
    action();
    return 0;
  } catch (const ConfigError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  }
}

}  // namespace physio::cli
