#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "physio/cli/commands.hpp"

using namespace physio;
using namespace physio::cli;
namespace fs = std::filesystem;

namespace {

fs::path work_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / "physio_cli_test" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

int physio_cmd(const std::string& args) {
  const std::string cmd = std::string(PHYSIO_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string captured_error(const std::string& text) {
  try {
    parse_train(parse_kv(text, "t.cfg"), "t.cfg");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(KvConfig, EmptyFileGivesDefaults) {
  const auto t = parse_train(parse_kv("", "e.cfg"), "e.cfg");
  EXPECT_EQ(t.train, trainkit::TrainConfig{});
  EXPECT_EQ(t.model, adssm::AdssmConfig{});
  EXPECT_EQ(parse_synth(parse_kv("# nothing\n\n", "e"), "e").records, 50u);
  EXPECT_EQ(parse_prep({}, "e").prep, prep::PrepConfig{});
}

TEST(KvConfig, NegativeLearningRateNamesKeyAndLine) {
  const auto msg = captured_error("epochs = 10\nanneal_end_epoch = 5\nlr = -1\n");
  EXPECT_NE(msg.find("t.cfg:3"), std::string::npos) << msg;
  EXPECT_NE(msg.find("'lr'"), std::string::npos) << msg;
}

TEST(KvConfig, RejectsUnknownDuplicateAndMalformed) {
  EXPECT_NE(captured_error("lr = 0.1\nlearning_rate = 1\n").find("t.cfg:2: unknown key 'learning_rate'"), std::string::npos);
  EXPECT_THROW(parse_kv("lr = 1\nlr = 2\n", "d"), ConfigError);
  EXPECT_THROW(parse_kv("lr 1\n", "d"), ConfigError);
  EXPECT_NE(captured_error("batch = many\n").find("'batch'"), std::string::npos);
  EXPECT_NE(captured_error("anneal_end_epoch = 6000\n").find("t.cfg"), std::string::npos);
}

TEST(KvConfig, PresetAppliesBeforeOverrides) {
  const auto t = parse_train(parse_kv("epochs = 20\npreset = desk\nanneal_end_epoch = 10\n", "p"), "p");
  EXPECT_EQ(t.train.epochs, 20u);
  EXPECT_EQ(t.train.batch, 32u);
  EXPECT_EQ(t.model.hidden, adssm::AdssmConfig::desk().hidden);
}

TEST(KvConfig, DumpIsCanonicalAndStable) {
  const auto a = parse_train(parse_kv("  lr=0.001 # tuned\nwindow = inclusive\nseed=9\n", "a"), "a");
  const auto text = dump_kv(a, train_schema());
  const auto b = parse_train(parse_kv(text, "b"), "b");
  EXPECT_EQ(dump_kv(b, train_schema()), text);
  EXPECT_EQ(b.train, a.train);
  EXPECT_EQ(b.model, a.model);

  const auto p = parse_prep(parse_kv("noise_baseline = 0.1@0.25, 0.05@0.5\nchunk_s = 3\n", "p"), "p");
  const auto ptext = dump_kv(p, prep_schema());
  EXPECT_EQ(dump_kv(parse_prep(parse_kv(ptext, "q"), "q"), prep_schema()), ptext);
  EXPECT_EQ(p.noise.baseline.size(), 2u);

  const auto s = parse_synth(parse_kv("records = 3\nmean_rr = 0.9\n", "s"), "s");
  const auto stext = dump_kv(s, synth_schema());
  EXPECT_EQ(dump_kv(parse_synth(parse_kv(stext, "r"), "r"), synth_schema()), stext);
}

TEST(PlotData, HistoryRowsPerSeries) {
  trainkit::TrainHistory h;
  for (std::size_t e = 1; e <= 7; ++e) h.push_back({e, 0.1 * e, -10.0 + e, -11.0 + e, 0.0});
  const auto dir = work_dir("plot");
  history_plot(h).write(dir / "a.csv");
  history_plot(h).write(dir / "b.csv");
  const auto text = read_file(dir / "a.csv");
  EXPECT_EQ(text, read_file(dir / "b.csv"));
  for (const char* s : {"train_elbo,", "val_elbo,", "beta,"}) {
    std::size_t n = 0;
    for (auto pos = text.find(std::string("\n") + s); pos != std::string::npos; pos = text.find(std::string("\n") + s, pos + 1)) ++n;
    EXPECT_EQ(n, 7u) << s;
  }
  EXPECT_THROW(PlotData{}.write(dir / "empty.csv"), ConfigError);
}

TEST(PlotData, OverlayHasThreeSeries) {
  const std::vector<double> r{1, 2, 3}, m{1.5, 2.5, 3.5}, s{0.1, 0.1, 0.1};
  const auto dir = work_dir("overlay");
  overlay_plot(r, m, s).write(dir / "o.csv");
  const auto text = read_file(dir / "o.csv");
  EXPECT_EQ(text.rfind("series,x,y\n", 0), 0u);
  EXPECT_NE(text.find("\nreference,0,1\n"), std::string::npos);
  EXPECT_NE(text.find("\ntranslated-mean,2,3.5\n"), std::string::npos);
  EXPECT_NE(text.find("\ntranslated-spread,1,0.1\n"), std::string::npos);
}

TEST(SeriesCsv, RoundTripAndErrors) {
  const auto dir = work_dir("series");
  const SeriesSet s{{{0, 1}, {0.5, -0.25}}, {{3, 0}, {1e-9}}};
  write_series_csv(dir / "s.csv", s);
  EXPECT_EQ(read_series_csv(dir / "s.csv"), s);
  write_file(dir / "bad.csv", "record,chunk,t,value\n0,0,1,2\n");
  EXPECT_THROW(read_series_csv(dir / "bad.csv"), FormatError);
  write_file(dir / "hdr.csv", "a,b\n");
  EXPECT_THROW(read_series_csv(dir / "hdr.csv"), FormatError);
}

TEST(Cli, ExitCodes) {
  const auto dir = work_dir("exit");
  EXPECT_EQ(physio_cmd("--help"), 0);
  EXPECT_EQ(physio_cmd(""), 1);
  EXPECT_EQ(physio_cmd("frobnicate"), 1);
  EXPECT_EQ(physio_cmd("synth --bogus-flag --out " + dir.string()), 1);
  write_file(dir / "bad.cfg", "lr = -1\n");
  EXPECT_EQ(physio_cmd("train --print-config --config " + (dir / "bad.cfg").string()), 1);
  write_file(dir / "trials.csv", "rt_s,choice\n0.5,1\n");
  EXPECT_EQ(physio_cmd("ddm-fit --trials " + (dir / "trials.csv").string() + " --out " + (dir / "f").string()), 1);
  write_file(dir / "garbage.csv", "rt_s,choice\nabc,1\n");
  EXPECT_EQ(physio_cmd("ddm-fit --trials " + (dir / "garbage.csv").string() + " --out " + (dir / "g").string()), 2);
}

TEST(Cli, SynthIsByteReproducible) {
  const auto dir = work_dir("synth");
  write_file(dir / "s.cfg", "records = 2\nduration_s = 12\n");
  const auto cfg = (dir / "s.cfg").string();
  ASSERT_EQ(physio_cmd("synth --config " + cfg + " --seed 7 --out " + (dir / "a").string()), 0);
  ASSERT_EQ(physio_cmd("synth --config " + cfg + " --seed 7 --out " + (dir / "b").string()), 0);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir / "a")) {
    EXPECT_EQ(read_file(e.path()), read_file(dir / "b" / e.path().filename())) << e.path();
    ++files;
  }
  EXPECT_EQ(files, 9u);  // 2 records x (ppg, ecg) x (csv, sidecar) + manifest
  const auto m = nlohmann::json::parse(read_file(dir / "a" / "manifest.json"));
  EXPECT_EQ(m.at("command"), "synth");
  EXPECT_EQ(m.at("seed"), 7);
  EXPECT_EQ(m.at("outputs").size(), 8u);
  EXPECT_EQ(m.at("config_hash"), fnv1a_hex(m.at("config").get<std::string>()));
}

TEST(Cli, EvalOnIdenticalFiles) {
  const auto dir = work_dir("eval");
  write_series_csv(dir / "r.csv", {{{0, 0}, {0.1, 0.7, -0.3, 0.2}}, {{1, 2}, {1.0, 2.0, 0.5}}});
  const auto r = (dir / "r.csv").string();
  ASSERT_EQ(physio_cmd("eval --ref " + r + " --hyp " + r + " --out " + (dir / "out").string()), 0);
  const auto j = nlohmann::json::parse(read_file(dir / "out" / "report.json"));
  EXPECT_EQ(j["metrics"]["pearson"]["mean"].get<double>(), 1.0);
  EXPECT_EQ(j["metrics"]["rmse"]["mean"].get<double>(), 0.0);
  EXPECT_EQ(j["metrics"]["snr_db"]["mean"], "inf");
  EXPECT_TRUE(fs::exists(dir / "out" / "report.txt"));
  EXPECT_TRUE(fs::exists(dir / "out" / "plot_metrics.csv"));
}

TEST(Cli, DdmSimFitRoundTrip) {
  const auto dir = work_dir("ddm");
  ASSERT_EQ(physio_cmd("ddm-sim --alpha 1.5 --tau 0.3 --delta 1.5 --n 5000 --seed 11 --out " + (dir / "sim").string()), 0);
  const auto trials = dir / "sim" / "trials.csv";
  const auto before = read_file(trials);
  ASSERT_EQ(physio_cmd("ddm-fit --trials " + trials.string() + " --out " + (dir / "fit").string()), 0);
  EXPECT_EQ(read_file(trials), before);
  const auto j = nlohmann::json::parse(read_file(dir / "fit" / "fit.json"));
  EXPECT_NEAR(j["params"]["alpha"].get<double>(), 1.5, 0.1);
  EXPECT_NEAR(j["params"]["tau"].get<double>(), 0.3, 0.05);
  EXPECT_NEAR(j["params"]["delta"].get<double>(), 1.5, 0.1);
  EXPECT_TRUE(j["converged"].get<bool>());
}

TEST(Cli, PipelineRerunsAreIdentical) {
  const auto dir = work_dir("pipeline");
  write_file(dir / "s.cfg", "records = 10\nduration_s = 20\n");
  write_file(dir / "t.cfg", "preset = desk\nepochs = 2\nanneal_end_epoch = 1\nhidden = 8\nlatent = 4\ncheckpoint_every = 1\n");
  for (const char* run : {"a", "b"}) {
    const auto d = dir / run;
    const auto s = (d / "synth").string(), p = (d / "prep").string(), t = (d / "train").string();
    ASSERT_EQ(physio_cmd("synth --config " + (dir / "s.cfg").string() + " --seed 5 --out " + s), 0);
    ASSERT_EQ(physio_cmd("prep --in " + s + " --out " + p + " --seed 5"), 0);
    ASSERT_EQ(physio_cmd("train --data " + p + "/pairs.json --config " + (dir / "t.cfg").string() + " --out " + t), 0);
    ASSERT_EQ(physio_cmd("translate --model " + t + "/model.ckpt --in " + p + "/pairs.json --mode sample --split all --out " +
                         (d / "tr").string()),
              0);
  }
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / "a")) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), dir / "a");
    EXPECT_EQ(read_file(e.path()), read_file(dir / "b" / rel)) << rel;
    ++files;
  }
  EXPECT_GT(files, 40u);
}

TEST(Cli, ResumeRejectsChangedSettings) {
  const auto dir = work_dir("resume");
  ASSERT_EQ(physio_cmd("synth --seed 1 --out " + (dir / "s").string() + " --config " +
                       [&] {
                         write_file(dir / "s.cfg", "records = 10\nduration_s = 12\n");
                         return (dir / "s.cfg").string();
                       }()),
            0);
  ASSERT_EQ(physio_cmd("prep --in " + (dir / "s").string() + " --out " + (dir / "p").string()), 0);
  const auto data = (dir / "p" / "pairs.json").string();
  write_file(dir / "a.cfg", "preset = desk\nepochs = 2\nanneal_end_epoch = 1\nhidden = 6\nlatent = 3\n");
  write_file(dir / "b.cfg", "preset = desk\nepochs = 3\nanneal_end_epoch = 1\nhidden = 6\nlatent = 3\n");
  write_file(dir / "c.cfg", "preset = desk\nepochs = 3\nanneal_end_epoch = 1\nhidden = 6\nlatent = 3\nlr = 0.01\n");
  ASSERT_EQ(physio_cmd("train --data " + data + " --config " + (dir / "a.cfg").string() + " --out " + (dir / "t2").string()), 0);
  const auto ckpt = (dir / "t2" / "model.ckpt").string();
  EXPECT_EQ(physio_cmd("train --data " + data + " --config " + (dir / "c.cfg").string() + " --resume " + ckpt + " --out " +
                       (dir / "x").string()),
            1);
  ASSERT_EQ(physio_cmd("train --data " + data + " --config " + (dir / "b.cfg").string() + " --resume " + ckpt + " --out " +
                       (dir / "r3").string()),
            0);
  ASSERT_EQ(physio_cmd("train --data " + data + " --config " + (dir / "b.cfg").string() + " --out " + (dir / "f3").string()), 0);
  EXPECT_EQ(read_file(dir / "r3" / "model.ckpt"), read_file(dir / "f3" / "model.ckpt"));
  EXPECT_EQ(read_file(dir / "r3" / "history.csv"), read_file(dir / "f3" / "history.csv"));
}
