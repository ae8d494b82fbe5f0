#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "physio/trainkit/train.hpp"

using namespace physio;
using namespace physio::trainkit;

namespace {

const adssm::AdssmConfig kModel{8, 6, 4, adssm::PosteriorWindow::future};

adssm::Segments noise_segments(std::size_t T, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 0.5);
  adssm::Segments s(T, std::vector<double>(8));
  for (auto& seg : s)
    for (auto& v : seg) v = n(rng);
  return s;
}

Dataset toy_data(std::size_t n_train, std::size_t n_val) {
  std::mt19937_64 rng(42);
  Dataset d;
  for (std::size_t i = 0; i < n_train + n_val; ++i) {
    Example e{noise_segments(3, rng), {}};
    e.y = e.x;
    for (auto& seg : e.y)
      for (auto& v : seg) v = 0.5 * v + 0.2;
    (i < n_train ? d.train : d.val).push_back(std::move(e));
  }
  return d;
}

TrainConfig small_config() {
  TrainConfig c;
  c.epochs = 4;
  c.batch = 3;
  c.anneal_end_epoch = 2;
  c.lr = 1e-2;
  c.seed = 7;
  return c;
}

std::filesystem::path temp_dir() {
  const auto d = std::filesystem::temp_directory_path() / "physio_trainkit";
  std::filesystem::create_directories(d);
  return d;
}

}  // namespace

TEST(Anneal, EndpointsAndClamp) {
  EXPECT_EQ(kl_anneal(0, 1250), 0.0);
  EXPECT_EQ(kl_anneal(1250, 1250), 1.0);
  EXPECT_EQ(kl_anneal(2000, 1250), 1.0);
  EXPECT_EQ(kl_anneal(625, 1250), 0.5);
  EXPECT_EQ(kl_anneal(0, 0), 1.0);
  EXPECT_EQ(kl_anneal(0, TrainConfig{}), 0.0);
  EXPECT_EQ(kl_anneal(1250, TrainConfig{}), 1.0);
}

TEST(Anneal, NondecreasingAndBounded) {
  double prev = 0.0;
  for (std::size_t e = 0; e <= 3000; ++e) {
    const double b = kl_anneal(e, 1250);
    EXPECT_GE(b, prev);
    EXPECT_GE(b, 0.0);
    EXPECT_LE(b, 1.0);
    prev = b;
  }
}

TEST(Config, PresetsAndValidation) {
  const auto d = TrainConfig::desk();
  EXPECT_EQ(d.epochs, 200u);
  EXPECT_EQ(d.batch, 32u);
  EXPECT_EQ(d.anneal_end_epoch, 50u);
  EXPECT_EQ(d.lr, 8e-4);
  TrainConfig bad;
  bad.anneal_end_epoch = bad.epochs + 1;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = TrainConfig{};
  bad.epochs = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = TrainConfig{};
  bad.lr = -1.0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Clip, GlobalNorm) {
  std::vector<double> g{3.0, 4.0};
  EXPECT_EQ(clip_global_norm(g, 10.0), 5.0);
  EXPECT_EQ(g, (std::vector<double>{3.0, 4.0}));
  clip_global_norm(g, 1.0);
  EXPECT_NEAR(std::hypot(g[0], g[1]), 1.0, 1e-15);
  std::vector<double> h{30.0, 40.0};
  clip_global_norm(h, 0.0);
  EXPECT_EQ(h[0], 30.0);
}

TEST(Train, ZeroLearningRateLeavesParamsUnchanged) {
  auto cfg = small_config();
  cfg.lr = 0.0;
  auto state = fresh_state(kModel, cfg);
  const auto init = state.params;
  train(toy_data(6, 2), state);
  EXPECT_EQ(state.params, init);
  EXPECT_EQ(state.history.size(), 4u);
}

TEST(Train, HistoryShapeAndFiniteness) {
  auto state = fresh_state(kModel, small_config());
  train(toy_data(6, 2), state);
  ASSERT_EQ(state.history.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& r = state.history[i];
    EXPECT_EQ(r.epoch, i + 1);
    EXPECT_EQ(r.beta, kl_anneal(i, 2));
    EXPECT_TRUE(std::isfinite(r.train_elbo));
    EXPECT_TRUE(std::isfinite(r.val_elbo));
    EXPECT_EQ(r.wall_ms, 0.0);
  }
}

TEST(Train, OneEpochMovesParameters) {
  auto cfg = small_config();
  cfg.epochs = 1;
  cfg.anneal_end_epoch = 1;
  cfg.grad_clip_norm = 0.0;
  auto state = fresh_state(kModel, cfg);
  const auto init = state.params.flatten();
  train(toy_data(6, 2), state);
  const auto after = state.params.flatten();
  std::size_t changed = 0;
  for (std::size_t i = 0; i < init.size(); ++i) changed += init[i] != after[i];
  EXPECT_GT(changed, 0u);
}

TEST(Train, DeterministicAndThreadInvariant) {
  const auto data = toy_data(7, 2);
  auto a = fresh_state(kModel, small_config());
  auto b = fresh_state(kModel, small_config());
  auto c = fresh_state(kModel, small_config());
  train(data, a);
  train(data, b);
  train(data, c, RunOptions{3, false, {}});
  EXPECT_EQ(a.history, b.history);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.history, c.history);
  EXPECT_EQ(a.params, c.params);
}

TEST(Train, ImprovesValidationElbo) {
  auto cfg = small_config();
  cfg.epochs = 30;
  cfg.anneal_end_epoch = 5;
  auto state = fresh_state(kModel, cfg);
  train(toy_data(12, 3), state);
  EXPECT_GT(state.history.back().val_elbo, state.history.front().val_elbo);
}

TEST(Train, NonFiniteDataNamesTensor) {
  auto data = toy_data(3, 1);
  data.train[1].y[0][0] = std::nan("");
  auto state = fresh_state(kModel, small_config());
  try {
    train(data, state);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("non-finite gradient in tensor 'attn."), std::string::npos) << e.what();
  }
}

TEST(Train, EmptySetsRejected) {
  auto state = fresh_state(kModel, small_config());
  EXPECT_THROW(train(Dataset{}, state), ConfigError);
  auto d = toy_data(3, 0);
  EXPECT_THROW(train(d, state), ConfigError);
}

TEST(Checkpoint, RoundTripBitwise) {
  auto state = fresh_state(kModel, small_config());
  train(toy_data(6, 2), state);
  const auto path = temp_dir() / "rt.ckpt";
  save_checkpoint(path, state);
  const auto back = load_checkpoint(path);
  EXPECT_EQ(back.params, state.params);
  EXPECT_EQ(back.adam, state.adam);
  EXPECT_EQ(back.history, state.history);
  EXPECT_EQ(back.epoch, state.epoch);
  EXPECT_EQ(back.model, state.model);
  EXPECT_EQ(back.train, state.train);
  EXPECT_EQ(encode_checkpoint(back), encode_checkpoint(state));
  EXPECT_FALSE(std::filesystem::exists(path.string() + ".tmp"));
}

TEST(Checkpoint, ResumeMatchesUninterruptedRun) {
  const auto data = toy_data(7, 2);
  auto full = fresh_state(kModel, small_config());
  train(data, full);

  auto cfg = small_config();
  auto part = fresh_state(kModel, cfg);
  const auto path = temp_dir() / "resume.ckpt";
  RunOptions opt;
  opt.on_epoch = [&](const TrainState& s) {
    if (s.epoch == 2) save_checkpoint(path, s);
  };
  train(data, part, opt);
  auto resumed = load_checkpoint(path);
  ASSERT_EQ(resumed.epoch, 2u);
  train(data, resumed);
  EXPECT_EQ(resumed.history, full.history);
  EXPECT_EQ(resumed.params, full.params);
}

TEST(Checkpoint, TruncatedAndCorruptFilesRejected) {
  auto state = fresh_state(kModel, small_config());
  const std::string buf = encode_checkpoint(state);
  const auto dir = temp_dir();
  for (std::size_t cut : {std::size_t{5}, buf.size() / 2, buf.size() - 1}) {
    std::ofstream(dir / "cut.ckpt", std::ios::binary).write(buf.data(), static_cast<std::streamsize>(cut));
    EXPECT_THROW(load_checkpoint(dir / "cut.ckpt"), FormatError) << "cut at " << cut;
  }
  std::string flipped = buf;
  flipped[flipped.size() / 2] ^= 0x10;
  std::ofstream(dir / "flip.ckpt", std::ios::binary).write(flipped.data(), static_cast<std::streamsize>(flipped.size()));
  EXPECT_THROW(load_checkpoint(dir / "flip.ckpt"), FormatError);

  std::string versioned = buf;
  versioned[8] = 9;
  try {
    decode_checkpoint(versioned, "v");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }
  EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), FormatError);
}

TEST(History, CsvLayout) {
  const TrainHistory h{{1, 0.0, -10.5, -11.25, 0.0}, {2, 0.5, -9.0, -9.5, 0.0}};
  const auto path = temp_dir() / "history.csv";
  write_history_csv(path, h);
  std::ifstream in(path);
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_EQ(text, "epoch,beta,train_elbo,val_elbo,wall_ms\n1,0,-10.5,-11.25,0\n2,0.5,-9,-9.5,0\n");
}
