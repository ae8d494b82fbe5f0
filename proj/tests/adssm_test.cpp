#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "physio/adssm/model.hpp"
#include "support/gradient_cases.hpp"

using namespace physio;
using namespace physio::adssm;

using physio::testing::random_segments;

namespace {

const AdssmConfig kSmall{8, 6, 4, PosteriorWindow::future};

void fill(num::ParamSet& ps, const std::string& name, double value) {
  ps.set(name, num::Tensor::full(ps[name].shape(), value));
}

void zero_prefix(num::ParamSet& ps, const std::string& prefix) {
  for (std::size_t i = 0; i < ps.count(); ++i) {
    if (ps.name(i).rfind(prefix, 0) == 0) ps.set(i, num::Tensor::zeros(ps.value(i).shape()));
  }
}

}  // namespace

TEST(Params, ShapesAndInitialisation) {
  const auto ps = init_params(kSmall, 1);
  EXPECT_NO_THROW(check_params(ps, kSmall));
  EXPECT_EQ(ps["attn.W_x"].shape(), (num::Shape{6, 8}));
  EXPECT_EQ(ps["trans.W_g1"].shape(), (num::Shape{6, 12}));
  EXPECT_EQ(ps["emit.W_e3"].shape(), (num::Shape{8, 6}));
  for (double v : ps["trans.b_g1"].values()) EXPECT_EQ(v, 0.0);
  const double a = std::sqrt(1.0 / 12.0);
  for (double v : ps["trans.W_g1"].values()) EXPECT_LE(std::abs(v), a);
  // Recurrent weights: rows orthogonal with norm 0.1.
  const auto& U = ps["post.fwd.U_r"].values();
  for (std::size_t r = 0; r < 6; ++r) {
    for (std::size_t q = 0; q < 6; ++q) {
      double d = 0.0;
      for (std::size_t k = 0; k < 6; ++k) d += U[r * 6 + k] * U[q * 6 + k];
      EXPECT_NEAR(d, r == q ? 0.01 : 0.0, 1e-12);
    }
  }
  EXPECT_EQ(init_params(kSmall, 1), ps);
  EXPECT_FALSE(init_params(kSmall, 2) == ps);
}

TEST(Params, CheckRejectsWrongConfig) {
  const auto ps = init_params(kSmall, 1);
  EXPECT_THROW(check_params(ps, AdssmConfig{8, 6, 5, PosteriorWindow::future}), ShapeError);
}

TEST(Attention, ZeroScoreVectorGivesUniformWeights) {
  auto ps = init_params(kSmall, 3);
  fill(ps, "attn.v_s", 0.0);
  const auto x = random_segments(5, 8, 1);
  const auto r = attention_context(ps, kSmall, {0.1, -0.2, 0.3, 0.0}, x);
  for (double a : r.alpha) EXPECT_NEAR(a, 0.2, 1e-15);
  for (std::size_t l = 0; l < 8; ++l) {
    double m = 0.0;
    for (const auto& s : x) m += s[l] / 5.0;
    EXPECT_NEAR(r.context[l], m, 1e-12);
  }
}

TEST(Attention, SingleSegment) {
  const auto ps = init_params(kSmall, 3);
  const auto x = random_segments(1, 8, 2);
  const auto r = attention_context(ps, kSmall, {0.0, 0.0, 0.0, 0.0}, x);
  ASSERT_EQ(r.alpha.size(), 1u);
  EXPECT_DOUBLE_EQ(r.alpha[0], 1.0);
  for (std::size_t l = 0; l < 8; ++l) EXPECT_DOUBLE_EQ(r.context[l], x[0][l]);
}

TEST(Attention, SoftmaxClosedForm) {
  // One hidden unit with identity maps: score_i = tanh(x_i).
  const AdssmConfig cfg{1, 1, 1, PosteriorWindow::future};
  auto ps = init_params(cfg, 1);
  fill(ps, "attn.W_x", 1.0);
  fill(ps, "attn.W_sx", 1.0);
  fill(ps, "attn.W_sz", 0.0);
  fill(ps, "attn.b_s", 0.0);
  fill(ps, "attn.v_s", 1.0);
  const double x0 = std::atanh(std::numbers::ln2);
  const auto r = attention_context(ps, cfg, {0.0}, {{x0}, {0.0}});
  EXPECT_NEAR(r.alpha[0], 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(r.alpha[1], 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(r.context[0], 2.0 / 3.0 * x0, 1e-12);
}

TEST(Attention, RowIsDistribution) {
  const auto ps = init_params(kSmall, 5);
  const auto x = random_segments(4, 8, 3);
  const auto a = attention_context(ps, kSmall, {0.5, -1.0, 0.2, 0.9}, x);
  double sum = 0.0;
  for (double v : a.alpha) {
    EXPECT_GE(v, 0.0);
    sum += v;
  }
  EXPECT_NEAR(sum, 1.0, 1e-9);
}

TEST(Attention, RejectsEmptyAndBadShapes) {
  const auto ps = init_params(kSmall, 1);
  EXPECT_THROW(attention_context(ps, kSmall, {0, 0, 0, 0}, {}), ShapeError);
  EXPECT_THROW(attention_context(ps, kSmall, {0, 0, 0}, random_segments(2, 8, 1)), ShapeError);
  EXPECT_THROW(attention_context(ps, kSmall, {0, 0, 0, 0}, random_segments(2, 7, 1)), ShapeError);
}

TEST(Transition, GateClosedToLinearBranch) {
  auto ps = init_params(kSmall, 7);
  fill(ps, "trans.W_g3", 0.0);
  fill(ps, "trans.b_g3", -800.0);
  const std::vector<double> z{0.3, -0.1, 0.2, 0.5}, c = random_segments(1, 8, 4)[0];
  const auto p = prior_transition(ps, kSmall, z, c);
  std::vector<double> zc = z;
  zc.insert(zc.end(), c.begin(), c.end());
  const auto& W = ps["trans.W_mu"].values();
  const auto& b = ps["trans.b_mu"].values();
  for (std::size_t i = 0; i < 4; ++i) {
    double lin = b[i];
    for (std::size_t j = 0; j < 12; ++j) lin += W[i * 12 + j] * zc[j];
    EXPECT_EQ(p.mean[i], lin);
  }
}

TEST(Transition, GateOpenToNonlinearBranch) {
  auto ps = init_params(kSmall, 7);
  fill(ps, "trans.W_g3", 0.0);
  fill(ps, "trans.b_g3", 800.0);
  // With W_d3 = 0 the candidate d equals b_d3.
  fill(ps, "trans.W_d3", 0.0);
  ps.set("trans.b_d3", num::Tensor::vector({0.7, -0.4, 0.1, 2.0}));
  const auto p = prior_transition(ps, kSmall, {0.3, -0.1, 0.2, 0.5}, random_segments(1, 8, 4)[0]);
  EXPECT_EQ(p.mean, (std::vector<double>{0.7, -0.4, 0.1, 2.0}));
}

TEST(Transition, VariancePositive) {
  auto ps = init_params(kSmall, 9);
  fill(ps, "trans.b_var", -1000.0);
  const auto p = prior_transition(ps, kSmall, {1, 2, 3, 4}, random_segments(1, 8, 5)[0]);
  for (double v : p.var) EXPECT_GE(v, num::kVarianceFloor);
  const auto q = prior_transition(init_params(kSmall, 9), kSmall, {1, 2, 3, 4}, random_segments(1, 8, 5)[0]);
  for (double v : q.var) EXPECT_GT(v, num::kVarianceFloor);
}

TEST(Emission, ZeroWeightsAndUnitVariance) {
  const AdssmConfig cfg = AdssmConfig::desk();
  auto ps = init_params(cfg, 2);
  zero_prefix(ps, "emit.");
  const auto e = emission(ps, cfg, std::vector<double>(cfg.latent, 0.4));
  ASSERT_EQ(e.mean.size(), 90u);
  for (double m : e.mean) EXPECT_EQ(m, 0.0);
  const auto f = emission(init_params(cfg, 2), cfg, std::vector<double>(cfg.latent, 0.4));
  for (double v : f.var) EXPECT_EQ(v, 1.0);
  EXPECT_NEAR(f.log_density(f.mean), -45.0 * std::log(2.0 * std::numbers::pi), 1e-12);
}

TEST(Posterior, FloorVarianceGivesMeanPath) {
  auto ps = init_params(kSmall, 4);
  fill(ps, "post.W_var", 0.0);
  fill(ps, "post.b_var", -1000.0);
  const auto y = random_segments(6, 8, 6);
  const auto p = infer_posterior(ps, kSmall, y, 12);
  ASSERT_EQ(p.z.size(), 6u);
  for (std::size_t t = 0; t < 6; ++t) {
    for (std::size_t i = 0; i < 4; ++i) {
      EXPECT_NEAR(p.posterior[t].var[i], num::kVarianceFloor, 1e-15);
      EXPECT_NEAR(p.z[t][i], p.posterior[t].mean[i], 1e-3 * 6.0);
    }
  }
}

TEST(Posterior, DeterministicForSeed) {
  const auto ps = init_params(kSmall, 4);
  const auto y = random_segments(5, 8, 7);
  EXPECT_EQ(infer_posterior(ps, kSmall, y, 3).z, infer_posterior(ps, kSmall, y, 3).z);
  EXPECT_NE(infer_posterior(ps, kSmall, y, 3).z, infer_posterior(ps, kSmall, y, 4).z);
}

TEST(Posterior, SensitiveToLastSegment) {
  const auto ps = init_params(kSmall, 4);
  auto y = random_segments(5, 8, 8);
  const auto a = infer_posterior(ps, kSmall, y, 1);
  for (auto& v : y.back()) v += 1.0;
  const auto b = infer_posterior(ps, kSmall, y, 1);
  EXPECT_NE(a.posterior.back().mean, b.posterior.back().mean);
  EXPECT_NE(a.posterior.front().mean, b.posterior.front().mean);
}

TEST(Posterior, FutureWindowIgnoresPast) {
  // Under the future window, step t sees only y[t..]; changing y[0] can only
  // move later steps through z, so with the combiner's z path cut the
  // distributions of later steps must match.
  auto ps = init_params(kSmall, 4);
  fill(ps, "post.W_h", 0.0);
  auto y = random_segments(4, 8, 9);
  const auto a = infer_posterior(ps, kSmall, y, 1);
  for (auto& v : y.front()) v -= 2.0;
  const auto b = infer_posterior(ps, kSmall, y, 1);
  EXPECT_NE(a.posterior[0].mean, b.posterior[0].mean);
  for (std::size_t t = 1; t < 4; ++t) EXPECT_EQ(a.posterior[t].mean, b.posterior[t].mean);

  AdssmConfig incl = kSmall;
  incl.window = PosteriorWindow::inclusive;
  const auto c = infer_posterior(ps, incl, random_segments(4, 8, 9), 1);
  const auto d = infer_posterior(ps, incl, y, 1);
  EXPECT_NE(c.posterior[1].mean, d.posterior[1].mean);
  EXPECT_EQ(c.posterior[2].mean, d.posterior[2].mean);
}

TEST(Elbo, BetaZeroIsReconstruction) {
  const auto ps = init_params(kSmall, 5);
  const auto x = random_segments(4, 8, 10), y = random_segments(4, 8, 11);
  const auto r = elbo(ps, kSmall, x, y, 0.0, 2);
  EXPECT_NEAR(r.value, r.recon, 1e-10);
  EXPECT_GT(r.kl, 0.0);
}

TEST(Elbo, BreakdownIdentity) {
  const auto ps = init_params(kSmall, 5);
  const auto x = random_segments(4, 8, 10), y = random_segments(4, 8, 11);
  for (double beta : {0.0, 0.37, 1.0}) {
    const auto r = elbo(ps, kSmall, x, y, beta, 2);
    ASSERT_EQ(r.kl_per_step.size(), 4u);
    ASSERT_EQ(r.recon_per_step.size(), 4u);
    double kl = 0.0;
    for (double k : r.kl_per_step) {
      EXPECT_GE(k, 0.0);
      kl += k;
    }
    EXPECT_NEAR(r.value, r.recon - beta * kl, 1e-10);
  }
}

TEST(Elbo, PosteriorEqualsPriorGivesZeroKl) {
  auto ps = init_params(kSmall, 5);
  zero_prefix(ps, "trans.");
  for (const char* n : {"post.W_mu", "post.b_mu", "post.W_var", "post.b_var"}) fill(ps, n, 0.0);
  const auto r = elbo(ps, kSmall, random_segments(5, 8, 1), random_segments(5, 8, 2), 1.0, 3);
  for (double k : r.kl_per_step) EXPECT_NEAR(k, 0.0, 1e-14);
}

TEST(Elbo, DeterministicAndMismatchRejected) {
  const auto ps = init_params(kSmall, 5);
  const auto x = random_segments(4, 8, 10), y = random_segments(4, 8, 11);
  EXPECT_EQ(elbo(ps, kSmall, x, y, 0.5, 9).value, elbo(ps, kSmall, x, y, 0.5, 9).value);
  EXPECT_THROW(elbo(ps, kSmall, x, random_segments(3, 8, 1), 1.0, 1), ShapeError);
  EXPECT_THROW(elbo(ps, kSmall, {}, {}, 1.0, 1), ShapeError);
}

TEST(Elbo, GradientMatchesValueAndPath) {
  const auto ps = init_params(kSmall, 5);
  const auto x = random_segments(4, 8, 10), y = random_segments(4, 8, 11);
  const auto [r, g] = elbo_grad(ps, kSmall, x, y, 0.6, 2);
  EXPECT_EQ(r.value, elbo(ps, kSmall, x, y, 0.6, 2).value);
  EXPECT_EQ(g.size(), ps.total_size());
  const auto path = latent_path(ps, kSmall, x, y, 2);
  EXPECT_EQ(path.z, infer_posterior(ps, kSmall, y, 2).z);
  for (const auto& row : path.attention) {
    double s = 0.0;
    for (double a : row) s += a;
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(Elbo, GradientMatchesFiniteDifferences) {
  const AdssmConfig cfg{6, 5, 3, PosteriorWindow::future};
  for (const auto& c : physio::testing::check_elbo_params(cfg, 3, 6, 0)) {
    EXPECT_LT(c.error, 1e-4) << c.tensor << " [" << c.index << "] fd=" << c.numeric << " ad=" << c.analytic;
  }
}

TEST(Translate, MeanModeDeterministicAndSeedInvariant) {
  const auto ps = init_params(kSmall, 6);
  const auto x = random_segments(5, 8, 12);
  const auto a = translate(ps, kSmall, x, TranslateMode::mean, 1);
  const auto b = translate(ps, kSmall, x, TranslateMode::mean, 999);
  EXPECT_EQ(a.mean, b.mean);
  ASSERT_EQ(a.mean.size(), 5u);
  for (const auto& s : a.mean) EXPECT_EQ(s.size(), 8u);
  EXPECT_TRUE(a.spread.empty());
  ASSERT_EQ(a.attention.size(), 5u);
  for (const auto& row : a.attention) {
    double s = 0.0;
    for (double v : row) {
      EXPECT_GE(v, 0.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(Translate, EmptyInput) {
  const auto ps = init_params(kSmall, 6);
  EXPECT_TRUE(translate(ps, kSmall, {}).mean.empty());
}

TEST(Translate, SampleModeSpread) {
  const auto ps = init_params(kSmall, 6);
  const auto x = random_segments(3, 8, 13);
  const auto a = translate(ps, kSmall, x, TranslateMode::sample, 5);
  const auto b = translate(ps, kSmall, x, TranslateMode::sample, 5);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.spread, b.spread);
  ASSERT_EQ(a.spread.size(), 3u);
  for (const auto& s : a.spread)
    for (double v : s) EXPECT_GT(v, 0.0);
  EXPECT_NE(translate(ps, kSmall, x, TranslateMode::sample, 6).mean, a.mean);
}
