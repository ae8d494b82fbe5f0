#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "physio/adssm/config.hpp"
#include "physio/adssm/params.hpp"
#include "physio/numcore/autodiff.hpp"
#include "physio/numcore/gaussian.hpp"
#include "physio/numcore/random.hpp"

namespace physio::adssm {

using num::Tape;
using num::Tensor;
using num::Var;

/// T segments of length L.
using Segments = std::vector<std::vector<double>>;

/// Parameters recorded on one tape, addressable by role.
struct Vars {
  struct Gru {
    Var W_r, U_r, b_r, W_u, U_u, b_u, W_n, U_n, b_n;
  };

  Var W_x, W_sx, W_sz, b_s, v_s;
  Var W_g[3], b_g[3], W_d[3], b_d[3], W_mu, b_mu, W_var, b_var;
  Var W_e[3], b_e[3];
  Var W_y;
  Gru bwd, fwd;
  Var W_h, b_h, W_qmu, b_qmu, W_qvar, b_qvar;
  std::vector<Var> all;  // ParamSet order
};

/// Records every parameter on `tape`, as leaves when `differentiable`, else as constants.
inline Vars bind(Tape& tape, const num::ParamSet& ps, bool differentiable) {
  Vars v;
  v.all.reserve(ps.count());
  for (std::size_t i = 0; i < ps.count(); ++i) {
    v.all.push_back(differentiable ? tape.leaf(ps.value(i)) : tape.constant(ps.value(i)));
  }
  auto at = [&](const std::string& name) { return v.all[ps.index_of(name)]; };
  v.W_x = at("attn.W_x");
  v.W_sx = at("attn.W_sx");
  v.W_sz = at("attn.W_sz");
  v.b_s = at("attn.b_s");
  v.v_s = at("attn.v_s");
  for (int k = 0; k < 3; ++k) {
    const std::string n = std::to_string(k + 1);
    v.W_g[k] = at("trans.W_g" + n);
    v.b_g[k] = at("trans.b_g" + n);
    v.W_d[k] = at("trans.W_d" + n);
    v.b_d[k] = at("trans.b_d" + n);
    v.W_e[k] = at("emit.W_e" + n);
    v.b_e[k] = at("emit.b_e" + n);
  }
  v.W_mu = at("trans.W_mu");
  v.b_mu = at("trans.b_mu");
  v.W_var = at("trans.W_var");
  v.b_var = at("trans.b_var");
  v.W_y = at("post.W_y");
  for (auto [gru, dir] : {std::pair{&v.bwd, "bwd"}, std::pair{&v.fwd, "fwd"}}) {
    const std::string p = std::string("post.") + dir + ".";
    *gru = {at(p + "W_r"), at(p + "U_r"), at(p + "b_r"), at(p + "W_u"), at(p + "U_u"),
            at(p + "b_u"), at(p + "W_n"), at(p + "U_n"), at(p + "b_n")};
  }
  v.W_h = at("post.W_h");
  v.b_h = at("post.b_h");
  v.W_qmu = at("post.W_mu");
  v.b_qmu = at("post.b_mu");
  v.W_qvar = at("post.W_var");
  v.b_qvar = at("post.b_var");
  return v;
}

// ---- network blocks (tape level) -------------------------------------------

namespace net {

/// Per-sequence attention inputs: keys W_sx W_x x_i and X^T for the context sum.
struct AttentionInputs {
  std::vector<Var> keys;
  Var Xt;  // {L, T}
};

inline AttentionInputs attention_inputs(Tape& tape, const Vars& v, const Segments& x) {
  const std::size_t T = x.size(), L = x.front().size();
  AttentionInputs in;
  std::vector<double> xt(L * T);
  for (std::size_t i = 0; i < T; ++i) {
    Var xi = tape.constant(Tensor::vector(x[i]));
    in.keys.push_back(num::matmul(v.W_sx, num::matmul(v.W_x, xi)));
    for (std::size_t l = 0; l < L; ++l) xt[l * T + i] = x[i][l];
  }
  in.Xt = tape.constant(Tensor::matrix(L, T, std::move(xt)));
  return in;
}

/// Alignment weights over all T input segments for query z, and c = sum_i alpha_i x_i.
inline std::pair<Var, Var> attention(const Vars& v, Var z, const AttentionInputs& in) {
  Var q = num::affine(v.W_sz, z, v.b_s);
  std::vector<Var> scores;
  scores.reserve(in.keys.size());
  for (Var k : in.keys) scores.push_back(num::dot(v.v_s, num::tanh(num::add(k, q))));
  Var alpha = num::softmax(num::concat(scores));
  return {num::matmul(in.Xt, alpha), alpha};
}

inline Var mlp3(const Var* W, const Var* b, Var x) {
  Var h1 = num::relu(num::affine(W[0], x, b[0]));
  Var h2 = num::relu(num::affine(W[1], h1, b[1]));
  return num::affine(W[2], h2, b[2]);
}

/// Gated transition: mean and variance of p(z_{t+1} | z_t, c_{t+1}).
inline std::pair<Var, Var> transition(const Vars& v, Var z, Var c) {
  Var zc = num::concat({z, c});
  Var g = num::sigmoid(mlp3(v.W_g, v.b_g, zc));
  Var d = mlp3(v.W_d, v.b_d, zc);
  Var lin = num::affine(v.W_mu, zc, v.b_mu);
  Tape& t = *z.tape();
  Var one_minus_g = num::sub(t.constant(Tensor::full(g.shape(), 1.0)), g);
  Var mu = num::add(num::mul(one_minus_g, lin), num::mul(g, d));
  Var var = num::shift(num::softplus(num::affine(v.W_var, num::relu(d), v.b_var)), num::kVarianceFloor);
  return {mu, var};
}

/// Emission mean mu_y(z); the emission variance is the identity.
inline Var emission(const Vars& v, Var z) { return mlp3(v.W_e, v.b_e, z); }

inline Var gru(const Vars::Gru& p, Var x, Var h) {
  Var r = num::sigmoid(num::add(num::matmul(p.W_r, x), num::affine(p.U_r, h, p.b_r)));
  Var u = num::sigmoid(num::add(num::matmul(p.W_u, x), num::affine(p.U_u, h, p.b_u)));
  Var n = num::tanh(num::add(num::affine(p.W_n, x, p.b_n), num::mul(r, num::matmul(p.U_n, h))));
  Tape& t = *x.tape();
  Var one_minus_u = num::sub(t.constant(Tensor::full(u.shape(), 1.0)), u);
  return num::add(num::mul(one_minus_u, n), num::mul(u, h));
}

/// Encoder states for every window start s over the projected observations:
/// backward GRU over wy[s..T-1] consumed from the end, forward GRU consumed from s.
struct EncoderStates {
  std::vector<Var> h;  // backward
  std::vector<Var> g;  // forward
};

inline EncoderStates encode(Tape& tape, const Vars& v, const Segments& y, std::size_t hidden) {
  const std::size_t T = y.size();
  std::vector<Var> wy;
  for (const auto& yi : y) wy.push_back(num::matmul(v.W_y, tape.constant(Tensor::vector(yi))));
  Var zero = tape.constant(Tensor::zeros({hidden}));
  EncoderStates e{std::vector<Var>(T), std::vector<Var>(T)};
  Var hb = zero;
  for (std::size_t s = T; s-- > 0;) {
    hb = gru(v.bwd, wy[s], hb);
    e.h[s] = hb;
  }
  for (std::size_t s = 0; s < T; ++s) {
    Var hf = zero;
    for (std::size_t i = s; i < T; ++i) hf = gru(v.fwd, wy[i], hf);
    e.g[s] = hf;
  }
  return e;
}

/// q(z_{t+1} | z_t, window) from the combiner (tanh(W_h z + b_h) + h + g) / 3.
inline std::pair<Var, Var> posterior(const Vars& v, Var z, Var h, Var g) {
  Var comb = num::scale(num::add(num::add(num::tanh(num::affine(v.W_h, z, v.b_h)), h), g), 1.0 / 3.0);
  Var mu = num::affine(v.W_qmu, comb, v.b_qmu);
  Var var = num::shift(num::softplus(num::affine(v.W_qvar, comb, v.b_qvar)), num::kVarianceFloor);
  return {mu, var};
}

}  // namespace net

// ---- sequence-level evaluation ----------------------------------------------

inline void check_segments(const Segments& s, std::size_t L, const char* who) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i].size() != L) {
      throw ShapeError(std::string(who) + ": segment " + std::to_string(i) + " has length " +
                       std::to_string(s[i].size()) + ", expected " + std::to_string(L));
    }
  }
}

inline std::size_t window_start(PosteriorWindow w, std::size_t t) {
  return (w == PosteriorWindow::inclusive && t > 0) ? t - 1 : t;
}

/// Tape nodes of one ELBO evaluation. Step t produces z_{t+1} and scores y_t.
struct ElboGraph {
  Var elbo;
  std::vector<Var> recon;
  std::vector<Var> kl;
  std::vector<Var> z;  // z_1..z_T
  std::vector<Var> q_mu, q_var, p_mu, p_var, alpha;
};

/// Builds the single-sample ELBO sum_t log N(y_t | mu_y(z_{t+1}), I) - beta * sum_t KL(q || p).
/// When `x` is null only the posterior path is built (no prior, no KL, no recon).
inline ElboGraph build_graph(Tape& tape, const Vars& v, const AdssmConfig& cfg, const Segments* x, const Segments& y,
                             double beta, std::uint64_t seed) {
  const std::size_t T = y.size();
  auto eps_rng = num::make_stream(seed, "adssm.posterior");
  const auto enc = net::encode(tape, v, y, cfg.hidden);
  std::optional<net::AttentionInputs> att;
  if (x) att = net::attention_inputs(tape, v, *x);
  ElboGraph gph;
  Var z = tape.constant(Tensor::zeros({cfg.latent}));
  std::vector<Var> terms;
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t s = window_start(cfg.window, t);
    auto [qm, qv] = net::posterior(v, z, enc.h[s], enc.g[s]);
    gph.q_mu.push_back(qm);
    gph.q_var.push_back(qv);
    if (x) {
      auto [c, alpha] = net::attention(v, z, *att);
      auto [pm, pv] = net::transition(v, z, c);
      gph.p_mu.push_back(pm);
      gph.p_var.push_back(pv);
      gph.alpha.push_back(alpha);
      gph.kl.push_back(num::kl_diag_gaussian(qm, qv, pm, pv));
    }
    const auto eps = num::standard_normal(eps_rng, cfg.latent);
    z = num::reparam(qm, qv, Tensor::vector(eps));
    gph.z.push_back(z);
    if (x) {
      Var yt = tape.constant(Tensor::vector(y[t]));
      gph.recon.push_back(num::gaussian_loglik_unit(yt, net::emission(v, z)));
      terms.push_back(gph.recon.back());
      terms.push_back(num::scale(gph.kl.back(), -beta));
    }
  }
  if (x) gph.elbo = num::sum(num::concat(terms));
  return gph;
}

struct ElboResult {
  double value = 0.0;
  double recon = 0.0;  // sum of per-step reconstruction log-likelihoods
  double kl = 0.0;     // sum of per-step KL terms (unweighted)
  std::vector<double> recon_per_step;
  std::vector<double> kl_per_step;
};

inline void check_pair(const AdssmConfig& cfg, const Segments& x, const Segments& y) {
  if (x.size() != y.size()) {
    throw ShapeError("elbo: x has " + std::to_string(x.size()) + " segments but y has " + std::to_string(y.size()));
  }
  if (x.empty()) throw ShapeError("elbo: empty sequence");
  check_segments(x, cfg.seg_len, "elbo x");
  check_segments(y, cfg.seg_len, "elbo y");
}

inline ElboResult summarise(const ElboGraph& g) {
  ElboResult r;
  r.value = g.elbo.value().item();
  for (Var v : g.recon) r.recon_per_step.push_back(v.value().item());
  for (Var v : g.kl) r.kl_per_step.push_back(v.value().item());
  for (double v : r.recon_per_step) r.recon += v;
  for (double v : r.kl_per_step) r.kl += v;
  return r;
}

inline ElboResult elbo(const num::ParamSet& ps, const AdssmConfig& cfg, const Segments& x, const Segments& y,
                       double beta, std::uint64_t seed) {
  check_pair(cfg, x, y);
  Tape tape;
  const auto v = bind(tape, ps, false);
  return summarise(build_graph(tape, v, cfg, &x, y, beta, seed));
}

/// ELBO and its gradient with respect to every parameter, in ParamSet::flatten() layout.
inline std::pair<ElboResult, std::vector<double>> elbo_grad(const num::ParamSet& ps, const AdssmConfig& cfg,
                                                            const Segments& x, const Segments& y, double beta,
                                                            std::uint64_t seed) {
  check_pair(cfg, x, y);
  Tape tape;
  const auto v = bind(tape, ps, true);
  const auto g = build_graph(tape, v, cfg, &x, y, beta, seed);
  tape.backward(g.elbo);
  std::vector<double> grad(ps.total_size(), 0.0);
  for (std::size_t i = 0; i < ps.count(); ++i) {
    const auto gv = tape.grad_view(v.all[i]);
    std::copy(gv.begin(), gv.end(), grad.begin() + static_cast<std::ptrdiff_t>(ps.offset(i)));
  }
  return {summarise(g), std::move(grad)};
}

/// Latent trajectory with the distributions that produced it.
struct LatentPath {
  std::vector<std::vector<double>> z;      // z_1..z_T
  std::vector<num::DiagGaussian> prior;      // p(z_{t+1} | z_t, c_{t+1}); empty when not evaluated
  std::vector<num::DiagGaussian> posterior;  // q(z_{t+1} | z_t, window); empty in translation
  std::vector<std::vector<double>> attention;  // T x T, row t = weights for query z_t
};

inline num::DiagGaussian to_gaussian(Var mu, Var var) { return {mu.value().values(), var.value().values()}; }

/// Posterior path alone, sampled with the same stream as elbo().
inline LatentPath infer_posterior(const num::ParamSet& ps, const AdssmConfig& cfg, const Segments& y,
                                  std::uint64_t seed) {
  if (y.empty()) throw ShapeError("infer_posterior: empty sequence");
  check_segments(y, cfg.seg_len, "infer_posterior");
  Tape tape;
  const auto v = bind(tape, ps, false);
  const auto g = build_graph(tape, v, cfg, nullptr, y, 0.0, seed);
  LatentPath p;
  for (std::size_t t = 0; t < y.size(); ++t) {
    p.z.push_back(g.z[t].value().values());
    p.posterior.push_back(to_gaussian(g.q_mu[t], g.q_var[t]));
  }
  return p;
}

/// Full training-time path: posterior samples with the matching priors and attention rows.
inline LatentPath latent_path(const num::ParamSet& ps, const AdssmConfig& cfg, const Segments& x, const Segments& y,
                              std::uint64_t seed) {
  check_pair(cfg, x, y);
  Tape tape;
  const auto v = bind(tape, ps, false);
  const auto g = build_graph(tape, v, cfg, &x, y, 1.0, seed);
  LatentPath p;
  for (std::size_t t = 0; t < y.size(); ++t) {
    p.z.push_back(g.z[t].value().values());
    p.posterior.push_back(to_gaussian(g.q_mu[t], g.q_var[t]));
    p.prior.push_back(to_gaussian(g.p_mu[t], g.p_var[t]));
    p.attention.push_back(g.alpha[t].value().values());
  }
  return p;
}

// ---- single blocks on plain vectors -----------------------------------------

struct AttentionResult {
  std::vector<double> context;
  std::vector<double> alpha;
};

inline AttentionResult attention_context(const num::ParamSet& ps, const AdssmConfig& cfg,
                                         const std::vector<double>& z_prev, const Segments& x) {
  if (x.empty()) throw ShapeError("attention_context: empty input sequence");
  check_segments(x, cfg.seg_len, "attention_context");
  if (z_prev.size() != cfg.latent) throw ShapeError("attention_context: z has wrong dimension");
  Tape tape;
  const auto v = bind(tape, ps, false);
  const auto in = net::attention_inputs(tape, v, x);
  auto [c, a] = net::attention(v, tape.constant(Tensor::vector(z_prev)), in);
  return {c.value().values(), a.value().values()};
}

inline num::DiagGaussian prior_transition(const num::ParamSet& ps, const AdssmConfig& cfg,
                                          const std::vector<double>& z, const std::vector<double>& c) {
  if (z.size() != cfg.latent || c.size() != cfg.seg_len) throw ShapeError("prior_transition: wrong input dimension");
  Tape tape;
  const auto v = bind(tape, ps, false);
  auto [mu, var] = net::transition(v, tape.constant(Tensor::vector(z)), tape.constant(Tensor::vector(c)));
  return to_gaussian(mu, var);
}

inline num::DiagGaussian emission(const num::ParamSet& ps, const AdssmConfig& cfg, const std::vector<double>& z) {
  if (z.size() != cfg.latent) throw ShapeError("emission: wrong latent dimension");
  Tape tape;
  const auto v = bind(tape, ps, false);
  Var mu = net::emission(v, tape.constant(Tensor::vector(z)));
  return {mu.value().values(), std::vector<double>(cfg.seg_len, 1.0)};
}

// ---- translation -------------------------------------------------------------

enum class TranslateMode { mean, sample };

inline constexpr std::size_t kTranslateSamples = 30;

struct Translation {
  Segments mean;                 // T emitted segments
  Segments spread;               // per-dimension std across draws (sample mode only)
  std::vector<std::vector<double>> attention;  // T x T, from the mean roll or the first draw
};

namespace detail {

/// One prior roll; `rng` null means take the prior mean at each step.
inline std::pair<Segments, std::vector<std::vector<double>>> roll_prior(const Vars& v, Tape& tape,
                                                                        const AdssmConfig& cfg,
                                                                        const net::AttentionInputs& in, std::size_t T,
                                                                        num::Rng* rng) {
  Segments out;
  std::vector<std::vector<double>> att;
  Var z = tape.constant(Tensor::zeros({cfg.latent}));
  for (std::size_t t = 0; t < T; ++t) {
    auto [c, alpha] = net::attention(v, z, in);
    auto [mu, var] = net::transition(v, z, c);
    if (rng) {
      z = num::reparam(mu, var, Tensor::vector(num::standard_normal(*rng, cfg.latent)));
    } else {
      z = mu;
    }
    out.push_back(net::emission(v, z).value().values());
    att.push_back(alpha.value().values());
  }
  return {std::move(out), std::move(att)};
}

}  // namespace detail

/// Generates ECG segments from PPG segments by rolling the prior from z_0 = 0.
/// Sample mode averages the emitted means of S draws and reports their spread.
inline Translation translate(const num::ParamSet& ps, const AdssmConfig& cfg, const Segments& x,
                             TranslateMode mode = TranslateMode::mean, std::uint64_t seed = 0,
                             std::size_t samples = kTranslateSamples) {
  Translation out;
  if (x.empty()) return out;
  check_segments(x, cfg.seg_len, "translate");
  Tape tape;
  const auto v = bind(tape, ps, false);
  const auto in = net::attention_inputs(tape, v, x);
  const std::size_t T = x.size();
  if (mode == TranslateMode::mean) {
    std::tie(out.mean, out.attention) = detail::roll_prior(v, tape, cfg, in, T, nullptr);
    return out;
  }
  if (samples < 2) throw ConfigError("translate: sample mode needs at least 2 draws");
  std::vector<Segments> draws;
  for (std::size_t s = 0; s < samples; ++s) {
    auto rng = num::make_stream(seed, "adssm.translate", s);
    auto [segs, att] = detail::roll_prior(v, tape, cfg, in, T, &rng);
    if (s == 0) out.attention = std::move(att);
    draws.push_back(std::move(segs));
  }
  const double n = static_cast<double>(samples);
  out.mean.assign(T, std::vector<double>(cfg.seg_len, 0.0));
  out.spread.assign(T, std::vector<double>(cfg.seg_len, 0.0));
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t l = 0; l < cfg.seg_len; ++l) {
      double m = 0.0;
      for (const auto& d : draws) m += d[t][l];
      m /= n;
      double ss = 0.0;
      for (const auto& d : draws) ss += (d[t][l] - m) * (d[t][l] - m);
      out.mean[t][l] = m;
      out.spread[t][l] = std::sqrt(ss / (n - 1.0));
    }
  }
  return out;
}

}  // namespace physio::adssm
