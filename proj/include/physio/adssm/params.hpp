#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "physio/adssm/config.hpp"
#include "physio/numcore/params.hpp"
#include "physio/numcore/random.hpp"

namespace physio::adssm {

enum class Init { uniform_fan_in, orthogonal, zero };

struct ParamSpec {
  std::string name;
  num::Shape shape;
  Init init;
};

/// Every tensor of the model in checkpoint order.
inline std::vector<ParamSpec> param_specs(const AdssmConfig& cfg) {
  cfg.validate();
  const std::size_t H = cfg.hidden, Z = cfg.latent, L = cfg.seg_len, ZL = Z + L;
  std::vector<ParamSpec> s;
  auto dense = [&](const std::string& w, const std::string& b, std::size_t out, std::size_t in) {
    s.push_back({w, {out, in}, Init::uniform_fan_in});
    s.push_back({b, {out}, Init::zero});
  };
  // Alignment scores: v_s^T tanh(W_sz z + W_sx W_x x_i + b_s).
  s.push_back({"attn.W_x", {H, L}, Init::uniform_fan_in});
  s.push_back({"attn.W_sx", {H, H}, Init::uniform_fan_in});
  s.push_back({"attn.W_sz", {H, Z}, Init::uniform_fan_in});
  s.push_back({"attn.b_s", {H}, Init::zero});
  s.push_back({"attn.v_s", {H}, Init::uniform_fan_in});
  // Gated transition.
  dense("trans.W_g1", "trans.b_g1", H, ZL);
  dense("trans.W_g2", "trans.b_g2", H, H);
  dense("trans.W_g3", "trans.b_g3", Z, H);
  dense("trans.W_d1", "trans.b_d1", H, ZL);
  dense("trans.W_d2", "trans.b_d2", H, H);
  dense("trans.W_d3", "trans.b_d3", Z, H);
  dense("trans.W_mu", "trans.b_mu", Z, ZL);
  dense("trans.W_var", "trans.b_var", Z, Z);
  // Emission.
  dense("emit.W_e1", "emit.b_e1", H, Z);
  dense("emit.W_e2", "emit.b_e2", H, H);
  dense("emit.W_e3", "emit.b_e3", L, H);
  // Posterior: shared input projection, two GRUs, combiner.
  s.push_back({"post.W_y", {H, L}, Init::uniform_fan_in});
  for (const std::string dir : {"bwd", "fwd"}) {
    for (const std::string gate : {"r", "u", "n"}) {
      s.push_back({"post." + dir + ".W_" + gate, {H, H}, Init::orthogonal});
      s.push_back({"post." + dir + ".U_" + gate, {H, H}, Init::orthogonal});
      s.push_back({"post." + dir + ".b_" + gate, {H}, Init::zero});
    }
  }
  dense("post.W_h", "post.b_h", H, Z);
  dense("post.W_mu", "post.b_mu", Z, H);
  dense("post.W_var", "post.b_var", Z, H);
  return s;
}

namespace detail {

/// Rows (or columns, whichever are fewer) orthonormalised by Gram-Schmidt, then scaled.
inline std::vector<double> orthogonal(std::size_t rows, std::size_t cols, double gain, num::Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const bool by_row = rows <= cols;
  const std::size_t nvec = by_row ? rows : cols, len = by_row ? cols : rows;
  std::vector<std::vector<double>> v(nvec, std::vector<double>(len));
  for (std::size_t i = 0; i < nvec; ++i) {
    double norm = 0.0;
    do {
      for (auto& x : v[i]) x = normal(rng);
      for (std::size_t j = 0; j < i; ++j) {
        double d = 0.0;
        for (std::size_t k = 0; k < len; ++k) d += v[i][k] * v[j][k];
        for (std::size_t k = 0; k < len; ++k) v[i][k] -= d * v[j][k];
      }
      norm = 0.0;
      for (double x : v[i]) norm += x * x;
      norm = std::sqrt(norm);
    } while (norm < 1e-8);
    for (auto& x : v[i]) x /= norm;
  }
  std::vector<double> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = gain * (by_row ? v[r][c] : v[c][r]);
  }
  return out;
}

}  // namespace detail

inline constexpr double kRecurrentInitGain = 0.1;

/// Fresh parameters. Each tensor draws from its own stream, keyed by its position.
inline num::ParamSet init_params(const AdssmConfig& cfg, std::uint64_t seed) {
  num::ParamSet ps;
  const auto specs = param_specs(cfg);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& sp = specs[i];
    const std::size_t n = num::shape_size(sp.shape);
    std::vector<double> v(n, 0.0);
    auto rng = num::make_stream(seed, "adssm.init", i);
    if (sp.init == Init::uniform_fan_in) {
      const double fan_in = static_cast<double>(sp.shape.size() == 2 ? sp.shape[1] : sp.shape[0]);
      const double a = std::sqrt(1.0 / fan_in);
      std::uniform_real_distribution<double> u(-a, a);
      for (auto& x : v) x = u(rng);
    } else if (sp.init == Init::orthogonal) {
      v = detail::orthogonal(sp.shape[0], sp.shape[1], kRecurrentInitGain, rng);
    }
    ps.add(sp.name, num::Tensor(sp.shape, std::move(v)));
  }
  return ps;
}

/// Throws ShapeError unless `ps` has exactly the tensors and shapes of `cfg`.
inline void check_params(const num::ParamSet& ps, const AdssmConfig& cfg) {
  const auto specs = param_specs(cfg);
  if (ps.count() != specs.size()) {
    throw ShapeError("adssm params: expected " + std::to_string(specs.size()) + " tensors, got " +
                     std::to_string(ps.count()));
  }
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (ps.name(i) != specs[i].name) throw ShapeError("adssm params: tensor " + std::to_string(i) + " is '" + ps.name(i) + "', expected '" + specs[i].name + "'");
    if (ps.value(i).shape() != specs[i].shape) {
      throw ShapeError("adssm params: '" + specs[i].name + "' has shape " + num::to_string(ps.value(i).shape()) +
                       ", expected " + num::to_string(specs[i].shape));
    }
    if (!ps.value(i).all_finite()) throw NumericError("adssm params: '" + specs[i].name + "' is not finite");
  }
}

}  // namespace physio::adssm
