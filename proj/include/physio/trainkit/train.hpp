#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <thread>
#include <vector>

#include "physio/adssm/model.hpp"
#include "physio/numcore/adam.hpp"
#include "physio/numcore/random.hpp"
#include "physio/trainkit/checkpoint.hpp"
#include "physio/trainkit/config.hpp"

namespace physio::trainkit {

/// One aligned sequence pair: PPG segments in, ECG segments out.
struct Example {
  adssm::Segments x;
  adssm::Segments y;
};

struct Dataset {
  std::vector<Example> train;
  std::vector<Example> val;
};

struct RunOptions {
  std::size_t threads = 1;
  bool timing = false;  // record wall_ms; off keeps histories byte-stable
  /// Called after every epoch with the updated state.
  std::function<void(const TrainState&)> on_epoch;
};

inline TrainState fresh_state(const adssm::AdssmConfig& model, const TrainConfig& cfg) {
  cfg.validate();
  return {model, cfg, adssm::init_params(model, num::derive_seed(cfg.seed, "train.init")), {}, 0, {}};
}

/// Applies `fn(i)` for i in [0, n), striped over `threads` workers.
template <class F>
void parallel_for(std::size_t n, std::size_t threads, F&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += threads) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Mean per-sequence ELBO at weight `beta`, each example with its own sampling seed.
inline double mean_elbo(const num::ParamSet& ps, const adssm::AdssmConfig& model, const std::vector<Example>& data,
                        double beta, std::uint64_t seed, std::size_t threads) {
  if (data.empty()) return 0.0;
  std::vector<double> v(data.size());
  parallel_for(data.size(), threads, [&](std::size_t i) {
    v[i] = adssm::elbo(ps, model, data[i].x, data[i].y, beta, num::derive_seed(seed, "example", i)).value;
  });
  double s = 0.0;
  for (double e : v) s += e;
  return s / static_cast<double>(data.size());
}

/// Throws NumericError naming the first tensor whose gradient is not finite.
inline void check_finite_grad(const num::ParamSet& ps, const std::vector<double>& g, double loss) {
  for (std::size_t i = 0; i < ps.count(); ++i) {
    const auto first = g.begin() + static_cast<std::ptrdiff_t>(ps.offset(i));
    if (!std::all_of(first, first + static_cast<std::ptrdiff_t>(ps.value(i).size()),
                     [](double v) { return std::isfinite(v); })) {
      throw NumericError("non-finite gradient in tensor '" + ps.name(i) + "' (batch ELBO " + std::to_string(loss) +
                         ")");
    }
  }
  if (!std::isfinite(loss)) throw NumericError("non-finite batch ELBO " + std::to_string(loss));
}

/// Scales `g` in place so its Euclidean norm is at most `max_norm`; returns the original norm.
inline double clip_global_norm(std::vector<double>& g, double max_norm) {
  double ss = 0.0;
  for (double v : g) ss += v * v;
  const double norm = std::sqrt(ss);
  if (max_norm > 0.0 && norm > max_norm) {
    const double f = max_norm / norm;
    for (auto& v : g) v *= f;
  }
  return norm;
}

/// Runs epochs state.epoch .. cfg.epochs - 1, ascending the minibatch-mean ELBO with Adam.
inline void train(const Dataset& data, TrainState& state, const RunOptions& opt = {}) {
  const TrainConfig& cfg = state.train;
  cfg.validate();
  adssm::check_params(state.params, state.model);
  if (data.train.empty()) throw ConfigError("train: empty training set");
  if (data.val.empty()) throw ConfigError("train: empty validation set");
  const std::size_t n = data.train.size(), P = state.params.total_size();
  const auto adam_cfg = cfg.adam();

  for (std::size_t epoch = state.epoch; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double beta = kl_anneal(epoch, cfg);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    auto shuffle_rng = num::make_stream(cfg.seed, "train.shuffle", epoch);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    const std::uint64_t sample_seed = num::derive_seed(cfg.seed, "train.elbo", epoch);

    double elbo_sum = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch) {
      const std::size_t bsz = std::min(cfg.batch, n - start);
      std::vector<std::vector<double>> grads(bsz);
      std::vector<double> values(bsz);
      parallel_for(bsz, opt.threads, [&](std::size_t k) {
        const std::size_t i = order[start + k];
        auto [r, g] = adssm::elbo_grad(state.params, state.model, data.train[i].x, data.train[i].y, beta,
                                       num::derive_seed(sample_seed, "example", i));
        values[k] = r.value;
        grads[k] = std::move(g);
      });
      // Fixed reduction order keeps threaded runs bitwise equal to serial ones.
      std::vector<double> g(P, 0.0);
      double batch_elbo = 0.0;
      for (std::size_t k = 0; k < bsz; ++k) {
        batch_elbo += values[k];
        for (std::size_t j = 0; j < P; ++j) g[j] += grads[k][j];
      }
      // Descent on -ELBO averaged over the batch.
      const double inv = -1.0 / static_cast<double>(bsz);
      for (auto& v : g) v *= inv;
      check_finite_grad(state.params, g, batch_elbo / static_cast<double>(bsz));
      clip_global_norm(g, cfg.grad_clip_norm);
      num::adam_step(state.params, g, state.adam, adam_cfg);
      elbo_sum += batch_elbo;
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.beta = beta;
    rec.train_elbo = elbo_sum / static_cast<double>(n);
    rec.val_elbo = mean_elbo(state.params, state.model, data.val, 1.0, num::derive_seed(cfg.seed, "val.elbo"),
                             opt.threads);
    if (opt.timing) {
      rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    }
    state.history.push_back(rec);
    state.epoch = epoch + 1;
    if (opt.on_epoch) opt.on_epoch(state);
  }
}

}  // namespace physio::trainkit
