#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <initializer_list>
#include <numbers>
#include <span>
#include <vector>

#include "physio/numcore/tensor.hpp"

namespace physio::num {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Single-owner record of primitive operations for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so the record is topologically
/// sorted by construction and backward() is one reverse sweep. A tape must not
/// be shared between threads; independent tapes may run concurrently.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::span<const double>)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable input.
  Var leaf(Tensor value) { return push(std::move(value), true, nullptr); }

  /// Non-differentiable input.
  Var constant(Tensor value) { return push(std::move(value), false, nullptr); }

  /// Appends the result of a primitive. The backward function is kept only
  /// when at least one input is differentiable.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
    bool needs = false;
    for (const Var& v : inputs) needs = needs || requires_grad(v);
    return push(std::move(value), needs, needs ? std::move(backward) : nullptr);
  }

  Var record(Tensor value, std::span<const Var> inputs, BackwardFn backward) {
    bool needs = false;
    for (const Var& v : inputs) needs = needs || requires_grad(v);
    return push(std::move(value), needs, needs ? std::move(backward) : nullptr);
  }

  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }
  const Tensor& value(Var v) const { return nodes_[v.id()].value; }
  std::size_t size() const { return nodes_.size(); }

  /// Gradient accumulator for v, zero-initialised on first access.
  std::vector<double>& grad_buffer(Var v) {
    auto& node = nodes_[v.id()];
    if (node.grad.empty()) node.grad.assign(node.value.size(), 0.0);
    return node.grad;
  }

  /// Reverse sweep from a scalar output. Gradients from a previous call are discarded.
  void backward(Var output) {
    if (output.tape() != this) throw Error("backward: variable belongs to another tape");
    if (value(output).size() != 1) {
      throw ShapeError("backward requires a scalar output, got shape " +
                       to_string(value(output).shape()));
    }
    for (auto& node : nodes_) node.grad.clear();
    grad_buffer(output)[0] = 1.0;
    for (std::size_t id = output.id() + 1; id-- > 0;) {
      auto& node = nodes_[id];
      if (node.grad.empty() || !node.backward) continue;
      node.backward(*this, node.grad);
    }
  }

  /// Gradient of the last backward() output w.r.t. v; zeros when v was not reached.
  Tensor grad(Var v) const {
    const auto& node = nodes_[v.id()];
    if (node.grad.empty()) return Tensor::zeros(node.value.shape());
    return Tensor(node.value.shape(), node.grad);
  }

  /// Raw view of the accumulated gradient; empty when v was not reached.
  std::span<const double> grad_view(Var v) const { return nodes_[v.id()].grad; }

 private:
  struct Node {
    Tensor value;
    bool requires_grad;
    BackwardFn backward;
    std::vector<double> grad;
  };

  Var push(Tensor value, bool requires_grad, BackwardFn backward) {
    nodes_.push_back(Node{std::move(value), requires_grad, std::move(backward), {}});
    return Var(this, nodes_.size() - 1);
  }

  std::deque<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape_->value(*this); }

namespace detail {

inline Tape& same_tape(Var a, Var b) {
  if (a.tape() != b.tape() || a.tape() == nullptr) throw Error("operands recorded on different tapes");
  return *a.tape();
}

inline void require_same_shape(const char* op, Var a, Var b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

/// Elementwise map y = f(x) with dy/dx expressed through (x, y).
template <class F, class D>
Var unary(Var a, F f, D dfdx) {
  const auto& x = a.value().values();
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  Tape& t = *a.tape();
  Tensor out(a.shape(), std::move(y));
  Tensor out_copy = out;
  return t.record(std::move(out), {a}, [a, out_copy, dfdx](Tape& tp, std::span<const double> g) {
    if (!tp.requires_grad(a)) return;
    auto& ga = tp.grad_buffer(a);
    const auto& xv = a.value().values();
    const auto& yv = out_copy.values();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * dfdx(xv[i], yv[i]);
  });
}

inline double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double stable_softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

}  // namespace detail

// ---- elementwise binary -------------------------------------------------

inline Var add(Var a, Var b) {
  detail::require_same_shape("add", a, b);
  Tape& t = detail::same_tape(a, b);
  const auto& x = a.value().values();
  const auto& y = b.value().values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  return t.record(Tensor(a.shape(), std::move(out)), {a, b}, [a, b](Tape& tp, std::span<const double> g) {
    for (Var v : {a, b}) {
      if (!tp.requires_grad(v)) continue;
      auto& gv = tp.grad_buffer(v);
      for (std::size_t i = 0; i < gv.size(); ++i) gv[i] += g[i];
    }
  });
}

inline Var sub(Var a, Var b) {
  detail::require_same_shape("sub", a, b);
  Tape& t = detail::same_tape(a, b);
  const auto& x = a.value().values();
  const auto& y = b.value().values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  return t.record(Tensor(a.shape(), std::move(out)), {a, b}, [a, b](Tape& tp, std::span<const double> g) {
    if (tp.requires_grad(a)) {
      auto& ga = tp.grad_buffer(a);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
    }
    if (tp.requires_grad(b)) {
      auto& gb = tp.grad_buffer(b);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
    }
  });
}

/// Elementwise (Hadamard) product.
inline Var mul(Var a, Var b) {
  detail::require_same_shape("mul", a, b);
  Tape& t = detail::same_tape(a, b);
  const auto& x = a.value().values();
  const auto& y = b.value().values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  return t.record(Tensor(a.shape(), std::move(out)), {a, b}, [a, b](Tape& tp, std::span<const double> g) {
    const auto& xv = a.value().values();
    const auto& yv = b.value().values();
    if (tp.requires_grad(a)) {
      auto& ga = tp.grad_buffer(a);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * yv[i];
    }
    if (tp.requires_grad(b)) {
      auto& gb = tp.grad_buffer(b);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * xv[i];
    }
  });
}

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

/// c * a
inline Var scale(Var a, double c) {
  return detail::unary(a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

/// a + c
inline Var shift(Var a, double c) {
  return detail::unary(a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

// ---- elementwise unary --------------------------------------------------

inline Var tanh(Var a) {
  return detail::unary(a, [](double x) { return std::tanh(x); },
                       [](double, double y) { return 1.0 - y * y; });
}

inline Var sigmoid(Var a) {
  return detail::unary(a, detail::stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

inline Var relu(Var a) {
  return detail::unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
                       [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

/// log(1 + e^x), evaluated without overflow for large |x|.
inline Var softplus(Var a) {
  return detail::unary(a, detail::stable_softplus,
                       [](double x, double) { return detail::stable_sigmoid(x); });
}

inline Var exp(Var a) {
  return detail::unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

inline Var log(Var a) {
  return detail::unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

inline Var sqrt(Var a) {
  return detail::unary(a, [](double x) { return std::sqrt(x); },
                       [](double, double y) { return 0.5 / y; });
}

inline Var square(Var a) {
  return detail::unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

// ---- linear algebra -----------------------------------------------------

/// Matrix-matrix ({m,n}x{n,p}) or matrix-vector ({m,n}x{n}) product.
inline Var matmul(Var a, Var b) {
  Tape& t = detail::same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const bool mat_vec = av.rank() == 2 && bv.rank() == 1;
  const bool mat_mat = av.rank() == 2 && bv.rank() == 2;
  if ((!mat_vec && !mat_mat) || av.shape()[1] != bv.shape()[0]) {
    throw ShapeError("matmul: cannot multiply " + to_string(av.shape()) + " by " + to_string(bv.shape()));
  }
  const std::size_t m = av.shape()[0];
  const std::size_t n = av.shape()[1];
  const std::size_t p = mat_vec ? 1 : bv.shape()[1];
  const double* A = av.data().data();
  const double* B = bv.data().data();
  std::vector<double> out(m * p, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * p;
    for (std::size_t k = 0; k < n; ++k) {
      const double aik = A[i * n + k];
      const double* brow = B + k * p;
      for (std::size_t j = 0; j < p; ++j) row[j] += aik * brow[j];
    }
  }
  Shape shape = mat_vec ? Shape{m} : Shape{m, p};
  return t.record(Tensor(std::move(shape), std::move(out)), {a, b},
                  [a, b, m, n, p](Tape& tp, std::span<const double> g) {
                    const double* A = a.value().data().data();
                    const double* B = b.value().data().data();
                    if (tp.requires_grad(a)) {
                      auto& ga = tp.grad_buffer(a);  // g * B^T
                      for (std::size_t i = 0; i < m; ++i) {
                        for (std::size_t k = 0; k < n; ++k) {
                          double acc = 0.0;
                          for (std::size_t j = 0; j < p; ++j) acc += g[i * p + j] * B[k * p + j];
                          ga[i * n + k] += acc;
                        }
                      }
                    }
                    if (tp.requires_grad(b)) {
                      auto& gb = tp.grad_buffer(b);  // A^T * g
                      for (std::size_t i = 0; i < m; ++i) {
                        for (std::size_t k = 0; k < n; ++k) {
                          const double aik = A[i * n + k];
                          for (std::size_t j = 0; j < p; ++j) gb[k * p + j] += aik * g[i * p + j];
                        }
                      }
                    }
                  });
}

/// W x + b for W {m,n}, x {n}, b {m}; the fused form of a dense layer.
inline Var affine(Var W, Var x, Var b) {
  Tape& t = detail::same_tape(W, x);
  detail::same_tape(W, b);
  const Tensor& Wv = W.value();
  if (Wv.rank() != 2 || x.value().rank() != 1 || b.value().rank() != 1 ||
      Wv.shape()[1] != x.size() || Wv.shape()[0] != b.size()) {
    throw ShapeError("affine: incompatible shapes W" + to_string(Wv.shape()) + " x" +
                     to_string(x.shape()) + " b" + to_string(b.shape()));
  }
  const std::size_t m = Wv.shape()[0];
  const std::size_t n = Wv.shape()[1];
  const double* A = Wv.data().data();
  const double* xv = x.value().data().data();
  const double* bv = b.value().data().data();
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = A + i * n;
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) acc += row[k] * xv[k];
    out[i] = acc + bv[i];
  }
  return t.record(Tensor(Shape{m}, std::move(out)), {W, x, b},
                  [W, x, b, m, n](Tape& tp, std::span<const double> g) {
                    if (tp.requires_grad(W)) {
                      auto& gW = tp.grad_buffer(W);
                      const double* xv = x.value().data().data();
                      for (std::size_t i = 0; i < m; ++i) {
                        const double gi = g[i];
                        if (gi == 0.0) continue;
                        double* row = gW.data() + i * n;
                        for (std::size_t k = 0; k < n; ++k) row[k] += gi * xv[k];
                      }
                    }
                    if (tp.requires_grad(x)) {
                      auto& gx = tp.grad_buffer(x);
                      const double* A = W.value().data().data();
                      for (std::size_t i = 0; i < m; ++i) {
                        const double gi = g[i];
                        if (gi == 0.0) continue;
                        const double* row = A + i * n;
                        for (std::size_t k = 0; k < n; ++k) gx[k] += gi * row[k];
                      }
                    }
                    if (tp.requires_grad(b)) {
                      auto& gb = tp.grad_buffer(b);
                      for (std::size_t i = 0; i < m; ++i) gb[i] += g[i];
                    }
                  });
}

/// Concatenation of scalars and vectors into one vector.
inline Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  Tape& t = *parts.front().tape();
  std::vector<double> out;
  std::vector<std::size_t> offsets;
  for (const Var& v : parts) {
    if (v.tape() != &t) throw Error("operands recorded on different tapes");
    if (v.value().rank() > 1) throw ShapeError("concat: operand of shape " + to_string(v.shape()) + " is not a vector");
    offsets.push_back(out.size());
    const auto& d = v.value().values();
    out.insert(out.end(), d.begin(), d.end());
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return t.record(Tensor::vector(std::move(out)), parts,
                  [inputs, offsets](Tape& tp, std::span<const double> g) {
                    for (std::size_t k = 0; k < inputs.size(); ++k) {
                      if (!tp.requires_grad(inputs[k])) continue;
                      auto& gv = tp.grad_buffer(inputs[k]);
                      for (std::size_t i = 0; i < gv.size(); ++i) gv[i] += g[offsets[k] + i];
                    }
                  });
}

inline Var concat(std::initializer_list<Var> parts) {
  return concat(std::span<const Var>(parts.begin(), parts.size()));
}

/// Softmax over one axis of a vector (axis 0) or matrix (axis 0 or 1).
inline Var softmax(Var a, std::size_t axis = 0) {
  const Tensor& av = a.value();
  if (av.rank() > 2 || (av.rank() > 0 && axis >= av.rank()) || (av.rank() == 0 && axis != 0)) {
    throw ShapeError("softmax: axis " + std::to_string(axis) + " invalid for shape " + to_string(av.shape()));
  }
  // Slices are described by (count, length, stride) over the flat buffer.
  std::size_t count = 1, length = av.size(), outer_stride = 0, stride = 1;
  if (av.rank() == 2) {
    const std::size_t r = av.shape()[0], c = av.shape()[1];
    if (axis == 1) { count = r; length = c; outer_stride = c; stride = 1; }
    else { count = c; length = r; outer_stride = 1; stride = c; }
  }
  const auto& x = av.values();
  std::vector<double> y(x.size());
  for (std::size_t s = 0; s < count; ++s) {
    const std::size_t base = s * outer_stride;
    double mx = x[base];
    for (std::size_t i = 1; i < length; ++i) mx = std::max(mx, x[base + i * stride]);
    double z = 0.0;
    for (std::size_t i = 0; i < length; ++i) {
      const double e = std::exp(x[base + i * stride] - mx);
      y[base + i * stride] = e;
      z += e;
    }
    for (std::size_t i = 0; i < length; ++i) y[base + i * stride] /= z;
  }
  Tensor out(av.shape(), std::move(y));
  Tensor yv = out;
  return a.tape()->record(std::move(out), {a},
                          [a, yv, count, length, outer_stride, stride](Tape& tp, std::span<const double> g) {
                            auto& ga = tp.grad_buffer(a);
                            const auto& y = yv.values();
                            for (std::size_t s = 0; s < count; ++s) {
                              const std::size_t base = s * outer_stride;
                              double dotp = 0.0;
                              for (std::size_t i = 0; i < length; ++i) {
                                const std::size_t k = base + i * stride;
                                dotp += g[k] * y[k];
                              }
                              for (std::size_t i = 0; i < length; ++i) {
                                const std::size_t k = base + i * stride;
                                ga[k] += y[k] * (g[k] - dotp);
                              }
                            }
                          });
}

// ---- reductions and slicing --------------------------------------------

inline Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return a.tape()->record(Tensor::scalar(s), {a}, [a](Tape& tp, std::span<const double> g) {
    auto& ga = tp.grad_buffer(a);
    for (double& v : ga) v += g[0];
  });
}

inline Var dot(Var a, Var b) {
  detail::require_same_shape("dot", a, b);
  Tape& t = detail::same_tape(a, b);
  const auto& x = a.value().values();
  const auto& y = b.value().values();
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return t.record(Tensor::scalar(s), {a, b}, [a, b](Tape& tp, std::span<const double> g) {
    const auto& xv = a.value().values();
    const auto& yv = b.value().values();
    if (tp.requires_grad(a)) {
      auto& ga = tp.grad_buffer(a);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0] * yv[i];
    }
    if (tp.requires_grad(b)) {
      auto& gb = tp.grad_buffer(b);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[0] * xv[i];
    }
  });
}

/// Contiguous sub-vector [begin, begin+length).
inline Var slice(Var a, std::size_t begin, std::size_t length) {
  if (a.value().rank() > 1 || length == 0 || begin + length > a.size()) {
    throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(begin + length) +
                     ") invalid for shape " + to_string(a.shape()));
  }
  const auto& x = a.value().values();
  std::vector<double> out(x.begin() + static_cast<std::ptrdiff_t>(begin),
                          x.begin() + static_cast<std::ptrdiff_t>(begin + length));
  return a.tape()->record(Tensor::vector(std::move(out)), {a}, [a, begin](Tape& tp, std::span<const double> g) {
    auto& ga = tp.grad_buffer(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[begin + i] += g[i];
  });
}

// ---- probabilistic terms ------------------------------------------------

/// KL( N(mq, diag vq) || N(mp, diag vp) ) summed over dimensions.
inline Var kl_diag_gaussian(Var mq, Var vq, Var mp, Var vp) {
  for (Var v : {vq, mp, vp}) detail::require_same_shape("kl_diag_gaussian", mq, v);
  Tape& t = *mq.tape();
  const auto& m1 = mq.value().values();
  const auto& v1 = vq.value().values();
  const auto& m2 = mp.value().values();
  const auto& v2 = vp.value().values();
  double kl = 0.0;
  for (std::size_t i = 0; i < m1.size(); ++i) {
    const double d = m1[i] - m2[i];
    kl += 0.5 * (std::log(v2[i] / v1[i]) + (v1[i] + d * d) / v2[i] - 1.0);
  }
  const Var in[] = {mq, vq, mp, vp};
  return t.record(Tensor::scalar(kl), std::span<const Var>(in),
                  [mq, vq, mp, vp](Tape& tp, std::span<const double> g) {
                    const auto& m1 = mq.value().values();
                    const auto& v1 = vq.value().values();
                    const auto& m2 = mp.value().values();
                    const auto& v2 = vp.value().values();
                    const std::size_t n = m1.size();
                    const double g0 = g[0];
                    if (tp.requires_grad(mq)) {
                      auto& gb = tp.grad_buffer(mq);
                      for (std::size_t i = 0; i < n; ++i) gb[i] += g0 * (m1[i] - m2[i]) / v2[i];
                    }
                    if (tp.requires_grad(mp)) {
                      auto& gb = tp.grad_buffer(mp);
                      for (std::size_t i = 0; i < n; ++i) gb[i] -= g0 * (m1[i] - m2[i]) / v2[i];
                    }
                    if (tp.requires_grad(vq)) {
                      auto& gb = tp.grad_buffer(vq);
                      for (std::size_t i = 0; i < n; ++i) gb[i] += g0 * 0.5 * (1.0 / v2[i] - 1.0 / v1[i]);
                    }
                    if (tp.requires_grad(vp)) {
                      auto& gb = tp.grad_buffer(vp);
                      for (std::size_t i = 0; i < n; ++i) {
                        const double d = m1[i] - m2[i];
                        gb[i] += g0 * 0.5 * (1.0 / v2[i] - (v1[i] + d * d) / (v2[i] * v2[i]));
                      }
                    }
                  });
}

/// log N(y | mu, I).
inline Var gaussian_loglik_unit(Var y, Var mu) {
  detail::require_same_shape("gaussian_loglik_unit", y, mu);
  Tape& t = detail::same_tape(y, mu);
  const auto& yv = y.value().values();
  const auto& mv = mu.value().values();
  double ss = 0.0;
  for (std::size_t i = 0; i < yv.size(); ++i) {
    const double r = yv[i] - mv[i];
    ss += r * r;
  }
  const double value =
      -0.5 * ss - 0.5 * static_cast<double>(yv.size()) * std::log(2.0 * std::numbers::pi);
  return t.record(Tensor::scalar(value), {y, mu}, [y, mu](Tape& tp, std::span<const double> g) {
    const auto& yv = y.value().values();
    const auto& mv = mu.value().values();
    if (tp.requires_grad(mu)) {
      auto& gm = tp.grad_buffer(mu);
      for (std::size_t i = 0; i < gm.size(); ++i) gm[i] += g[0] * (yv[i] - mv[i]);
    }
    if (tp.requires_grad(y)) {
      auto& gy = tp.grad_buffer(y);
      for (std::size_t i = 0; i < gy.size(); ++i) gy[i] -= g[0] * (yv[i] - mv[i]);
    }
  });
}

}  // namespace physio::num
