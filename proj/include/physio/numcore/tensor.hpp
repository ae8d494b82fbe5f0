#pragma once

#include <cmath>
#include <cstddef>
#include <cstring>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "physio/error.hpp"

namespace physio::num {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

/// Dense row-major array of doubles with an immutable payload.
///
/// Copies share storage; every operation that changes values produces a new
/// Tensor, so instances can be handed to other threads without locking.
/// Rank 0 denotes a scalar (one element).
class Tensor {
 public:
  Tensor() : Tensor(Shape{}, std::vector<double>{0.0}) {}

  Tensor(Shape shape, std::vector<double> data)
      : shape_(std::move(shape)),
        data_(std::make_shared<const std::vector<double>>(std::move(data))) {
    for (auto extent : shape_) {
      if (extent == 0) throw ShapeError("tensor extent must be positive, got " + to_string(shape_));
    }
    if (shape_size(shape_) != data_->size()) {
      throw ShapeError("tensor shape " + to_string(shape_) + " does not match " +
                       std::to_string(data_->size()) + " elements");
    }
  }

  static Tensor scalar(double v) { return Tensor(Shape{}, {v}); }

  static Tensor vector(std::vector<double> v) {
    Shape s{v.size()};
    return Tensor(std::move(s), std::move(v));
  }

  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
    return Tensor(Shape{rows, cols}, std::move(v));
  }

  static Tensor zeros(Shape shape) {
    auto n = shape_size(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0));
  }

  static Tensor full(Shape shape, double value) {
    auto n = shape_size(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value));
  }

  static Tensor identity(std::size_t n) {
    std::vector<double> v(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
    return matrix(n, n, std::move(v));
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_->size(); }
  std::size_t rows() const { return rank() == 2 ? shape_[0] : size(); }
  std::size_t cols() const { return rank() == 2 ? shape_[1] : 1; }

  std::span<const double> data() const { return *data_; }
  const std::vector<double>& values() const { return *data_; }

  double operator[](std::size_t i) const { return (*data_)[i]; }
  double at(std::size_t r, std::size_t c) const { return (*data_)[r * shape_[1] + c]; }

  double item() const {
    if (size() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape_));
    return (*data_)[0];
  }

  bool all_finite() const {
    for (double v : *data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  /// Bitwise equality of shape and payload.
  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ &&
           std::memcmp(a.data_->data(), b.data_->data(), a.size() * sizeof(double)) == 0;
  }

 private:
  Shape shape_;
  std::shared_ptr<const std::vector<double>> data_;
};

}  // namespace physio::num
