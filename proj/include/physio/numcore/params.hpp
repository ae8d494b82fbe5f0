#pragma once

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "physio/numcore/tensor.hpp"

namespace physio::num {

/// Ordered collection of named tensors. Order is insertion order and defines
/// the layout of flattened gradient / optimizer buffers.
class ParamSet {
 public:
  void add(std::string name, Tensor value) {
    if (index_.count(name)) throw ConfigError("duplicate parameter '" + name + "'");
    index_.emplace(name, values_.size());
    offsets_.push_back(total_);
    total_ += value.size();
    names_.push_back(std::move(name));
    values_.push_back(std::move(value));
  }

  std::size_t count() const { return values_.size(); }
  std::size_t total_size() const { return total_; }

  const std::string& name(std::size_t i) const { return names_[i]; }
  const Tensor& value(std::size_t i) const { return values_[i]; }
  std::size_t offset(std::size_t i) const { return offsets_[i]; }
  const std::vector<std::string>& names() const { return names_; }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::size_t index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
    return it->second;
  }

  const Tensor& operator[](const std::string& name) const { return values_[index_of(name)]; }

  /// Replaces a value; the shape must not change.
  void set(std::size_t i, Tensor value) {
    if (value.shape() != values_[i].shape()) {
      throw ShapeError("parameter '" + names_[i] + "' has shape " + to_string(values_[i].shape()) +
                       ", replacement has " + to_string(value.shape()));
    }
    values_[i] = std::move(value);
  }

  void set(const std::string& name, Tensor value) { set(index_of(name), std::move(value)); }

  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(total_);
    for (const auto& v : values_) out.insert(out.end(), v.values().begin(), v.values().end());
    return out;
  }

  /// Overwrites every tensor from a flat buffer laid out as flatten() produces.
  void assign_flat(std::span<const double> flat) {
    if (flat.size() != total_) {
      throw ShapeError("assign_flat: expected " + std::to_string(total_) + " values, got " +
                       std::to_string(flat.size()));
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
      auto first = flat.begin() + static_cast<std::ptrdiff_t>(offsets_[i]);
      std::vector<double> v(first, first + static_cast<std::ptrdiff_t>(values_[i].size()));
      values_[i] = Tensor(values_[i].shape(), std::move(v));
    }
  }

  friend bool operator==(const ParamSet& a, const ParamSet& b) {
    return a.names_ == b.names_ && a.values_ == b.values_;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
  std::vector<std::size_t> offsets_;
  std::map<std::string, std::size_t> index_;
  std::size_t total_ = 0;
};

}  // namespace physio::num
