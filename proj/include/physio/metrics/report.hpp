#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "physio/error.hpp"

namespace physio::metrics {

/// Per-record metric values, summarised as mean and sample standard deviation.
class MetricReport {
 public:
  struct Summary {
    double mean;
    double std;
    std::size_t count;
  };

  /// Adds one record. The first record fixes the metric names and their order.
  void add_record(const std::vector<std::pair<std::string, double>>& values) {
    if (names_.empty() && columns_.empty()) {
      for (const auto& [name, v] : values) {
        names_.push_back(name);
        columns_.emplace_back();
      }
    }
    if (values.size() != names_.size()) {
      throw ShapeError("metric report: record has " + std::to_string(values.size()) + " metrics, expected " +
                       std::to_string(names_.size()));
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (values[i].first != names_[i]) {
        throw ShapeError("metric report: metric '" + values[i].first + "' where '" + names_[i] + "' was expected");
      }
      columns_[i].push_back(values[i].second);
    }
  }

  std::size_t records() const { return columns_.empty() ? 0 : columns_.front().size(); }
  const std::vector<std::string>& names() const { return names_; }

  const std::vector<double>& values(const std::string& name) const { return columns_.at(index(name)); }

  Summary summary(const std::string& name) const {
    const auto& col = values(name);
    if (col.empty()) throw ShapeError("metric report: no records");
    const double n = static_cast<double>(col.size());
    double mean = 0.0;
    for (double v : col) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : col) ss += (v - mean) * (v - mean);
    const double sd = col.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    return {mean, sd, col.size()};
  }

  /// Non-finite numbers are written as the strings "inf", "-inf" or "nan".
  nlohmann::json to_json() const {
    nlohmann::json j{{"n_records", records()}, {"metrics", nlohmann::json::object()}};
    for (const auto& name : names_) {
      const auto s = summary(name);
      nlohmann::json vals = nlohmann::json::array();
      for (double v : values(name)) vals.push_back(number(v));
      j["metrics"][name] = {{"mean", number(s.mean)}, {"std", number(s.std)}, {"values", vals}};
    }
    return j;
  }

  /// Two-column "metric  mean ± std" table.
  std::string to_table() const {
    std::string out = "metric          mean ± std\n";
    for (const auto& name : names_) {
      const auto s = summary(name);
      char line[160];
      std::snprintf(line, sizeof line, "%-15s %.3f ± %.3f\n", name.c_str(), s.mean, s.std);
      out += line;
    }
    out += "records: " + std::to_string(records()) + "\n";
    return out;
  }

 private:
  std::size_t index(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (names_[i] == name) return i;
    }
    throw ShapeError("metric report: unknown metric '" + name + "'");
  }

  static nlohmann::json number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
  }

  std::vector<std::string> names_;
  std::vector<std::vector<double>> columns_;
};

}  // namespace physio::metrics
