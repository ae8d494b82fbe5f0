#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "physio/cardiosynth/io.hpp"
#include "physio/ddm/fit.hpp"

namespace physio::ddm {

/// rt_s,choice with choice 0 = lower, 1 = upper.
inline void write_trials_csv(const std::filesystem::path& path, std::span<const Trial> trials) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "rt_s,choice\n";
  for (const auto& t : trials) out << synth::format_double(t.rt) << ',' << static_cast<int>(t.choice) << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

inline std::vector<Trial> read_trials_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "rt_s,choice") throw FormatError(path.string() + ": expected header 'rt_s,choice', got '" + line + "'");
  std::vector<Trial> trials;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw FormatError(where + ": expected two columns");
    const double rt = synth::parse_double(std::string_view(line).substr(0, comma), where);
    const auto c = line.substr(comma + 1);
    if (c != "0" && c != "1") throw FormatError(where + ": choice must be 0 or 1, got '" + c + "'");
    if (!(rt > 0.0) || !std::isfinite(rt)) throw FormatError(where + ": rt must be finite and > 0");
    trials.push_back({rt, c == "1" ? Choice::upper : Choice::lower});
  }
  return trials;
}

inline nlohmann::json to_json(const DdmParams& p) {
  return {{"alpha", p.alpha}, {"tau", p.tau}, {"delta", p.delta}, {"bias", p.bias}};
}

inline DdmParams params_from_json(const nlohmann::json& j) {
  DdmParams p{j.at("alpha").get<double>(), j.at("tau").get<double>(), j.at("delta").get<double>(),
              j.value("bias", 0.5)};
  p.validate();
  return p;
}

inline nlohmann::json to_json(const FitResult& r) {
  return {{"params", to_json(r.params)},
          {"loglik", r.loglik},
          {"init_loglik", r.init_loglik},
          {"iterations", r.iterations},
          {"converged", r.converged}};
}

}  // namespace physio::ddm
