#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "byzsim/optimizer.hpp"

namespace byzsim {

inline std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// CSV schema: step,loss,grad_norm_sq,agg_error,accuracy,zeta_hat_sq,b_hat_ratio.
/// Accuracy is empty for tasks without a classification split.
inline void write_metrics_csv(const RunMetrics& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "step,loss,grad_norm_sq,agg_error,accuracy,zeta_hat_sq,b_hat_ratio\n";
  for (const StepRecord& r : m.records) {
    out << r.step << ',' << format_double(r.loss) << ','
        << format_double(r.grad_norm_sq) << ',' << format_double(r.agg_error) << ',';
    if (r.accuracy) out << format_double(*r.accuracy);
    out << ',' << format_double(r.zeta_hat_sq) << ','
        << format_double(r.b_hat_ratio) << '\n';
  }
}

inline std::string run_id(const std::string& config_text, std::uint64_t seed) {
  // FNV-1a over the config echo plus seed
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](unsigned char c) {
    h ^= c;
    h *= 1099511628211ULL;
  };
  for (unsigned char c : config_text) mix(c);
  for (int i = 0; i < 8; ++i) mix(static_cast<unsigned char>(seed >> (8 * i)));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// JSON sidecar: config echo, run id, and a final-window summary
/// (window default 150 steps).
inline void write_metrics_sidecar(const RunMetrics& m, const nlohmann::json& config_echo,
                                  std::uint64_t seed, const std::filesystem::path& path,
                                  std::size_t summary_window = 150) {
  nlohmann::json j;
  j["config"] = config_echo;
  j["seed"] = seed;
  j["run_id"] = run_id(config_echo.dump(), seed);
  j["summary"] = {
      {"steps", m.records.size()},
      {"diverged", m.diverged},
      {"final_loss", m.final_loss()},
      {"final_grad_norm_sq", m.final_grad_norm_sq()},
      {"mean_accuracy_final_window", m.mean_accuracy_last(summary_window)},
      {"summary_window", summary_window},
      {"b_hat_sq", m.b_hat_sq},
  };
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace byzsim
