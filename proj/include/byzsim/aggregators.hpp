#pragma once

#include <algorithm>
#include <limits>
#include <optional>

#include "byzsim/core.hpp"

namespace byzsim {

enum class AggregatorKind { mean, krum, cm, rfa, cclip, trimmed_mean };

inline const char* to_string(AggregatorKind k) {
  switch (k) {
    case AggregatorKind::mean: return "mean";
    case AggregatorKind::krum: return "krum";
    case AggregatorKind::cm: return "cm";
    case AggregatorKind::rfa: return "rfa";
    case AggregatorKind::cclip: return "cclip";
    case AggregatorKind::trimmed_mean: return "trimmed_mean";
  }
  return "?";
}

inline AggregatorKind aggregator_kind_from_string(const std::string& s) {
  if (s == "mean") return AggregatorKind::mean;
  if (s == "krum") return AggregatorKind::krum;
  if (s == "cm") return AggregatorKind::cm;
  if (s == "rfa") return AggregatorKind::rfa;
  if (s == "cclip") return AggregatorKind::cclip;
  if (s == "trimmed_mean") return AggregatorKind::trimmed_mean;
  throw std::invalid_argument("unknown aggregator: " + s);
}

struct AggregatorConfig {
  AggregatorKind kind = AggregatorKind::mean;
  std::size_t q = 0;               // assumed Byzantine count (krum)
  int weiszfeld_iters = 8;         // rfa
  double weiszfeld_smoothing = 1e-6;
  double clip_radius = 1.0;        // cclip
  std::size_t trim_count = 0;      // trimmed_mean; default b = q
};

/// (delta_max, c) pair certifying a robust-aggregation error bound
/// E||out - good mean||^2 <= c * delta * rho^2.
struct RobustnessCert {
  double delta_max;
  double c;
  double nu;  // free margin used to instantiate the constants
};

/// Constants for the bucketed aggregators, with the free margin nu chosen
/// to minimize c:
///   krum: c(nu) = 4/(3 nu (1/4 - nu)), min at nu = 1/8
///   rfa:  c(nu) = 1/(nu (1/2 - nu)),   min at nu = 1/4
///   cm:   c(nu) = d/(nu (1/2 - nu)),   min at nu = 1/4
inline RobustnessCert krum_cert() { return {1.0 / 8.0, 256.0 / 3.0, 1.0 / 8.0}; }
inline RobustnessCert rfa_cert() { return {1.0 / 4.0, 16.0, 1.0 / 4.0}; }
inline RobustnessCert cm_cert(std::size_t d) {
  return {1.0 / 4.0, 16.0 * static_cast<double>(d), 1.0 / 4.0};
}

inline Vec aggregate_mean(const std::vector<Vec>& msgs) { return mean(msgs); }

/// Sum of squared distances from each input to its n-q-2 nearest other
/// inputs; returns the index of the minimizer (ties -> lowest index).
inline std::size_t krum_select(const std::vector<Vec>& msgs, std::size_t q) {
  const std::size_t n = msgs.size();
  if (n < q + 3) throw std::invalid_argument("krum: need n - q - 2 >= 1");
  const std::size_t k = n - q - 2;
  const auto d = pairwise_sq_dists(msgs);
  std::size_t best = 0;
  double best_score = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row;
    row.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) row.push_back(d[i][j]);
    std::nth_element(row.begin(), row.begin() + static_cast<long>(k) - 1, row.end());
    double score = 0;
    for (std::size_t j = 0; j < k; ++j) score += row[j];
    if (score < best_score) {
      best_score = score;
      best = i;
    }
  }
  return best;
}

inline Vec aggregate_krum(const std::vector<Vec>& msgs, std::size_t q) {
  return msgs[krum_select(msgs, q)];
}

/// Coordinate-wise median; even count takes the midpoint of the two middle
/// order statistics.
inline Vec aggregate_cm(const std::vector<Vec>& msgs) {
  if (msgs.empty()) throw std::invalid_argument("empty input");
  const std::size_t n = msgs.size();
  const std::size_t d = msgs[0].size();
  Vec out(d);
  std::vector<double> col(n);
  for (std::size_t k = 0; k < d; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      require_same_dim(msgs[0], msgs[i]);
      col[i] = msgs[i][k];
    }
    std::sort(col.begin(), col.end());
    out[k] = (n % 2 == 1) ? col[n / 2] : 0.5 * (col[n / 2 - 1] + col[n / 2]);
  }
  return out;
}

/// Smoothed Weiszfeld iteration for the geometric median, T steps from the
/// coordinate-wise mean.
inline Vec aggregate_rfa(const std::vector<Vec>& msgs, int iters = 8,
                         double smoothing = 1e-6) {
  if (msgs.empty()) throw std::invalid_argument("empty input");
  if (iters < 1) throw std::invalid_argument("rfa: iters must be >= 1");
  if (smoothing <= 0) throw std::invalid_argument("rfa: smoothing must be > 0");
  Vec v = mean(msgs);
  for (int t = 0; t < iters; ++t) {
    Vec num(v.size(), 0.0);
    double den = 0;
    for (const Vec& x : msgs) {
      const double w = 1.0 / std::max(smoothing, std::sqrt(dist_sq(v, x)));
      axpy(num, w, x);
      den += w;
    }
    v = scale(num, 1.0 / den);
  }
  return v;
}

/// 1-step centered clipping around the guess v.
inline Vec aggregate_cclip(const std::vector<Vec>& msgs, const Vec& center,
                           double tau) {
  if (msgs.empty()) throw std::invalid_argument("empty input");
  if (tau <= 0) throw std::invalid_argument("cclip: tau must be > 0");
  Vec out = center;
  const double inv_n = 1.0 / static_cast<double>(msgs.size());
  for (const Vec& x : msgs) {
    const double r = std::sqrt(dist_sq(x, center));
    const double clip = (r <= tau) ? 1.0 : tau / r;
    for (std::size_t k = 0; k < out.size(); ++k)
      out[k] += inv_n * clip * (x[k] - center[k]);
  }
  return out;
}

/// Per coordinate, drop the b smallest and b largest values and average the
/// rest.
inline Vec aggregate_trimmed_mean(const std::vector<Vec>& msgs, std::size_t b) {
  if (msgs.empty()) throw std::invalid_argument("empty input");
  const std::size_t n = msgs.size();
  if (n < 2 * b + 1) throw std::invalid_argument("trimmed_mean: need n - 2b >= 1");
  const std::size_t d = msgs[0].size();
  Vec out(d);
  std::vector<double> col(n);
  for (std::size_t k = 0; k < d; ++k) {
    for (std::size_t i = 0; i < n; ++i) col[i] = msgs[i][k];
    std::sort(col.begin(), col.end());
    double s = 0;
    for (std::size_t i = b; i < n - b; ++i) s += col[i];
    out[k] = s / static_cast<double>(n - 2 * b);
  }
  return out;
}

/// ||out - mean of good messages||^2, the Definition-2 error.
inline double aggregation_error(const Vec& out, const std::vector<Vec>& msgs,
                                const std::set<std::size_t>& good) {
  return dist_sq(out, mean_of(msgs, good));
}

/// Dispatch on config. `center` is consumed by cclip only (previous round's
/// aggregate; zero at step 0).
inline Vec aggregate(const AggregatorConfig& cfg, const std::vector<Vec>& msgs,
                     const std::optional<Vec>& center = std::nullopt) {
  switch (cfg.kind) {
    case AggregatorKind::mean: return aggregate_mean(msgs);
    case AggregatorKind::krum: return aggregate_krum(msgs, cfg.q);
    case AggregatorKind::cm: return aggregate_cm(msgs);
    case AggregatorKind::rfa:
      return aggregate_rfa(msgs, cfg.weiszfeld_iters, cfg.weiszfeld_smoothing);
    case AggregatorKind::cclip: {
      Vec v = center.value_or(Vec(msgs.at(0).size(), 0.0));
      return aggregate_cclip(msgs, v, cfg.clip_radius);
    }
    case AggregatorKind::trimmed_mean:
      return aggregate_trimmed_mean(msgs, cfg.trim_count);
  }
  throw std::logic_error("unreachable");
}

}  // namespace byzsim
