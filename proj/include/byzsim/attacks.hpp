#pragma once

#include <optional>

#include "byzsim/core.hpp"

namespace byzsim {

enum class AttackKind { none, bit_flip, label_flip, mimic, ipm, alie };

inline const char* to_string(AttackKind k) {
  switch (k) {
    case AttackKind::none: return "none";
    case AttackKind::bit_flip: return "bit_flip";
    case AttackKind::label_flip: return "label_flip";
    case AttackKind::mimic: return "mimic";
    case AttackKind::ipm: return "ipm";
    case AttackKind::alie: return "alie";
  }
  return "?";
}

inline AttackKind attack_kind_from_string(const std::string& s) {
  if (s == "none") return AttackKind::none;
  if (s == "bit_flip") return AttackKind::bit_flip;
  if (s == "label_flip") return AttackKind::label_flip;
  if (s == "mimic") return AttackKind::mimic;
  if (s == "ipm") return AttackKind::ipm;
  if (s == "alie") return AttackKind::alie;
  throw std::invalid_argument("unknown attack: " + s);
}

struct AttackConfig {
  AttackKind kind = AttackKind::none;
  double epsilon = 0.1;                   // ipm strength
  std::optional<double> z_override;       // alie
  int init_phase_steps = 10;              // mimic
  bool retarget_each_step = false;        // mimic: per-step argmax variant
};

/// Standard normal CDF.
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Inverse standard normal CDF by bisection to 1e-10.
inline double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("inverse_normal_cdf: p in (0,1)");
  double lo = -40.0, hi = 40.0;
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    if (normal_cdf(mid) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

/// ALIE strength: z = Phi^{-1}((n - q - s)/(n - q)) with s = floor(n/2 + 1) - q.
inline double alie_z(std::size_t n, std::size_t q) {
  if (n < q + 2) throw std::invalid_argument("alie_z: need n - q >= 2");
  const auto s = static_cast<double>(n / 2 + 1) - static_cast<double>(q);
  const double threshold =
      (static_cast<double>(n - q) - s) / static_cast<double>(n - q);
  return inverse_normal_cdf(threshold);
}

/// Negation of the mean good message, one copy per attacker.
inline Vec attack_bit_flip(const std::vector<Vec>& good_msgs) {
  return scale(mean(good_msgs), -1.0);
}

/// Label transform T(y) = 9 - y, applied in the Byzantine data pipeline.
inline int attack_label_flip(int label, int num_classes = 10) {
  if (label < 0 || label >= num_classes)
    throw std::invalid_argument("label out of range");
  return num_classes - 1 - label;
}

/// -epsilon times the mean good message.
inline Vec attack_ipm(const std::vector<Vec>& good_msgs, double epsilon) {
  if (epsilon <= 0) throw std::invalid_argument("ipm: epsilon must be > 0");
  return scale(mean(good_msgs), -epsilon);
}

/// mu_G - z * sigma_G coordinate-wise; population standard deviation.
inline Vec attack_alie(const std::vector<Vec>& good_msgs, std::size_t n,
                       std::size_t q, std::optional<double> z_override = {}) {
  const Vec mu = mean(good_msgs);
  Vec sigma(mu.size(), 0.0);
  if (good_msgs.size() >= 2) {
    for (const Vec& x : good_msgs)
      for (std::size_t k = 0; k < mu.size(); ++k) {
        const double d = x[k] - mu[k];
        sigma[k] += d * d;
      }
    for (double& v : sigma) v = std::sqrt(v / static_cast<double>(good_msgs.size()));
  }
  const double z = z_override ? *z_override : alie_z(n, q);
  Vec out = mu;
  axpy(out, -z, sigma);
  return out;
}

/// Streaming state of the mimic attack: running mean, Oja estimate of the
/// top-variance direction, and accumulated projections for target selection.
struct MimicState {
  Vec z;       // unit vector
  Vec mu;      // running mean over steps and good workers
  std::size_t t = 0;
  std::optional<WorkerId> target;
  std::vector<double> proj_sum;  // per good worker, sum over init steps of z^T x_i
  int init_phase_steps = 10;

  static MimicState init(std::size_t dim, std::size_t n_good,
                         int init_phase_steps, std::mt19937_64& rng) {
    MimicState s;
    s.mu.assign(dim, 0.0);
    s.proj_sum.assign(n_good, 0.0);
    s.init_phase_steps = init_phase_steps;
    std::normal_distribution<double> nd(0.0, 1.0);
    s.z.resize(dim);
    double nrm = 0;
    do {
      for (double& v : s.z) v = nd(rng);
      nrm = norm(s.z);
    } while (nrm < 1e-12);
    s.z = scale(s.z, 1.0 / nrm);
    return s;
  }

  bool in_init_phase() const { return static_cast<int>(t) < init_phase_steps; }
};

/// One streaming step: update the running mean, take an Oja step on z with
/// the current-step covariance, renormalize z, and accumulate projections.
inline MimicState mimic_update(MimicState state, const std::vector<Vec>& good_msgs) {
  const double t = static_cast<double>(state.t);
  const Vec step_mean = mean(good_msgs);
  Vec mu = scale(state.mu, t / (1.0 + t));
  axpy(mu, 1.0 / (1.0 + t), step_mean);

  // (sum_i (x_i - mu)(x_i - mu)^T) z without forming the matrix.
  Vec cov_z(state.z.size(), 0.0);
  for (const Vec& x : good_msgs) {
    const Vec d = sub(x, mu);
    axpy(cov_z, dot(d, state.z), d);
  }
  Vec z = scale(state.z, t / (1.0 + t));
  axpy(z, 1.0 / (1.0 + t), cov_z);
  const double nrm = norm(z);
  if (nrm > 1e-12) z = scale(z, 1.0 / nrm);
  else z = state.z;  // zero covariance: keep previous direction

  state.mu = mu;
  state.z = z;
  if (state.in_init_phase()) {
    for (std::size_t i = 0; i < good_msgs.size(); ++i)
      state.proj_sum.at(i) += dot(state.z, good_msgs[i]);
  }
  ++state.t;
  return state;
}

/// During the init phase: argmax_i |sum_t z^T x_i|; afterwards the per-step
/// argmax_i z^T x_i. Ties break to the lowest index.
inline WorkerId mimic_pick_target(const MimicState& state,
                                  const std::vector<Vec>& good_msgs) {
  std::size_t best = 0;
  double best_val = -std::numeric_limits<double>::infinity();
  if (state.in_init_phase() || static_cast<int>(state.t) == state.init_phase_steps) {
    for (std::size_t i = 0; i < state.proj_sum.size(); ++i)
      if (std::abs(state.proj_sum[i]) > best_val) {
        best_val = std::abs(state.proj_sum[i]);
        best = i;
      }
  } else {
    for (std::size_t i = 0; i < good_msgs.size(); ++i)
      if (dot(state.z, good_msgs[i]) > best_val) {
        best_val = dot(state.z, good_msgs[i]);
        best = i;
      }
  }
  return best;
}

/// Copy the targeted good worker's message verbatim.
inline Vec attack_mimic(const MimicState& state, const std::vector<Vec>& good_msgs) {
  if (!state.target) throw std::logic_error("mimic: target not determined");
  return good_msgs.at(*state.target);
}

}  // namespace byzsim
