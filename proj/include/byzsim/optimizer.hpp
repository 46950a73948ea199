#pragma once

#include "byzsim/attacks.hpp"
#include "byzsim/bucketing.hpp"
#include "byzsim/tasks.hpp"

namespace byzsim {

enum class MomentumForm { convex_combination, accumulation };

inline const char* to_string(MomentumForm f) {
  return f == MomentumForm::convex_combination ? "convex_combination" : "accumulation";
}

inline MomentumForm momentum_form_from_string(const std::string& s) {
  if (s == "convex_combination") return MomentumForm::convex_combination;
  if (s == "accumulation") return MomentumForm::accumulation;
  throw std::invalid_argument("unknown momentum form: " + s);
}

struct TrainerConfig {
  std::size_t steps = 100;
  double eta = 0.01;
  double beta = 0.0;
  MomentumForm momentum_form = MomentumForm::convex_combination;
  AggregatorConfig aggregator;
  std::size_t bucketing_s = 1;
  AttackConfig attack;
  CohortSpec cohort;
  std::uint64_t seed = 0;
  std::size_t diag_every = 1;  // heterogeneity diagnostics cadence

  void validate() const {
    if (!(eta > 0)) throw std::invalid_argument("trainer: eta must be > 0");
    if (!(beta >= 0 && beta < 1)) throw std::invalid_argument("trainer: beta in [0,1)");
    if (bucketing_s < 1) throw std::invalid_argument("trainer: bucketing_s >= 1");
  }
};

struct StepRecord {
  std::size_t step = 0;
  double loss = 0;
  double grad_norm_sq = 0;
  double agg_error = 0;
  std::optional<double> accuracy;
  double zeta_hat_sq = 0;
  double b_hat_ratio = 0;  // may be +inf when the gradient vanishes
};

struct RunMetrics {
  std::vector<StepRecord> records;
  bool diverged = false;
  double b_hat_sq = 0;  // max ratio after warmup (first 10% of steps excluded)
  Vec final_x;

  double final_grad_norm_sq() const {
    return records.empty() ? 0.0 : records.back().grad_norm_sq;
  }
  double final_loss() const { return records.empty() ? 0.0 : records.back().loss; }

  double mean_accuracy_last(std::size_t window) const {
    double s = 0;
    std::size_t cnt = 0;
    const std::size_t lo = records.size() > window ? records.size() - window : 0;
    for (std::size_t i = lo; i < records.size(); ++i)
      if (records[i].accuracy) {
        s += *records[i].accuracy;
        ++cnt;
      }
    return cnt ? s / static_cast<double>(cnt) : 0.0;
  }
};

struct HeterogeneityDiag {
  double zeta_hat_sq = 0;
  double ratio = 0;  // zeta_hat^2 / ||grad f||^2, +inf below the floor
};

/// zeta_hat^2 = mean over workers of ||grad f_j(x) - grad f(x)||^2 and its
/// ratio to ||grad f(x)||^2 (reported as +inf when the gradient norm is
/// below 1e-12).
inline HeterogeneityDiag heterogeneity_diagnostics(const Task& task, const Vec& x) {
  const Vec g = task.full_gradient(x);
  double zeta = 0;
  for (std::size_t j = 0; j < task.num_workers(); ++j)
    zeta += dist_sq(task.worker_full_gradient(j, x), g);
  zeta /= static_cast<double>(task.num_workers());
  const double gn = norm_sq(g);
  HeterogeneityDiag d;
  d.zeta_hat_sq = zeta;
  d.ratio = (gn < 1e-12) ? std::numeric_limits<double>::infinity() : zeta / gn;
  return d;
}

struct TunedHyperparams {
  double eta;
  double beta;
};

/// Theoretically tuned step size and momentum:
///   eta  = min( sqrt( (4 F0 + 15 c delta (zeta^2 + 2 sigma^2)/L)
///                     / (T * 160 L sigma^2 (1/n + 6 c delta)) ), 1/(8L) )
///   beta = 1 - 8 L eta.
/// The sigma = 0 branch returns the cap (the formula divides by sigma^2).
inline TunedHyperparams tuned_hyperparams(double L, double F0, double c,
                                          double delta, double sigma, double zeta,
                                          std::size_t n, std::size_t T) {
  if (!(L > 0) || !(F0 > 0)) throw std::invalid_argument("tuned: L, F0 must be > 0");
  const double cap = 1.0 / (8.0 * L);
  double eta = cap;
  if (sigma > 0) {
    const double num = 4.0 * F0 + 15.0 * c * delta * (zeta * zeta + 2.0 * sigma * sigma) / L;
    const double den = static_cast<double>(T) * 160.0 * L * sigma * sigma *
                       (1.0 / static_cast<double>(n) + 6.0 * c * delta);
    eta = std::min(std::sqrt(num / den), cap);
  }
  return {eta, 1.0 - 8.0 * L * eta};
}

/// Max-over-pair suboptimality of a single output fed to both instances of
/// the lower-bound construction.
inline double lower_bound_gap(double x_out, const LowerBoundPair& pair) {
  return std::max(pair.f1_gap(x_out), pair.f2_gap(x_out));
}

/// Algorithm: T rounds of worker momentum, Byzantine message generation,
/// bucketing + robust aggregation, and a parameter step. Deterministic
/// given the seed.
inline RunMetrics train(const TrainerConfig& cfg, const Task& task) {
  cfg.validate();
  const std::size_t n = cfg.cohort.n;
  const std::size_t q = cfg.cohort.q();
  const std::size_t n_good = n - q;
  if (task.num_workers() != n_good)
    throw std::invalid_argument("train: task must have one worker per good cohort member");

  const SeededRng rng(cfg.seed);
  Vec x = task.initial_point();
  std::vector<Vec> momenta(n_good);          // good workers, task order
  std::vector<Vec> byz_momenta;              // label_flip pipeline only
  if (cfg.attack.kind == AttackKind::label_flip) byz_momenta.resize(q);

  std::optional<MimicState> mimic;
  std::optional<Vec> prev_aggregate;  // cclip center; zero vector at step 1

  std::vector<std::size_t> good_ids, byz_ids;
  for (std::size_t i = 0; i < n; ++i)
    (cfg.cohort.is_byzantine(i) ? byz_ids : good_ids).push_back(i);
  const std::set<std::size_t> good_set(good_ids.begin(), good_ids.end());

  RunMetrics out;
  out.records.reserve(cfg.steps);
  const std::size_t warmup = cfg.steps / 10;

  for (std::size_t t = 1; t <= cfg.steps; ++t) {
    // worker momentum; at t = 1 the momentum is the first gradient
    for (std::size_t j = 0; j < n_good; ++j) {
      auto grng = rng.stream(RngPurpose::gradient_noise, good_ids[j], t);
      const Vec g = task.worker_stoch_gradient(j, x, grng);
      if (t == 1) {
        momenta[j] = g;
      } else if (cfg.momentum_form == MomentumForm::convex_combination) {
        momenta[j] = scale(momenta[j], cfg.beta);
        axpy(momenta[j], 1.0 - cfg.beta, g);
      } else {
        momenta[j] = scale(momenta[j], cfg.beta);
        axpy(momenta[j], 1.0, g);
      }
      require_finite(momenta[j], "worker momentum");
    }

    // Byzantine messages, computed from full knowledge of the good workers
    std::vector<Vec> msgs(n);
    for (std::size_t j = 0; j < n_good; ++j) msgs[good_ids[j]] = momenta[j];
    if (q > 0) {
      Vec byz_msg;
      switch (cfg.attack.kind) {
        case AttackKind::none:
          byz_msg = mean(momenta);  // passive: indistinguishable from honest mean
          break;
        case AttackKind::bit_flip:
          byz_msg = attack_bit_flip(momenta);
          break;
        case AttackKind::ipm:
          byz_msg = attack_ipm(momenta, cfg.attack.epsilon);
          break;
        case AttackKind::alie:
          byz_msg = attack_alie(momenta, n, q, cfg.attack.z_override);
          break;
        case AttackKind::mimic: {
          if (!mimic) {
            auto mrng = rng.stream(RngPurpose::attack, 0, 0);
            mimic = MimicState::init(task.dim(), n_good, cfg.attack.init_phase_steps, mrng);
          }
          *mimic = mimic_update(*mimic, momenta);
          if (cfg.attack.retarget_each_step || mimic->in_init_phase() ||
              !mimic->target)
            mimic->target = mimic_pick_target(*mimic, momenta);
          byz_msg = attack_mimic(*mimic, momenta);
          break;
        }
        case AttackKind::label_flip: {
          for (std::size_t b = 0; b < q; ++b) {
            auto brng = rng.stream(RngPurpose::gradient_noise, byz_ids[b], t);
            auto g = task.flipped_label_stoch_gradient(x, brng);
            if (!g) throw std::invalid_argument("label_flip: task has no label pipeline");
            if (t == 1) {
              byz_momenta[b] = *g;
            } else if (cfg.momentum_form == MomentumForm::convex_combination) {
              byz_momenta[b] = scale(byz_momenta[b], cfg.beta);
              axpy(byz_momenta[b], 1.0 - cfg.beta, *g);
            } else {
              byz_momenta[b] = scale(byz_momenta[b], cfg.beta);
              axpy(byz_momenta[b], 1.0, *g);
            }
          }
          break;
        }
      }
      for (std::size_t b = 0; b < q; ++b)
        msgs[byz_ids[b]] =
            (cfg.attack.kind == AttackKind::label_flip) ? byz_momenta[b] : byz_msg;
    }

    // server step
    Vec aggregate_out;
    if (cfg.bucketing_s > 1) {
      auto prng = rng.stream(RngPurpose::permutation, 0, t);
      aggregate_out = robust_aggregate(msgs, cfg.bucketing_s, cfg.aggregator, prng,
                                       prev_aggregate);
    } else {
      aggregate_out = aggregate(cfg.aggregator, msgs, prev_aggregate);
    }
    prev_aggregate = aggregate_out;
    axpy(x, -cfg.eta, aggregate_out);

    StepRecord rec;
    rec.step = t;
    rec.loss = task.loss(x);
    rec.agg_error = aggregation_error(aggregate_out, msgs, good_set);
    if ((t - 1) % cfg.diag_every == 0 || t == cfg.steps) {
      const HeterogeneityDiag d = heterogeneity_diagnostics(task, x);
      rec.zeta_hat_sq = d.zeta_hat_sq;
      rec.b_hat_ratio = d.ratio;
      rec.grad_norm_sq = norm_sq(task.full_gradient(x));
    } else if (!out.records.empty()) {
      rec.zeta_hat_sq = out.records.back().zeta_hat_sq;
      rec.b_hat_ratio = out.records.back().b_hat_ratio;
      rec.grad_norm_sq = norm_sq(task.full_gradient(x));
    }
    rec.accuracy = task.accuracy(x);
    out.records.push_back(rec);

    if (!std::isfinite(rec.loss) || rec.loss > 1e12) {
      out.diverged = true;
      break;
    }
    if (t > warmup && std::isfinite(rec.b_hat_ratio))
      out.b_hat_sq = std::max(out.b_hat_sq, rec.b_hat_ratio);
  }
  out.final_x = x;
  return out;
}

}  // namespace byzsim
