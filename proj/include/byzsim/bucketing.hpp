#pragma once

#include <functional>
#include <numeric>

#include "byzsim/aggregators.hpp"
#include "byzsim/core.hpp"

namespace byzsim {

/// Seeded permutation of [n] plus bucket boundaries. Buckets partition the
/// permuted indices into ceil(n/s) groups of size s; only the last bucket
/// may be smaller.
struct BucketingPlan {
  std::size_t n = 0;
  std::size_t s = 1;
  std::vector<std::size_t> permutation;

  std::size_t bucket_count() const { return (n + s - 1) / s; }

  std::size_t bucket_begin(std::size_t i) const { return i * s; }
  std::size_t bucket_end(std::size_t i) const { return std::min(n, (i + 1) * s); }
};

inline BucketingPlan make_plan(std::size_t n, std::size_t s, std::mt19937_64& rng) {
  if (s < 1 || s > n) throw std::invalid_argument("bucketing: require 1 <= s <= n");
  BucketingPlan plan;
  plan.n = n;
  plan.s = s;
  plan.permutation.resize(n);
  std::iota(plan.permutation.begin(), plan.permutation.end(), std::size_t{0});
  std::shuffle(plan.permutation.begin(), plan.permutation.end(), rng);
  return plan;
}

/// Bucket means y_1..y_m in bucket order. The remainder bucket divides by
/// its actual size.
inline std::vector<Vec> bucketize(const std::vector<Vec>& msgs,
                                  const BucketingPlan& plan) {
  if (msgs.size() != plan.n) throw std::invalid_argument("bucketing: plan/message count mismatch");
  std::vector<Vec> out;
  out.reserve(plan.bucket_count());
  for (std::size_t i = 0; i < plan.bucket_count(); ++i) {
    Vec y(msgs[0].size(), 0.0);
    const std::size_t lo = plan.bucket_begin(i), hi = plan.bucket_end(i);
    for (std::size_t k = lo; k < hi; ++k) {
      require_same_dim(y, msgs[plan.permutation[k]]);
      axpy(y, 1.0, msgs[plan.permutation[k]]);
    }
    out.push_back(scale(y, 1.0 / static_cast<double>(hi - lo)));
  }
  return out;
}

/// Scale the base aggregator's Byzantine-count parameters to the bucketed
/// count: each Byzantine input corrupts at most one bucket, so assumed
/// Byzantine buckets <= min(m - 1, q), clamped so the base stays valid.
inline AggregatorConfig scale_for_buckets(AggregatorConfig base, std::size_t m) {
  const std::size_t qb = std::min(base.q, m > 0 ? m - 1 : 0);
  if (base.kind == AggregatorKind::krum)
    base.q = (m >= 3) ? std::min(qb, m - 3) : 0;
  else
    base.q = qb;
  if (base.kind == AggregatorKind::trimmed_mean)
    base.trim_count = std::min(base.trim_count, (m - 1) / 2);
  return base;
}

/// Algorithm: draw a fresh permutation, bucket the messages, run the base
/// aggregator on the bucket means.
inline Vec robust_aggregate(const std::vector<Vec>& msgs, std::size_t s,
                            const AggregatorConfig& base, std::mt19937_64& rng,
                            const std::optional<Vec>& center = std::nullopt) {
  const BucketingPlan plan = make_plan(msgs.size(), s, rng);
  const std::vector<Vec> buckets = bucketize(msgs, plan);
  return aggregate(scale_for_buckets(base, buckets.size()), buckets, center);
}

/// s = floor(delta_max / delta), clamped to [1, s_cap]; delta = 0 means no
/// Byzantine inputs and returns the cap.
inline std::size_t choose_s(double delta, double delta_max, std::size_t s_cap) {
  if (delta < 0 || delta >= 0.5) throw std::invalid_argument("choose_s: require 0 <= delta < 1/2");
  if (s_cap < 1) throw std::invalid_argument("choose_s: s_cap must be >= 1");
  if (delta == 0) return s_cap;
  const auto s = static_cast<std::size_t>(std::max(1.0, std::floor(delta_max / delta)));
  return std::min(s, s_cap);
}

struct Lemma1Report {
  bool mean_preserved = false;
  double variance_ratio = 0.0;   // good-bucket pairwise variance / input pairwise variance
  double good_bucket_frac = 1.0; // minimum over trials
};

/// Monte-Carlo check of the variance-reduction lemma: over `trials` draws of
/// data and permutation, good-pair bucket variance should be about 1/s of
/// the input pairwise variance, and the good-bucket fraction at least
/// 1 - delta*s.
inline Lemma1Report lemma1_check(
    const std::function<Vec(std::mt19937_64&)>& good_dist_sampler, std::size_t n,
    std::size_t s, double delta, std::size_t trials, const SeededRng& rng) {
  if (trials < 100) throw std::invalid_argument("lemma1_check: trials must be >= 100");
  const auto q = static_cast<std::size_t>(std::llround(delta * static_cast<double>(n)));
  const CohortSpec cohort = CohortSpec::last_q_byzantine(n, q);
  const std::set<std::size_t> good = cohort.good_set();

  double input_var_sum = 0, bucket_var_sum = 0;
  double min_good_frac = 1.0;
  double mean_err_sq_sum = 0;
  std::size_t bucket_pairs_total = 0, input_pairs_total = 0;

  for (std::size_t t = 0; t < trials; ++t) {
    auto data_rng = rng.stream(RngPurpose::data, 0, t);
    std::vector<Vec> msgs(n);
    for (std::size_t i = 0; i < n; ++i) msgs[i] = good_dist_sampler(data_rng);
    // Byzantine entries do not matter for the good-pair statistics; mark
    // their buckets only.
    auto perm_rng = rng.stream(RngPurpose::permutation, 0, t);
    const BucketingPlan plan = make_plan(n, s, perm_rng);
    const std::vector<Vec> buckets = bucketize(msgs, plan);

    std::vector<bool> bucket_good(plan.bucket_count(), true);
    for (std::size_t i = 0; i < plan.bucket_count(); ++i)
      for (std::size_t k = plan.bucket_begin(i); k < plan.bucket_end(i); ++k)
        if (cohort.is_byzantine(plan.permutation[k])) bucket_good[i] = false;

    std::size_t n_good_buckets = 0;
    std::vector<std::size_t> good_bucket_ids;
    for (std::size_t i = 0; i < plan.bucket_count(); ++i)
      if (bucket_good[i]) {
        ++n_good_buckets;
        good_bucket_ids.push_back(i);
      }
    min_good_frac = std::min(
        min_good_frac, static_cast<double>(n_good_buckets) /
                           static_cast<double>(plan.bucket_count()));

    for (std::size_t a = 0; a < good_bucket_ids.size(); ++a)
      for (std::size_t b = a + 1; b < good_bucket_ids.size(); ++b) {
        bucket_var_sum += dist_sq(buckets[good_bucket_ids[a]], buckets[good_bucket_ids[b]]);
        ++bucket_pairs_total;
      }
    std::vector<std::size_t> good_ids(good.begin(), good.end());
    for (std::size_t a = 0; a < good_ids.size(); ++a)
      for (std::size_t b = a + 1; b < good_ids.size(); ++b) {
        input_var_sum += dist_sq(msgs[good_ids[a]], msgs[good_ids[b]]);
        ++input_pairs_total;
      }
    if (!good_bucket_ids.empty()) {
      const Vec good_mean = mean_of(msgs, good);
      Vec bucket_mean(msgs[0].size(), 0.0);
      for (std::size_t i : good_bucket_ids) axpy(bucket_mean, 1.0, buckets[i]);
      bucket_mean = scale(bucket_mean, 1.0 / static_cast<double>(good_bucket_ids.size()));
      mean_err_sq_sum += dist_sq(bucket_mean, good_mean);
    }
  }

  Lemma1Report rep;
  const double input_var = input_var_sum / static_cast<double>(input_pairs_total);
  const double bucket_var =
      bucket_pairs_total > 0 ? bucket_var_sum / static_cast<double>(bucket_pairs_total) : 0.0;
  rep.variance_ratio = bucket_var / input_var;
  rep.good_bucket_frac = min_good_frac;
  // Unbiasedness at Monte-Carlo scale: averaged bucket means track the good
  // mean to within the input spread.
  rep.mean_preserved = mean_err_sq_sum / static_cast<double>(trials) <= input_var;
  return rep;
}

}  // namespace byzsim
