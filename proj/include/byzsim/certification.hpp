#pragma once

#include "byzsim/bucketing.hpp"

namespace byzsim {

struct CertificationResult {
  AggregatorKind kind = AggregatorKind::mean;
  std::size_t n = 0;
  double delta = 0;
  std::size_t s = 1;
  double rho_sq = 1.0;
  double c = 0;
  double delta_max = 0;
  double nu = 0;
  double mean_error = 0;  // Monte-Carlo mean aggregation error
  double bound = 0;       // c * delta * rho^2
  bool pass = false;
};

/// Constants used to certify each aggregator, with the margin nu chosen to
/// minimize c. CClip is certified without bucketing; its c is an O(1)
/// instantiation.
inline RobustnessCert certification_constants(AggregatorKind kind, std::size_t dim) {
  switch (kind) {
    case AggregatorKind::krum: return krum_cert();
    case AggregatorKind::cm: return cm_cert(dim);
    case AggregatorKind::rfa: return rfa_cert();
    case AggregatorKind::cclip: return {0.1, 10.0, 0.0};
    default:
      throw std::invalid_argument("no robustness certificate for this aggregator");
  }
}

/// Monte-Carlo certification of the robust-aggregation error bound: good
/// inputs are iid Gaussian with known pairwise rho^2, adversarial inputs sit
/// at distance rho from the good mean, and the mean aggregation error of
/// bucketing + base aggregator is compared against c * delta * rho^2 with a
/// 10% slack.
inline CertificationResult certify_aggregator(AggregatorKind kind, std::size_t n,
                                              double delta, std::size_t s,
                                              std::size_t trials, std::uint64_t seed,
                                              std::size_t dim = 4,
                                              double slack = 0.10) {
  const auto q = static_cast<std::size_t>(std::llround(delta * static_cast<double>(n)));
  const CohortSpec cohort = CohortSpec::last_q_byzantine(n, q);
  const std::set<std::size_t> good = cohort.good_set();
  const double rho_sq = 1.0;
  // iid coordinates with variance v give pairwise E||x_i - x_j||^2 = 2 d v
  const double coord_sigma = std::sqrt(rho_sq / (2.0 * static_cast<double>(dim)));
  const double rho = std::sqrt(rho_sq);

  const RobustnessCert cert = certification_constants(kind, dim);
  AggregatorConfig base;
  base.kind = kind;
  base.q = q;
  if (kind == AggregatorKind::cclip) base.clip_radius = rho;  // tau tracks rho

  const SeededRng rng(seed);
  double err_sum = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    auto gen = rng.stream(RngPurpose::data, 0, t);
    std::normal_distribution<double> nd(0.0, coord_sigma);
    std::vector<Vec> msgs(n, Vec(dim, 0.0));
    for (std::size_t i : good)
      for (double& v : msgs[i]) v = nd(gen);
    const Vec good_mean = mean_of(msgs, good);
    for (std::size_t i = 0; i < n; ++i)
      if (cohort.is_byzantine(i)) {
        msgs[i] = good_mean;
        msgs[i][0] += rho;  // adversarial spike at distance rho
      }
    auto prng = rng.stream(RngPurpose::permutation, 0, t);
    const Vec out = (s > 1) ? robust_aggregate(msgs, s, base, prng)
                            : aggregate(base, msgs, Vec(dim, 0.0));
    err_sum += aggregation_error(out, msgs, good);
  }

  CertificationResult res;
  res.kind = kind;
  res.n = n;
  res.delta = delta;
  res.s = s;
  res.rho_sq = rho_sq;
  res.c = cert.c;
  res.delta_max = cert.delta_max;
  res.nu = cert.nu;
  res.mean_error = err_sum / static_cast<double>(trials);
  res.bound = cert.c * delta * rho_sq;
  res.pass = res.mean_error <= (1.0 - slack) * res.bound;
  return res;
}

}  // namespace byzsim
