#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace byzsim {

/// Flat parameter/gradient/momentum vector. All vectors in one run share
/// the same dimension.
using Vec = std::vector<double>;

using WorkerId = std::size_t;

inline bool is_finite(const Vec& v) {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

inline void require_finite(const Vec& v, const char* what) {
  if (!is_finite(v)) throw std::invalid_argument(std::string(what) + ": non-finite entry");
}

inline void require_same_dim(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("dimension mismatch");
}

inline Vec add(const Vec& a, const Vec& b) {
  require_same_dim(a, b);
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

inline Vec sub(const Vec& a, const Vec& b) {
  require_same_dim(a, b);
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

inline Vec scale(const Vec& a, double c) {
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] * c;
  return r;
}

inline void axpy(Vec& y, double c, const Vec& x) {
  require_same_dim(y, x);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += c * x[i];
}

inline double dot(const Vec& a, const Vec& b) {
  require_same_dim(a, b);
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm_sq(const Vec& a) { return dot(a, a); }
inline double norm(const Vec& a) { return std::sqrt(norm_sq(a)); }

inline double dist_sq(const Vec& a, const Vec& b) {
  require_same_dim(a, b);
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

/// Coordinate-wise arithmetic mean. Reduction runs in ascending index order
/// so results do not depend on scheduling.
inline Vec mean(const std::vector<Vec>& vs) {
  if (vs.empty()) throw std::invalid_argument("empty input");
  Vec r(vs[0].size(), 0.0);
  for (const Vec& v : vs) {
    require_same_dim(r, v);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] += v[i];
  }
  const double inv = 1.0 / static_cast<double>(vs.size());
  for (double& x : r) x *= inv;
  return r;
}

inline Vec mean_of(const std::vector<Vec>& vs, const std::set<std::size_t>& idx) {
  if (idx.empty()) throw std::invalid_argument("empty index set");
  Vec r(vs.at(*idx.begin()).size(), 0.0);
  for (std::size_t i : idx) {
    require_same_dim(r, vs.at(i));
    for (std::size_t k = 0; k < r.size(); ++k) r[k] += vs[i][k];
  }
  const double inv = 1.0 / static_cast<double>(idx.size());
  for (double& x : r) x *= inv;
  return r;
}

/// Entry (i,j) = ||v_i - v_j||^2; symmetric with zero diagonal.
inline std::vector<std::vector<double>> pairwise_sq_dists(const std::vector<Vec>& vs) {
  if (vs.size() < 2) throw std::invalid_argument("need at least 2 vectors");
  const std::size_t n = vs.size();
  std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      d[i][j] = d[j][i] = dist_sq(vs[i], vs[j]);
  return d;
}

/// Mean of ||v_i - v_j||^2 over unordered good pairs; empirical estimate of
/// the pairwise heterogeneity bound rho^2.
inline double empirical_pairwise_variance(const std::vector<Vec>& vs,
                                          const std::set<std::size_t>& good) {
  if (good.size() < 2) throw std::invalid_argument("need at least 2 good indices");
  double sum = 0;
  std::size_t pairs = 0;
  for (auto it = good.begin(); it != good.end(); ++it)
    for (auto jt = std::next(it); jt != good.end(); ++jt) {
      sum += dist_sq(vs.at(*it), vs.at(*jt));
      ++pairs;
    }
  return sum / static_cast<double>(pairs);
}

/// Worker cohort: n workers, of which the q in `byzantine` may send
/// arbitrary messages. The Byzantine set is fixed for a whole run.
struct CohortSpec {
  std::size_t n = 1;
  std::set<WorkerId> byzantine;

  CohortSpec() = default;
  CohortSpec(std::size_t n_, std::set<WorkerId> byz)
      : n(n_), byzantine(std::move(byz)) {
    if (n == 0) throw std::invalid_argument("cohort: n must be >= 1");
    for (WorkerId id : byzantine)
      if (id >= n) throw std::invalid_argument("cohort: byzantine id out of range");
    if (2 * byzantine.size() >= n)
      throw std::invalid_argument("cohort: require q/n < 1/2");
  }

  /// Convention: the last q worker ids are Byzantine.
  static CohortSpec last_q_byzantine(std::size_t n, std::size_t q) {
    std::set<WorkerId> byz;
    for (std::size_t i = n - q; i < n; ++i) byz.insert(i);
    return CohortSpec(n, std::move(byz));
  }

  std::size_t q() const { return byzantine.size(); }
  double delta() const { return static_cast<double>(q()) / static_cast<double>(n); }
  bool is_byzantine(WorkerId id) const { return byzantine.count(id) > 0; }

  std::set<std::size_t> good_set() const {
    std::set<std::size_t> g;
    for (std::size_t i = 0; i < n; ++i)
      if (!is_byzantine(i)) g.insert(i);
    return g;
  }
};

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace detail

/// Stream purposes; part of the RNG key so that drawing order in one
/// subsystem can never perturb another.
enum class RngPurpose : std::uint64_t {
  permutation = 1,
  gradient_noise = 2,
  minibatch = 3,
  data = 4,
  attack = 5,
  init = 6,
  test = 7,
};

/// Deterministic RNG factory. Streams are keyed by
/// (master_seed, purpose, id, step); identical configs give bit-identical runs.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t master_seed) : master_(master_seed) {}

  std::mt19937_64 stream(RngPurpose purpose, std::uint64_t id = 0,
                         std::uint64_t step = 0) const {
    std::uint64_t k = detail::splitmix64(master_ ^ detail::splitmix64(
                          static_cast<std::uint64_t>(purpose)));
    k = detail::splitmix64(k ^ detail::splitmix64(id + 0x1000));
    k = detail::splitmix64(k ^ detail::splitmix64(step + 0x2000));
    return std::mt19937_64(k);
  }

  std::uint64_t master_seed() const { return master_; }

 private:
  std::uint64_t master_;
};

}  // namespace byzsim
