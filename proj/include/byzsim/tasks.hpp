#pragma once

#include <memory>
#include <optional>

#include "byzsim/core.hpp"
#include "byzsim/dataset.hpp"

namespace byzsim {

/// An optimization problem over good workers. Worker indices are
/// 0..num_workers()-1; the objective f is the mean of the per-worker f_j.
class Task {
 public:
  virtual ~Task() = default;

  virtual std::size_t dim() const = 0;
  virtual std::size_t num_workers() const = 0;
  virtual double loss(const Vec& x) const = 0;
  virtual Vec worker_full_gradient(std::size_t j, const Vec& x) const = 0;
  virtual Vec worker_stoch_gradient(std::size_t j, const Vec& x,
                                    std::mt19937_64& rng) const = 0;

  virtual std::optional<Vec> optimum() const { return {}; }
  virtual std::optional<double> known_zeta_sq() const { return {}; }
  virtual std::optional<double> accuracy(const Vec&) const { return {}; }
  /// Reported bound on E||g_j - grad f_j||^2.
  virtual double noise_sigma_sq() const { return 0.0; }
  virtual Vec initial_point() const { return Vec(dim(), 0.0); }

  /// Gradient on the whole dataset with labels flipped (classification tasks
  /// only); used by the label-flip Byzantine pipeline.
  virtual std::optional<Vec> flipped_label_stoch_gradient(const Vec&, std::mt19937_64&) const {
    return {};
  }

  Vec full_gradient(const Vec& x) const {
    Vec g(dim(), 0.0);
    for (std::size_t j = 0; j < num_workers(); ++j)
      axpy(g, 1.0, worker_full_gradient(j, x));
    return scale(g, 1.0 / static_cast<double>(num_workers()));
  }
};

using TaskPtr = std::shared_ptr<Task>;

/// f_j(x) = 1/2 ||x - b_j||^2 with optional isotropic Gaussian gradient
/// noise of total variance sigma^2. Optimum and zeta^2 are analytic.
class QuadraticTask : public Task {
 public:
  QuadraticTask(std::vector<Vec> centers, double sigma)
      : centers_(std::move(centers)), sigma_(sigma) {
    if (centers_.empty()) throw std::invalid_argument("quadratic: need >= 1 center");
    center_mean_ = mean(centers_);
    zeta_sq_ = 0;
    for (const Vec& b : centers_) zeta_sq_ += dist_sq(b, center_mean_);
    zeta_sq_ /= static_cast<double>(centers_.size());
  }

  std::size_t dim() const override { return centers_[0].size(); }
  std::size_t num_workers() const override { return centers_.size(); }

  double loss(const Vec& x) const override {
    double s = 0;
    for (const Vec& b : centers_) s += 0.5 * dist_sq(x, b);
    return s / static_cast<double>(centers_.size());
  }

  Vec worker_full_gradient(std::size_t j, const Vec& x) const override {
    return sub(x, centers_.at(j));
  }

  Vec worker_stoch_gradient(std::size_t j, const Vec& x,
                            std::mt19937_64& rng) const override {
    Vec g = worker_full_gradient(j, x);
    if (sigma_ > 0) {
      std::normal_distribution<double> nd(0.0, sigma_ / std::sqrt(static_cast<double>(dim())));
      for (double& v : g) v += nd(rng);
    }
    return g;
  }

  std::optional<Vec> optimum() const override { return center_mean_; }
  std::optional<double> known_zeta_sq() const override { return zeta_sq_; }
  double noise_sigma_sq() const override { return sigma_ * sigma_; }

  /// Start at distance 3 from the optimum so runs exercise the descent path
  /// rather than beginning at the minimizer.
  Vec initial_point() const override {
    Vec x = center_mean_;
    const double off = 3.0 / std::sqrt(static_cast<double>(dim()));
    for (double& v : x) v += off;
    return x;
  }

 private:
  std::vector<Vec> centers_;
  Vec center_mean_;
  double sigma_;
  double zeta_sq_;
};

/// Indistinguishable instance pair for the heterogeneity lower bound:
/// a multiset of 1-D quadratics that is either all-good (objective
/// mu/2 x^2 - G x) or has its shifted members Byzantine (objective
/// mu/2 x^2), with G = zeta sqrt(delta).
struct LowerBoundPair {
  double mu = 1, zeta = 1, delta = 0;
  std::size_t n = 0;
  std::size_t shifted_count = 0;

  double shift() const { return zeta / std::sqrt(delta); }  // linear term coefficient
  double g_const() const { return zeta * std::sqrt(delta); }

  double f1(double x) const { return 0.5 * mu * x * x - g_const() * x; }
  double f2(double x) const { return 0.5 * mu * x * x; }
  double optimum1() const { return g_const() / mu; }
  double optimum2() const { return 0.0; }
  double f1_gap(double x) const { return f1(x) - f1(optimum1()); }
  double f2_gap(double x) const { return f2(x) - f2(optimum2()); }
  double instance1_zeta_sq() const { return zeta * zeta * (1.0 - delta); }
  double bound() const { return delta * zeta * zeta / (4.0 * mu); }

  /// The multiset of per-worker functions, as a Task treating all workers as
  /// good (what any algorithm actually observes).
  TaskPtr combined_task() const;
};

/// Worker function mu/2 x^2 - a_j x; used by the lower-bound construction.
class ScalarQuadraticFamilyTask : public Task {
 public:
  ScalarQuadraticFamilyTask(double mu, std::vector<double> linear)
      : mu_(mu), a_(std::move(linear)) {}

  std::size_t dim() const override { return 1; }
  std::size_t num_workers() const override { return a_.size(); }

  double loss(const Vec& x) const override {
    double s = 0;
    for (double a : a_) s += 0.5 * mu_ * x[0] * x[0] - a * x[0];
    return s / static_cast<double>(a_.size());
  }

  Vec worker_full_gradient(std::size_t j, const Vec& x) const override {
    return {mu_ * x[0] - a_.at(j)};
  }

  Vec worker_stoch_gradient(std::size_t j, const Vec& x, std::mt19937_64&) const override {
    return worker_full_gradient(j, x);
  }

 private:
  double mu_;
  std::vector<double> a_;
};

inline TaskPtr LowerBoundPair::combined_task() const {
  std::vector<double> a(n, 0.0);
  for (std::size_t j = 0; j < shifted_count; ++j) a[j] = shift();
  return std::make_shared<ScalarQuadraticFamilyTask>(mu, std::move(a));
}

inline LowerBoundPair make_lower_bound_pair(double mu, double zeta, double delta,
                                            std::size_t n) {
  if (!(mu > 0) || !(zeta > 0) || !(delta > 0) || !(delta < 0.5))
    throw std::invalid_argument("lower_bound: require mu,zeta>0 and 0<delta<1/2");
  const double dn = delta * static_cast<double>(n);
  if (std::abs(dn - std::round(dn)) > 1e-9)
    throw std::invalid_argument("lower_bound: delta*n must be an integer");
  LowerBoundPair p;
  p.mu = mu;
  p.zeta = zeta;
  p.delta = delta;
  p.n = n;
  p.shifted_count = static_cast<std::size_t>(std::llround(dn));
  return p;
}

/// Consistent per-worker least squares: y_j = A_j x*, so every worker's
/// gradient vanishes at the shared optimum and the multiplicative
/// heterogeneity bound holds with finite B^2.
class ConsistentLeastSquaresTask : public Task {
 public:
  ConsistentLeastSquaresTask(std::size_t n_workers, std::size_t dim,
                             std::size_t rows_per_worker, const SeededRng& rng) {
    if (dim < n_workers * rows_per_worker)
      throw std::invalid_argument("least_squares: need d >= n * rows (interpolation)");
    auto gen = rng.stream(RngPurpose::data, 7, 0);
    std::normal_distribution<double> nd(0.0, 1.0);
    x_star_.resize(dim);
    for (double& v : x_star_) v = nd(gen);
    rows_.resize(n_workers);
    targets_.resize(n_workers);
    for (std::size_t j = 0; j < n_workers; ++j) {
      rows_[j].resize(rows_per_worker);
      targets_[j].resize(rows_per_worker);
      for (std::size_t r = 0; r < rows_per_worker; ++r) {
        rows_[j][r].resize(dim);
        for (double& v : rows_[j][r]) v = nd(gen) / std::sqrt(static_cast<double>(dim));
        targets_[j][r] = dot(rows_[j][r], x_star_);
      }
    }
  }

  std::size_t dim() const override { return x_star_.size(); }
  std::size_t num_workers() const override { return rows_.size(); }

  double loss(const Vec& x) const override {
    double s = 0;
    for (std::size_t j = 0; j < rows_.size(); ++j) s += worker_loss(j, x);
    return s / static_cast<double>(rows_.size());
  }

  double worker_loss(std::size_t j, const Vec& x) const {
    double s = 0;
    for (std::size_t r = 0; r < rows_[j].size(); ++r) {
      const double e = dot(rows_[j][r], x) - targets_[j][r];
      s += 0.5 * e * e;
    }
    return s / static_cast<double>(rows_[j].size());
  }

  Vec worker_full_gradient(std::size_t j, const Vec& x) const override {
    Vec g(dim(), 0.0);
    for (std::size_t r = 0; r < rows_[j].size(); ++r)
      axpy(g, dot(rows_[j][r], x) - targets_[j][r], rows_[j][r]);
    return scale(g, 1.0 / static_cast<double>(rows_[j].size()));
  }

  Vec worker_stoch_gradient(std::size_t j, const Vec& x,
                            std::mt19937_64& rng) const override {
    std::uniform_int_distribution<std::size_t> pick(0, rows_[j].size() - 1);
    const std::size_t r = pick(rng);
    Vec g(dim(), 0.0);
    axpy(g, dot(rows_[j][r], x) - targets_[j][r], rows_[j][r]);
    return g;
  }

  std::optional<Vec> optimum() const override { return x_star_; }

  /// Test hook: breaking consistency of one worker's targets.
  void perturb_target(std::size_t j, std::size_t r, double amount) {
    targets_.at(j).at(r) += amount;
  }

  /// Lipschitz constant estimate of the mean objective (power iteration on
  /// the averaged Hessian).
  double lipschitz_estimate(std::size_t iters = 50) const {
    Vec v(dim(), 1.0 / std::sqrt(static_cast<double>(dim())));
    double lambda = 0;
    for (std::size_t it = 0; it < iters; ++it) {
      Vec hv(dim(), 0.0);
      for (std::size_t j = 0; j < rows_.size(); ++j)
        for (std::size_t r = 0; r < rows_[j].size(); ++r)
          axpy(hv, dot(rows_[j][r], v) / static_cast<double>(rows_[j].size()), rows_[j][r]);
      hv = scale(hv, 1.0 / static_cast<double>(rows_.size()));
      lambda = norm(hv);
      if (lambda < 1e-15) break;
      v = scale(hv, 1.0 / lambda);
    }
    return lambda;
  }

 private:
  Vec x_star_;
  std::vector<std::vector<Vec>> rows_;     // [worker][row]
  std::vector<std::vector<double>> targets_;
};

inline std::shared_ptr<ConsistentLeastSquaresTask> make_consistent_least_squares(
    std::size_t n_workers, std::size_t dim, std::size_t rows_per_worker,
    const SeededRng& rng) {
  return std::make_shared<ConsistentLeastSquaresTask>(n_workers, dim,
                                                      rows_per_worker, rng);
}

/// Multinomial logistic regression over per-worker shards with softmax
/// cross-entropy and an l2/2 ||x||^2 regularizer. Parameters are stored as
/// C blocks of (d weights + 1 bias).
class LogisticTask : public Task {
 public:
  LogisticTask(std::vector<Dataset> shards, double l2, std::size_t batch_size,
               Dataset test_split, Dataset full_train)
      : shards_(std::move(shards)), l2_(l2), batch_(batch_size),
        test_(std::move(test_split)), full_(std::move(full_train)) {
    if (shards_.empty()) throw std::invalid_argument("logistic: need >= 1 shard");
    for (const Dataset& s : shards_)
      if (s.size() == 0) throw std::invalid_argument("logistic: empty shard");
    classes_ = shards_[0].num_classes;
    feat_dim_ = shards_[0].feature_dim();
  }

  std::size_t dim() const override {
    return static_cast<std::size_t>(classes_) * (feat_dim_ + 1);
  }
  std::size_t num_workers() const override { return shards_.size(); }
  int num_classes() const { return classes_; }

  double loss(const Vec& x) const override {
    double s = 0;
    for (std::size_t j = 0; j < shards_.size(); ++j) s += worker_loss(j, x);
    return s / static_cast<double>(shards_.size());
  }

  double worker_loss(std::size_t j, const Vec& x) const {
    const Dataset& sh = shards_[j];
    double s = 0;
    for (std::size_t i = 0; i < sh.size(); ++i)
      s += sample_nll(x, sh.features[i], sh.labels[i]);
    return s / static_cast<double>(sh.size()) + 0.5 * l2_ * norm_sq(x);
  }

  Vec worker_full_gradient(std::size_t j, const Vec& x) const override {
    const Dataset& sh = shards_[j];
    Vec g(dim(), 0.0);
    for (std::size_t i = 0; i < sh.size(); ++i)
      accumulate_sample_grad(g, x, sh.features[i], sh.labels[i]);
    g = scale(g, 1.0 / static_cast<double>(sh.size()));
    axpy(g, l2_, x);
    return g;
  }

  Vec worker_stoch_gradient(std::size_t j, const Vec& x,
                            std::mt19937_64& rng) const override {
    return minibatch_gradient(shards_[j], x, rng, false);
  }

  std::optional<Vec> flipped_label_stoch_gradient(const Vec& x,
                                                  std::mt19937_64& rng) const override {
    return minibatch_gradient(full_, x, rng, true);
  }

  std::optional<double> accuracy(const Vec& x) const override {
    if (test_.size() == 0) return {};
    std::size_t hits = 0;
    for (std::size_t i = 0; i < test_.size(); ++i)
      if (predict(x, test_.features[i]) == test_.labels[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(test_.size());
  }

  int predict(const Vec& x, const Vec& phi) const {
    const std::vector<double> lg = logits(x, phi);
    return static_cast<int>(std::max_element(lg.begin(), lg.end()) - lg.begin());
  }

 private:
  std::vector<double> logits(const Vec& x, const Vec& phi) const {
    std::vector<double> lg(static_cast<std::size_t>(classes_));
    for (int c = 0; c < classes_; ++c) {
      const std::size_t base = static_cast<std::size_t>(c) * (feat_dim_ + 1);
      double v = x[base + feat_dim_];  // bias
      for (std::size_t k = 0; k < feat_dim_; ++k) v += x[base + k] * phi[k];
      lg[static_cast<std::size_t>(c)] = v;
    }
    return lg;
  }

  static std::vector<double> softmax(std::vector<double> lg) {
    const double m = *std::max_element(lg.begin(), lg.end());
    double z = 0;
    for (double& v : lg) {
      v = std::exp(v - m);
      z += v;
    }
    for (double& v : lg) v /= z;
    return lg;
  }

  double sample_nll(const Vec& x, const Vec& phi, int y) const {
    std::vector<double> lg = logits(x, phi);
    const double m = *std::max_element(lg.begin(), lg.end());
    double z = 0;
    for (double v : lg) z += std::exp(v - m);
    return std::log(z) + m - lg[static_cast<std::size_t>(y)];
  }

  void accumulate_sample_grad(Vec& g, const Vec& x, const Vec& phi, int y) const {
    std::vector<double> p = softmax(logits(x, phi));
    p[static_cast<std::size_t>(y)] -= 1.0;
    for (int c = 0; c < classes_; ++c) {
      const std::size_t base = static_cast<std::size_t>(c) * (feat_dim_ + 1);
      for (std::size_t k = 0; k < feat_dim_; ++k)
        g[base + k] += p[static_cast<std::size_t>(c)] * phi[k];
      g[base + feat_dim_] += p[static_cast<std::size_t>(c)];
    }
  }

  Vec minibatch_gradient(const Dataset& src, const Vec& x, std::mt19937_64& rng,
                         bool flip_labels) const {
    Vec g(dim(), 0.0);
    std::uniform_int_distribution<std::size_t> pick(0, src.size() - 1);
    for (std::size_t b = 0; b < batch_; ++b) {
      const std::size_t i = pick(rng);
      int y = src.labels[i];
      if (flip_labels) y = src.num_classes - 1 - y;
      accumulate_sample_grad(g, x, src.features[i], y);
    }
    g = scale(g, 1.0 / static_cast<double>(batch_));
    axpy(g, l2_, x);
    return g;
  }

  std::vector<Dataset> shards_;
  double l2_;
  std::size_t batch_;
  Dataset test_;
  Dataset full_;  // union of training data; Byzantine pipelines read this
  int classes_ = 10;
  std::size_t feat_dim_ = 0;
};

inline std::shared_ptr<LogisticTask> make_logistic_task(std::vector<Dataset> shards,
                                                        double l2,
                                                        std::size_t batch_size,
                                                        Dataset test_split) {
  Dataset full;
  if (!shards.empty()) full.num_classes = shards[0].num_classes;
  for (const Dataset& s : shards) {
    full.features.insert(full.features.end(), s.features.begin(), s.features.end());
    full.labels.insert(full.labels.end(), s.labels.begin(), s.labels.end());
  }
  return std::make_shared<LogisticTask>(std::move(shards), l2, batch_size,
                                        std::move(test_split), std::move(full));
}

}  // namespace byzsim
