#pragma once

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "byzsim/metrics.hpp"
#include "byzsim/optimizer.hpp"

namespace byzsim {

using nlohmann::json;

namespace detail {

inline void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed,
                                const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) ok = true;
    if (!ok) throw std::invalid_argument("config: unknown key '" + key + "' in " + where);
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace detail

/// Task specification; which fields apply depends on `kind`.
struct TaskSpec {
  std::string kind = "quadratic";  // quadratic | lower_bound | least_squares |
                                   // logistic_synthetic | logistic_idx
  // quadratic
  std::size_t dim = 2;
  double zeta = 1.0;
  double sigma = 0.0;
  // lower_bound
  double mu = 1.0;
  // least_squares
  std::size_t rows_per_worker = 2;
  // classification
  int classes = 10;
  std::size_t per_class = 200;
  std::size_t feature_dim = 8;
  double feature_noise = 0.3;
  double l2 = 1e-3;
  std::size_t batch_size = 32;
  std::string partition = "heterogeneous";  // heterogeneous | iid
  double long_tail_gamma = 1.0;
  std::size_t test_per_class = 50;
  std::string idx_images, idx_labels, idx_test_images, idx_test_labels;

  json to_json() const {
    json j;
    j["kind"] = kind;
    if (kind == "quadratic") {
      j["dim"] = dim;
      j["zeta"] = zeta;
      j["sigma"] = sigma;
    } else if (kind == "lower_bound") {
      j["mu"] = mu;
      j["zeta"] = zeta;
    } else if (kind == "least_squares") {
      j["dim"] = dim;
      j["rows_per_worker"] = rows_per_worker;
    } else if (kind == "logistic_synthetic" || kind == "logistic_idx") {
      j["l2"] = l2;
      j["batch_size"] = batch_size;
      j["partition"] = partition;
      j["long_tail_gamma"] = long_tail_gamma;
      if (kind == "logistic_synthetic") {
        j["classes"] = classes;
        j["per_class"] = per_class;
        j["feature_dim"] = feature_dim;
        j["feature_noise"] = feature_noise;
        j["test_per_class"] = test_per_class;
      } else {
        j["images"] = idx_images;
        j["labels"] = idx_labels;
        j["test_images"] = idx_test_images;
        j["test_labels"] = idx_test_labels;
      }
    } else {
      throw std::invalid_argument("unknown task kind: " + kind);
    }
    return j;
  }

  static TaskSpec from_json(const json& j) {
    TaskSpec t;
    t.kind = j.at("kind").get<std::string>();
    if (t.kind == "quadratic") {
      detail::reject_unknown_keys(j, {"kind", "dim", "zeta", "sigma"}, "task");
      t.dim = j.at("dim").get<std::size_t>();
      t.zeta = j.at("zeta").get<double>();
      t.sigma = j.at("sigma").get<double>();
    } else if (t.kind == "lower_bound") {
      detail::reject_unknown_keys(j, {"kind", "mu", "zeta"}, "task");
      t.mu = j.at("mu").get<double>();
      t.zeta = j.at("zeta").get<double>();
    } else if (t.kind == "least_squares") {
      detail::reject_unknown_keys(j, {"kind", "dim", "rows_per_worker"}, "task");
      t.dim = j.at("dim").get<std::size_t>();
      t.rows_per_worker = j.at("rows_per_worker").get<std::size_t>();
    } else if (t.kind == "logistic_synthetic") {
      detail::reject_unknown_keys(j,
          {"kind", "l2", "batch_size", "partition", "long_tail_gamma", "classes",
           "per_class", "feature_dim", "feature_noise", "test_per_class"},
          "task");
      t.l2 = j.at("l2").get<double>();
      t.batch_size = j.at("batch_size").get<std::size_t>();
      t.partition = j.at("partition").get<std::string>();
      t.long_tail_gamma = j.at("long_tail_gamma").get<double>();
      t.classes = j.at("classes").get<int>();
      t.per_class = j.at("per_class").get<std::size_t>();
      t.feature_dim = j.at("feature_dim").get<std::size_t>();
      t.feature_noise = j.at("feature_noise").get<double>();
      t.test_per_class = j.at("test_per_class").get<std::size_t>();
    } else if (t.kind == "logistic_idx") {
      detail::reject_unknown_keys(j,
          {"kind", "l2", "batch_size", "partition", "long_tail_gamma", "images",
           "labels", "test_images", "test_labels"},
          "task");
      t.l2 = j.at("l2").get<double>();
      t.batch_size = j.at("batch_size").get<std::size_t>();
      t.partition = j.at("partition").get<std::string>();
      t.long_tail_gamma = j.at("long_tail_gamma").get<double>();
      t.idx_images = j.at("images").get<std::string>();
      t.idx_labels = j.at("labels").get<std::string>();
      t.idx_test_images = j.at("test_images").get<std::string>();
      t.idx_test_labels = j.at("test_labels").get<std::string>();
    } else {
      throw std::invalid_argument("unknown task kind: " + t.kind);
    }
    return t;
  }
};

struct ExperimentConfig {
  std::string name = "run";
  TaskSpec task;
  std::size_t n = 10;
  std::size_t q = 0;
  std::size_t steps = 100;
  double eta = 0.01;
  double beta = 0.0;
  std::string momentum_form = "convex_combination";
  std::string aggregator = "mean";
  std::size_t krum_q = 0;  // 0 means "use cohort q"
  int rfa_iters = 8;
  double rfa_smoothing = 1e-6;
  double cclip_tau = 0.0;  // 0 means "use 10/(1-beta)"
  std::size_t trim_count = 0;  // 0 means "use cohort q"
  std::size_t bucketing_s = 1;
  std::string attack = "none";
  double attack_epsilon = 0.1;
  std::optional<double> attack_z_override;
  int attack_init_phase_steps = 10;
  bool attack_retarget = false;
  std::vector<std::uint64_t> seeds = {1};
  std::string out_dir = "results";

  json to_json() const {
    json j;
    j["name"] = name;
    j["task"] = task.to_json();
    j["n"] = n;
    j["q"] = q;
    j["steps"] = steps;
    j["eta"] = eta;
    j["beta"] = beta;
    j["momentum_form"] = momentum_form;
    j["aggregator"] = aggregator;
    j["krum_q"] = krum_q;
    j["rfa_iters"] = rfa_iters;
    j["rfa_smoothing"] = rfa_smoothing;
    j["cclip_tau"] = cclip_tau;
    j["trim_count"] = trim_count;
    j["bucketing_s"] = bucketing_s;
    j["attack"] = attack;
    j["attack_epsilon"] = attack_epsilon;
    if (attack_z_override) j["attack_z_override"] = *attack_z_override;
    j["attack_init_phase_steps"] = attack_init_phase_steps;
    j["attack_retarget"] = attack_retarget;
    j["seeds"] = seeds;
    j["out_dir"] = out_dir;
    return j;
  }

  static ExperimentConfig from_json(const json& j) {
    detail::reject_unknown_keys(j,
        {"name", "task", "n", "q", "steps", "eta", "beta", "momentum_form",
         "aggregator", "krum_q", "rfa_iters", "rfa_smoothing", "cclip_tau",
         "trim_count", "bucketing_s", "attack", "attack_epsilon",
         "attack_z_override", "attack_init_phase_steps", "attack_retarget",
         "seeds", "out_dir"},
        "experiment");
    ExperimentConfig c;
    c.name = detail::get_or<std::string>(j, "name", c.name);
    c.task = TaskSpec::from_json(j.at("task"));
    c.n = j.at("n").get<std::size_t>();
    c.q = j.at("q").get<std::size_t>();
    c.steps = j.at("steps").get<std::size_t>();
    c.eta = j.at("eta").get<double>();
    c.beta = detail::get_or<double>(j, "beta", 0.0);
    c.momentum_form = detail::get_or<std::string>(j, "momentum_form", c.momentum_form);
    c.aggregator = j.at("aggregator").get<std::string>();
    c.krum_q = detail::get_or<std::size_t>(j, "krum_q", 0);
    c.rfa_iters = detail::get_or<int>(j, "rfa_iters", 8);
    c.rfa_smoothing = detail::get_or<double>(j, "rfa_smoothing", 1e-6);
    c.cclip_tau = detail::get_or<double>(j, "cclip_tau", 0.0);
    c.trim_count = detail::get_or<std::size_t>(j, "trim_count", 0);
    c.bucketing_s = detail::get_or<std::size_t>(j, "bucketing_s", 1);
    c.attack = detail::get_or<std::string>(j, "attack", "none");
    c.attack_epsilon = detail::get_or<double>(j, "attack_epsilon", 0.1);
    if (j.contains("attack_z_override"))
      c.attack_z_override = j.at("attack_z_override").get<double>();
    c.attack_init_phase_steps = detail::get_or<int>(j, "attack_init_phase_steps", 10);
    c.attack_retarget = detail::get_or<bool>(j, "attack_retarget", false);
    c.seeds = detail::get_or<std::vector<std::uint64_t>>(j, "seeds", {1});
    c.out_dir = detail::get_or<std::string>(j, "out_dir", "results");
    return c;
  }

  TrainerConfig trainer_config(std::uint64_t seed) const {
    TrainerConfig t;
    t.steps = steps;
    t.eta = eta;
    t.beta = beta;
    t.momentum_form = momentum_form_from_string(momentum_form);
    t.aggregator.kind = aggregator_kind_from_string(aggregator);
    t.aggregator.q = krum_q ? krum_q : q;
    t.aggregator.weiszfeld_iters = rfa_iters;
    t.aggregator.weiszfeld_smoothing = rfa_smoothing;
    t.aggregator.clip_radius = cclip_tau > 0 ? cclip_tau : 10.0 / (1.0 - beta);
    t.aggregator.trim_count = trim_count ? trim_count : q;
    t.bucketing_s = bucketing_s;
    t.attack.kind = attack_kind_from_string(attack);
    t.attack.epsilon = attack_epsilon;
    t.attack.z_override = attack_z_override;
    t.attack.init_phase_steps = attack_init_phase_steps;
    t.attack.retarget_each_step = attack_retarget;
    t.cohort = CohortSpec::last_q_byzantine(n, q);
    t.seed = seed;
    return t;
  }
};

/// Evenly spread quadratic centers with exactly the requested zeta^2:
/// centers at +/- r e_{j mod d} with r chosen so mean ||b_j - b_mean||^2 = zeta^2.
inline TaskPtr build_quadratic_task(const TaskSpec& spec, std::size_t n_good,
                                    const SeededRng& rng) {
  auto gen = rng.stream(RngPurpose::init, 0, 0);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<Vec> centers(n_good, Vec(spec.dim, 0.0));
  for (Vec& b : centers)
    for (double& v : b) v = nd(gen);
  const Vec c = mean(centers);
  double spread = 0;
  for (const Vec& b : centers) spread += dist_sq(b, c);
  spread /= static_cast<double>(n_good);
  const double r = spread > 0 ? spec.zeta / std::sqrt(spread) : 0.0;
  for (Vec& b : centers) {
    Vec d = sub(b, c);
    b = scale(d, r);  // recentre at 0, rescale to the requested zeta
  }
  return std::make_shared<QuadraticTask>(std::move(centers), spec.sigma);
}

inline TaskPtr build_classification_task(const TaskSpec& spec, std::size_t n_good,
                                         const SeededRng& rng) {
  Dataset train, test;
  if (spec.kind == "logistic_synthetic") {
    // draw train and test from one generator call so both share the same
    // class means; the generator emits samples class by class
    const Dataset all = make_synthetic_classification(
        spec.classes, spec.per_class + spec.test_per_class, spec.feature_dim,
        spec.feature_noise, rng);
    train.num_classes = test.num_classes = all.num_classes;
    const std::size_t block = spec.per_class + spec.test_per_class;
    for (std::size_t i = 0; i < all.size(); ++i) {
      Dataset& dst = (i % block < spec.per_class) ? train : test;
      dst.features.push_back(all.features[i]);
      dst.labels.push_back(all.labels[i]);
    }
  } else {
    train = ingest_idx(spec.idx_images, spec.idx_labels);
    test = ingest_idx(spec.idx_test_images, spec.idx_test_labels);
  }
  if (spec.long_tail_gamma < 1.0) {
    train = long_tail_subsample(train, spec.long_tail_gamma, rng);
    test = long_tail_subsample(test, spec.long_tail_gamma, rng);
  }
  std::vector<Dataset> shards;
  if (spec.partition == "heterogeneous") {
    shards = partition_heterogeneous(train, n_good, rng);
  } else if (spec.partition == "iid") {
    // shuffled split into equal chunks
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto gen = rng.stream(RngPurpose::data, 11, 0);
    std::shuffle(order.begin(), order.end(), gen);
    Dataset shuffled;
    shuffled.num_classes = train.num_classes;
    for (std::size_t i : order) {
      shuffled.features.push_back(train.features[i]);
      shuffled.labels.push_back(train.labels[i]);
    }
    // reuse the chunking (data already shuffled, so chunks are iid)
    const std::size_t chunk = (shuffled.size() + n_good - 1) / n_good;
    shards.resize(n_good);
    for (std::size_t w = 0; w < n_good; ++w) {
      shards[w].num_classes = train.num_classes;
      for (std::size_t i = w * chunk; i < std::min(shuffled.size(), (w + 1) * chunk); ++i) {
        shards[w].features.push_back(shuffled.features[i]);
        shards[w].labels.push_back(shuffled.labels[i]);
      }
      if (shards[w].size() == 0) throw std::invalid_argument("iid partition: empty shard");
    }
  } else {
    throw std::invalid_argument("unknown partition: " + spec.partition);
  }
  return make_logistic_task(std::move(shards), spec.l2, spec.batch_size, std::move(test));
}

inline TaskPtr build_task(const TaskSpec& spec, std::size_t n_good, std::uint64_t seed) {
  // task construction uses a fixed data seed so that all runs in a preset
  // share the same data; the training seed varies separately
  const SeededRng rng(detail::splitmix64(seed) ^ 0xda7aULL);
  if (spec.kind == "quadratic") return build_quadratic_task(spec, n_good, rng);
  if (spec.kind == "lower_bound")
    throw std::invalid_argument("lower_bound task is driven by the lowerbound preset");
  if (spec.kind == "least_squares")
    return make_consistent_least_squares(n_good, spec.dim, spec.rows_per_worker, rng);
  return build_classification_task(spec, n_good, rng);
}

struct RunResult {
  std::uint64_t seed;
  RunMetrics metrics;
  std::filesystem::path csv_path;
};

/// Execute one experiment config: one training run per seed, one CSV +
/// sidecar pair per run.
inline std::vector<RunResult> run_experiment(const ExperimentConfig& cfg,
                                             const std::filesystem::path& out_dir,
                                             std::uint64_t data_seed = 0) {
  std::filesystem::create_directories(out_dir);
  std::vector<RunResult> results;
  const bool lower_bound = cfg.task.kind == "lower_bound";
  for (std::uint64_t seed : cfg.seeds) {
    const std::size_t n_good = cfg.n - cfg.q;
    TaskPtr task;
    TrainerConfig tc = cfg.trainer_config(seed);
    if (lower_bound) {
      // The instance pair is indistinguishable: the Byzantine workers
      // faithfully simulate their claimed functions, so the executed run
      // treats all n workers as good while the server still assumes q.
      const LowerBoundPair pair = make_lower_bound_pair(
          cfg.task.mu, cfg.task.zeta,
          static_cast<double>(cfg.q) / static_cast<double>(cfg.n), cfg.n);
      task = pair.combined_task();
      tc.cohort = CohortSpec(cfg.n, {});
      tc.attack.kind = AttackKind::none;
      tc.aggregator.q = cfg.krum_q ? cfg.krum_q : cfg.q;
    } else {
      task = build_task(cfg.task, n_good, data_seed);
    }
    const RunMetrics m = train(tc, *task);
    const std::string base = cfg.name + "_seed" + std::to_string(seed);
    const auto csv = out_dir / (base + ".csv");
    write_metrics_csv(m, csv);
    write_metrics_sidecar(m, cfg.to_json(), seed, out_dir / (base + ".json"));
    results.push_back({seed, m, csv});
  }
  return results;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  const json j = json::parse(in, nullptr, /*allow_exceptions=*/true,
                             /*ignore_comments=*/true);
  return ExperimentConfig::from_json(j);
}

}  // namespace byzsim
