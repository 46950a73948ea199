#pragma once

#include "byzsim/experiment.hpp"

namespace byzsim {

struct Preset {
  std::string name;
  std::string description;  // includes the full-scale values the desk-scale
                            // settings were derived from
  std::vector<ExperimentConfig> configs;
};

namespace detail {

inline TaskSpec desk_logistic(const std::string& partition, double gamma = 1.0) {
  TaskSpec t;
  t.kind = "logistic_synthetic";
  t.classes = 10;
  t.per_class = 120;
  t.feature_dim = 16;
  t.feature_noise = 0.15;
  t.l2 = 1e-3;
  t.batch_size = 32;
  t.partition = partition;
  t.long_tail_gamma = gamma;
  t.test_per_class = 40;
  return t;
}

inline ExperimentConfig base_logistic_run(const std::string& name, std::size_t n,
                                          std::size_t q, const std::string& agg,
                                          std::size_t s, double beta,
                                          const std::string& attack) {
  ExperimentConfig c;
  c.name = name;
  c.task = desk_logistic("heterogeneous");
  c.n = n;
  c.q = q;
  c.steps = 300;
  c.eta = 0.05;
  c.beta = beta;
  c.aggregator = agg;
  c.bucketing_s = s;
  c.attack = attack;
  c.seeds = {1, 2, 3};
  return c;
}

}  // namespace detail

inline std::vector<Preset> preset_catalog() {
  std::vector<Preset> out;
  const std::vector<std::string> aggs = {"mean", "krum", "cm", "rfa", "cclip"};
  const std::vector<std::string> attacks = {"bit_flip", "label_flip", "mimic",
                                            "ipm", "alie"};

  {
    Preset p;
    p.name = "imbalance-no-attack";
    p.description =
        "Aggregators on long-tail non-iid data without Byzantine workers "
        "(full scale: MNIST MLP, n=24, q=0, 4500 iters, alpha=500; desk "
        "scale: synthetic 10-class logistic, 300 steps, gamma=0.8).";
    for (const std::string& a : aggs)
      for (std::size_t s : {std::size_t{1}, std::size_t{2}}) {
        ExperimentConfig c = detail::base_logistic_run(
            "imbalance_" + a + "_s" + std::to_string(s), 24, 0, a, s, 0.0, "none");
        c.task.long_tail_gamma = 0.8;
        p.configs.push_back(c);
      }
    out.push_back(std::move(p));
  }
  {
    Preset p;
    p.name = "mimic-vs-median";
    p.description =
        "Mimic attack vs every aggregator with and without s=2 bucketing "
        "(full scale: MNIST, n=25, q=5, 600 iters; desk scale: synthetic "
        "logistic, 300 steps).";
    for (const std::string& a : aggs)
      for (std::size_t s : {std::size_t{1}, std::size_t{2}})
        p.configs.push_back(detail::base_logistic_run(
            "mimic_" + a + "_s" + std::to_string(s), 25, 5, a, s, 0.0, "mimic"));
    out.push_back(std::move(p));
  }
  {
    Preset p;
    p.name = "bucketing-fix";
    p.description =
        "Bucketing (s=2) applied to the no-attack long-tail and the mimic "
        "settings (full scale: MNIST tables with and without bucketing).";
    for (const std::string& a : aggs) {
      ExperimentConfig c = detail::base_logistic_run("fix_longtail_" + a, 24, 0,
                                                     a, 2, 0.0, "none");
      c.task.long_tail_gamma = 0.8;
      p.configs.push_back(c);
      p.configs.push_back(detail::base_logistic_run("fix_mimic_" + a, 25, 5, a, 2,
                                                    0.0, "mimic"));
    }
    out.push_back(std::move(p));
  }
  {
    Preset p;
    p.name = "attack-grid";
    p.description =
        "Krum/CM/RFA/CClip x {s=1, s=2} x 5 attacks x {beta=0, beta=0.9} "
        "(full scale: MNIST, n=25, q=5, 600 iters).";
    for (const std::string& a : {"krum", "cm", "rfa", "cclip"})
      for (std::size_t s : {std::size_t{1}, std::size_t{2}})
        for (double beta : {0.0, 0.9})
          for (const std::string& atk : attacks) {
            ExperimentConfig c = detail::base_logistic_run(
                "grid_" + std::string(a) + "_s" + std::to_string(s) + "_b" +
                    (beta > 0 ? "09" : "0") + "_" + atk,
                25, 5, a, s, beta, atk);
            c.seeds = {1};
            p.configs.push_back(c);
          }
    out.push_back(std::move(p));
  }
  {
    Preset p;
    p.name = "s-sweep";
    p.description =
        "CClip under IPM with varying bucket size s (full scale: n=53 "
        "cluster, q=5; desk scale: n=24, q=5).";
    for (std::size_t s : {std::size_t{1}, std::size_t{2}, std::size_t{3},
                          std::size_t{5}}) {
      ExperimentConfig c = detail::base_logistic_run(
          "ssweep_cclip_s" + std::to_string(s), 24, 5, "cclip", s, 0.9, "ipm");
      c.seeds = {1};
      p.configs.push_back(c);
    }
    out.push_back(std::move(p));
  }
  {
    Preset p;
    p.name = "lowerbound";
    p.description =
        "Indistinguishable instance pair (mu=1, zeta=1, delta=0.2, n=10); "
        "expected suboptimality gap >= delta*zeta^2/(4 mu) = 0.05 for every "
        "aggregator.";
    for (const std::string& a : aggs)
      for (std::size_t s : {std::size_t{1}, std::size_t{2}}) {
        ExperimentConfig c;
        c.name = "lowerbound_" + a + "_s" + std::to_string(s);
        c.task.kind = "lower_bound";
        c.task.mu = 1.0;
        c.task.zeta = 1.0;
        c.n = 10;
        c.q = 2;
        c.steps = 300;
        c.eta = 0.1;
        c.aggregator = a;
        c.bucketing_s = s;
        c.seeds = {1};
        p.configs.push_back(c);
      }
    out.push_back(std::move(p));
  }
  {
    Preset p;
    p.name = "overparam";
    p.description =
        "Consistent least squares under IPM, sweeping parameter width "
        "(interpolation regimes d = 20/40/80, n=10, q=2, cclip + s=2).";
    for (std::size_t d : {std::size_t{20}, std::size_t{40}, std::size_t{80}}) {
      ExperimentConfig c;
      c.name = "overparam_d" + std::to_string(d);
      c.task.kind = "least_squares";
      c.task.dim = d;
      c.task.rows_per_worker = 2;
      c.n = 10;
      c.q = 2;
      c.steps = 1000;
      c.eta = 0.5;
      c.beta = 0.9;
      c.aggregator = "cclip";
      c.bucketing_s = 2;
      c.attack = "ipm";
      c.seeds = {1};
      p.configs.push_back(c);
    }
    out.push_back(std::move(p));
  }
  return out;
}

inline const Preset* find_preset(const std::vector<Preset>& catalog,
                                 const std::string& name) {
  for (const Preset& p : catalog)
    if (p.name == name) return &p;
  return nullptr;
}

}  // namespace byzsim
