// Acceptance gate: one pass/fail line per criterion, nonzero exit on any
// failure. argv[1] (optional) is the path to the CLI binary, used for the
// end-to-end determinism check.
#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "byzsim/certification.hpp"
#include "byzsim/presets.hpp"
#include "oracles.hpp"

using namespace byzsim;
namespace fs = std::filesystem;

namespace {

struct Gate {
  int failures = 0;
  void report(int id, const std::string& what, bool ok, const std::string& detail) {
    std::printf("%s  criterion %2d: %s (%s)\n", ok ? "PASS" : "FAIL", id,
                what.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
};

double elapsed_s(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

const fs::path kWork = fs::temp_directory_path() / "byzsim_acceptance";

// ---------------------------------------------------------------------------
// 1. bucketing variance reduction
void criterion1(Gate& g) {
  const auto t0 = std::chrono::steady_clock::now();
  auto sampler = [](std::mt19937_64& rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    return Vec{nd(rng)};
  };
  const double delta = 3.0 / 24.0;
  bool ok = true;
  std::string detail;
  for (std::size_t s : {std::size_t{2}, std::size_t{3}}) {
    const SeededRng rng(41 + s);
    const auto rep = lemma1_check(sampler, 24, s, delta, 1000, rng);
    const double target = 1.0 / static_cast<double>(s);
    const bool ratio_ok = rep.variance_ratio >= target - 0.05 &&
                          rep.variance_ratio <= target + 0.05;
    const bool frac_ok = rep.good_bucket_frac >= 1.0 - delta * static_cast<double>(s);
    ok = ok && ratio_ok && frac_ok && rep.mean_preserved;
    detail += fmt("s=%zu ratio=%.3f min_good_frac=%.3f; ", s, rep.variance_ratio,
                  rep.good_bucket_frac);
  }
  const double dt = elapsed_s(t0);
  ok = ok && dt < 10.0;
  g.report(1, "bucketing halves/thirds the good-pair variance", ok,
           detail + fmt("%.1fs", dt));
}

// 2. robust-aggregator certification
void criterion2(Gate& g) {
  const auto t0 = std::chrono::steady_clock::now();
  struct Case {
    AggregatorKind kind;
    std::size_t s;
  };
  // bucket size floor(delta_max / delta) at delta = 0.1; cclip certified
  // without bucketing
  const std::vector<Case> cases = {{AggregatorKind::krum, 1},
                                   {AggregatorKind::cm, 2},
                                   {AggregatorKind::rfa, 2},
                                   {AggregatorKind::cclip, 1}};
  bool ok = true;
  std::string detail;
  for (const Case& c : cases) {
    const auto res = certify_aggregator(c.kind, 20, 0.1, c.s, 1000, 97);
    ok = ok && res.pass;
    detail += fmt("%s err=%.3g<=%.3g; ", to_string(c.kind), res.mean_error, res.bound);
  }
  const double dt = elapsed_s(t0);
  ok = ok && dt < 60.0;
  g.report(2, "certified aggregation error stays within c*delta*rho^2", ok,
           detail + fmt("%.1fs", dt));
}

// 3. alternating +-1 failure example and its bucketing fix
void criterion3(Gate& g) {
  std::vector<Vec> msgs;
  for (std::size_t i = 0; i < 25; ++i) msgs.push_back({i % 2 == 0 ? 1.0 : -1.0});

  AggregatorConfig krum;
  krum.kind = AggregatorKind::krum;
  krum.q = 2;
  AggregatorConfig cm;
  cm.kind = AggregatorKind::cm;
  AggregatorConfig rfa;
  rfa.kind = AggregatorKind::rfa;
  rfa.weiszfeld_iters = 400;
  AggregatorConfig mn;
  mn.kind = AggregatorKind::mean;

  const double krum_out = std::abs(aggregate(krum, msgs, {})[0]);
  const double cm_out = std::abs(aggregate(cm, msgs, {})[0]);
  const double rfa_out = std::abs(aggregate(rfa, msgs, {})[0]);
  const double mean_out = std::abs(aggregate(mn, msgs, {})[0]);
  bool ok = krum_out == 1.0 && cm_out == 1.0 && rfa_out >= 1.0 - 1e-3 &&
            mean_out <= 1.0 / 25.0;

  std::string detail = fmt("krum=%.3f cm=%.3f rfa=%.5f mean=%.4f; s=2:", krum_out,
                           cm_out, rfa_out, mean_out);
  const SeededRng seeds(7);
  for (AggregatorConfig a : {mn, krum, cm, rfa}) {
    double acc = 0;
    for (std::uint64_t t = 0; t < 500; ++t) {
      auto prng = seeds.stream(RngPurpose::permutation, 0, t);
      acc += std::abs(robust_aggregate(msgs, 2, a, prng)[0]);
    }
    acc /= 500.0;
    ok = ok && acc <= 0.6;
    detail += fmt(" %s=%.3f", to_string(a.kind), acc);
  }
  g.report(3, "median-type rules output +-1 on alternating data; bucketing fixes it",
           ok, detail);
}

// 4. mimic attack raises robust-aggregation error; bucketing shrinks the gap
void criterion4(Gate& g) {
  const std::size_t n = 25, q = 5, d = 32, trials = 500;
  const SeededRng seeds(123);
  const CohortSpec cohort = CohortSpec::last_q_byzantine(n, q);
  const std::set<std::size_t> good = cohort.good_set();

  AggregatorConfig mn, cm, rfa, krum;
  mn.kind = AggregatorKind::mean;
  cm.kind = AggregatorKind::cm;
  rfa.kind = AggregatorKind::rfa;
  krum.kind = AggregatorKind::krum;
  krum.q = q;

  auto errs = [&](const AggregatorConfig& a) {
    double e1 = 0, e2 = 0;
    for (std::uint64_t t = 0; t < trials; ++t) {
      auto rng = seeds.stream(RngPurpose::data, 0, t);
      std::bernoulli_distribution coin(0.5);
      std::vector<Vec> msgs(n, Vec(d));
      for (std::size_t i = 0; i < n - q; ++i)
        for (double& v : msgs[i]) v = coin(rng) ? 1.0 : -1.0;
      for (std::size_t i = n - q; i < n; ++i) msgs[i] = msgs[0];  // mimic worker 1
      e1 += aggregation_error(aggregate(a, msgs, Vec(d, 0.0)), msgs, good);
      auto prng = seeds.stream(RngPurpose::permutation, 0, t);
      e2 += aggregation_error(robust_aggregate(msgs, 2, a, prng), msgs, good);
    }
    return std::pair<double, double>{e1 / trials, e2 / trials};
  };

  const auto [mean1, mean2] = errs(mn);
  bool ok = true;
  std::string detail = fmt("mean=%.2f/%.2f", mean1, mean2);
  for (const auto& [name, a] : {std::pair<const char*, AggregatorConfig>{"cm", cm},
                                {"rfa", rfa},
                                {"krum", krum}}) {
    const auto [e1, e2] = errs(a);
    // error above plain averaging without bucketing; the excess over the
    // mean's own (unavoidable) mimic error shrinks at least 2x with s=2
    const bool exceeds = e1 > mean1;
    const bool shrinks = (e1 - mean1) >= 2.0 * (e2 - mean2);
    ok = ok && exceeds && shrinks;
    detail += fmt(" %s=%.2f/%.2f excess %.2f->%.2f", name, e1, e2, e1 - mean1,
                  e2 - mean2);
  }
  g.report(4, "mimic hurts median rules most; bucketing shrinks the excess >=2x",
           ok, detail);
}

// 5. "a little is enough" z values
void criterion5(Gate& g) {
  const double z1 = alie_z(25, 5);
  const double z2 = alie_z(20, 3);
  const double o1 = oracles::oracle_inverse_normal_cdf((20.0 - 8.0) / 20.0);
  const double o2 = oracles::oracle_inverse_normal_cdf((17.0 - 8.0) / 17.0);
  const bool ok = std::abs(z1 - 0.2533) <= 1e-3 && std::abs(z2 - 0.0738) <= 1e-3 &&
                  std::abs(z1 - o1) <= 1e-3 && std::abs(z2 - o2) <= 1e-3;
  g.report(5, "alie z matches the inverse-cdf oracle at the pinned cohorts", ok,
           fmt("z(25,5)=%.4f z(20,3)=%.4f", z1, z2));
}

// 6. heterogeneity lower bound on the indistinguishable pair
void criterion6(Gate& g) {
  const auto catalog = preset_catalog();
  const Preset* p = find_preset(catalog, "lowerbound");
  const LowerBoundPair pair = make_lower_bound_pair(1.0, 1.0, 0.2, 10);
  bool ok = p != nullptr;
  double min_gap = std::numeric_limits<double>::infinity();
  if (p) {
    for (const auto& c : p->configs) {
      const auto runs = run_experiment(c, kWork / "lowerbound");
      for (const auto& r : runs) {
        const double gap = lower_bound_gap(r.metrics.final_x[0], pair);
        min_gap = std::min(min_gap, gap);
        ok = ok && gap >= 0.05 - 1e-6;
      }
    }
  }
  g.report(6, "every aggregator pays >= delta*zeta^2/(4mu) on the instance pair",
           ok, fmt("min gap=%.4f (bound 0.05)", min_gap));
}

// 7. stationary radius under attack with a momentum-tuned step size
void criterion7(Gate& g) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig c;
  c.name = "radius";
  c.task.kind = "quadratic";
  c.task.dim = 8;
  c.task.zeta = 1.0;
  c.task.sigma = 0.0;
  c.n = 25;
  c.q = 5;
  c.steps = 300;
  const auto hp = tuned_hyperparams(1.0, 1.0, 16.0, 0.2, 0.0, 1.0, 25, c.steps);
  c.eta = hp.eta;   // sigma=0: eta = 1/(8L), beta = 0
  c.beta = hp.beta;
  c.aggregator = "rfa";
  c.bucketing_s = choose_s(0.2, rfa_cert().delta_max, 5);  // = 1
  c.attack = "alie";
  c.attack_z_override = 6.0;  // drive the attack outside the good spread
  c.seeds = {1};

  const auto robust = run_experiment(c, kWork / "radius");
  c.aggregator = "mean";
  c.bucketing_s = 1;
  const auto plain = run_experiment(c, kWork / "radius");

  const double r_grad = robust[0].metrics.final_grad_norm_sq();
  const double m_grad = plain[0].metrics.final_grad_norm_sq();
  const double bound = 60.0 * rfa_cert().c * 0.2 * 1.0;

  // no upward trend over the last 10%: compare the two halves of the window
  const auto& rec = robust[0].metrics.records;
  const std::size_t h = rec.size() / 20;
  double last = 0, prev = 0;
  for (std::size_t i = rec.size() - h; i < rec.size(); ++i) last += rec[i].grad_norm_sq;
  for (std::size_t i = rec.size() - 2 * h; i < rec.size() - h; ++i)
    prev += rec[i].grad_norm_sq;
  const bool no_trend = last <= prev * 1.05 + 1e-12;

  const double dt = elapsed_s(t0);
  const bool ok =
      r_grad <= bound && no_trend && m_grad >= 5.0 * r_grad && dt < 30.0;
  g.report(7, "robust run stays inside the stationary radius; mean ends >=5x worse",
           ok,
           fmt("robust=%.3g<=%.0f mean=%.3g (%.1fx) trend %.3g->%.3g %.1fs", r_grad,
               bound, m_grad, m_grad / r_grad, prev / h, last / h, dt));
}

// 8. overparameterized convergence despite attackers
void criterion8(Gate& g) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig c;
  c.name = "overparam";
  c.task.kind = "least_squares";
  c.task.dim = 40;
  c.task.rows_per_worker = 2;
  c.n = 25;
  c.q = 5;
  c.steps = 3000;
  c.eta = 0.5;
  c.beta = 0.9;
  c.aggregator = "cclip";
  c.bucketing_s = 2;
  c.attack = "ipm";
  c.attack_epsilon = 0.1;
  c.seeds = {1};
  const auto runs = run_experiment(c, kWork / "overparam");
  const double grad = runs[0].metrics.final_grad_norm_sq();
  const double dt = elapsed_s(t0);
  const bool ok = !runs[0].metrics.diverged && grad <= 1e-6 && dt < 30.0;
  g.report(8, "consistent least squares converges to the optimum under ipm", ok,
           fmt("final grad^2=%.3g %.1fs", grad, dt));
}

// 9. no-attack recovery of the non-robust rate
void criterion9(Gate& g) {
  ExperimentConfig c;
  c.name = "recovery";
  c.task.kind = "quadratic";
  c.task.dim = 4;
  c.task.zeta = 1.0;
  c.task.sigma = 0.5;
  c.n = 10;
  c.q = 0;
  c.steps = 400;
  c.eta = 0.05;
  c.aggregator = "cm";
  c.bucketing_s = 2;
  c.seeds = {1};
  const auto robust = run_experiment(c, kWork / "recovery");
  c.aggregator = "mean";
  c.bucketing_s = 1;
  const auto plain = run_experiment(c, kWork / "recovery");
  const double rl = robust[0].metrics.final_loss();
  const double ml = plain[0].metrics.final_loss();
  const bool ok = rl <= 2.0 * ml && ml <= 2.0 * rl;
  g.report(9, "bucketed robust training matches mean sgd without attackers", ok,
           fmt("cm+s2 loss=%.4f mean loss=%.4f", rl, ml));
}

// 10. oracle equivalences
void criterion10(Gate& g) {
  bool ok = true;
  std::string detail;

  // geometric median: tight majority cluster plus far outliers
  double worst8 = 0, worst200 = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(500 + seed);
    std::normal_distribution<double> center(0.0, 1.0);
    std::normal_distribution<double> within(0.0, 1e-4);
    std::normal_distribution<double> far(10.0, 1.0);
    const std::size_t n = 14, d = 4, outliers = 2;
    Vec c(d);
    for (double& v : c) v = center(rng);
    std::vector<Vec> pts(n, Vec(d));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < d; ++k)
        pts[i][k] = c[k] + (i < n - outliers ? within(rng) : far(rng));
    const Vec ref = oracles::oracle_geometric_median(pts);
    worst8 = std::max(worst8, std::sqrt(dist_sq(aggregate_rfa(pts, 8), ref)));
    worst200 = std::max(worst200, std::sqrt(dist_sq(aggregate_rfa(pts, 200), ref)));
  }
  ok = ok && worst8 <= 1e-3 && worst200 <= 1e-6;
  detail += fmt("rfa T8=%.2g T200=%.2g; ", worst8, worst200);

  // krum argmin vs exhaustive score oracle over tie-free instances
  std::size_t mismatches = 0, done = 0;
  std::mt19937_64 krng(2024);
  std::normal_distribution<double> nd(0.0, 1.0);
  while (done < 1000) {
    const std::size_t n = 9, q = 2, d = 3;
    std::vector<Vec> msgs(n, Vec(d));
    for (auto& v : msgs)
      for (double& x : v) x = nd(krng);
    const std::vector<double> scores = oracles::oracle_krum_score(msgs, q);
    std::vector<double> sorted = scores;
    std::sort(sorted.begin(), sorted.end());
    if (sorted[1] - sorted[0] < 1e-9) continue;  // tie: skip
    ++done;
    const std::size_t best = static_cast<std::size_t>(
        std::min_element(scores.begin(), scores.end()) - scores.begin());
    if (aggregate_krum(msgs, q) != msgs[best]) ++mismatches;
  }
  ok = ok && mismatches == 0;
  detail += fmt("krum mismatches=%zu/1000; ", mismatches);

  // logistic gradient vs central finite differences
  const SeededRng drng(5150);
  const Dataset data = make_synthetic_classification(4, 12, 3, 0.3, drng);
  const TaskPtr task = make_logistic_task({data}, 1e-3, 4, Dataset{});
  std::mt19937_64 xrng(3);
  Vec x(task->dim());
  for (double& v : x) v = 0.2 * nd(xrng);
  const Vec grad = task->full_gradient(x);
  const Vec fd = oracles::oracle_finite_diff_gradient(
      [&](const Vec& p) { return task->loss(p); }, x);
  const double rel = std::sqrt(dist_sq(grad, fd)) / std::max(1e-300, norm(grad));
  ok = ok && rel <= 1e-5;
  detail += fmt("logistic fd rel=%.2g", rel);

  g.report(10, "main implementations agree with the independent oracles", ok, detail);
}

// 11. attack-grid accuracy ordering on label-sorted 10-class data
ExperimentConfig grid_config(std::size_t q, const std::string& agg, std::size_t s,
                             double beta, const std::string& attack) {
  ExperimentConfig c;
  c.name = "grid_" + agg + "_s" + std::to_string(s) + (beta > 0 ? "_b09_" : "_b0_") +
           attack;
  c.task = detail::desk_logistic("heterogeneous");
  c.task.feature_noise = 0.10;
  c.n = 25;
  c.q = q;
  c.steps = 800;
  c.eta = 0.05;
  c.beta = beta;
  c.aggregator = agg;
  c.bucketing_s = s;
  c.attack = attack;
  c.seeds = {1, 2};
  return c;
}

double grid_accuracy(const ExperimentConfig& c) {
  double s = 0;
  const auto runs = run_experiment(c, kWork / "grid");
  for (const auto& r : runs) s += r.metrics.mean_accuracy_last(c.steps / 10);
  return s / static_cast<double>(runs.size());
}

void criterion11(Gate& g) {
  const auto t0 = std::chrono::steady_clock::now();
  const double base = grid_accuracy(grid_config(0, "mean", 1, 0.0, "none"));
  bool ok = true;
  std::string detail = fmt("base=%.3f", base);
  for (const std::string atk : {"bit_flip", "label_flip", "mimic", "ipm", "alie"}) {
    for (const std::string agg : {"krum", "cm", "rfa"}) {
      const double plain = grid_accuracy(grid_config(5, agg, 1, 0.0, atk));
      const double fixed = grid_accuracy(grid_config(5, agg, 2, 0.9, atk));
      if (fixed < plain) {
        ok = false;
        detail += fmt(" [%s/%s %.3f<%.3f]", atk.c_str(), agg.c_str(), fixed, plain);
      }
    }
    const double cc = grid_accuracy(grid_config(5, "cclip", 2, 0.9, atk));
    if (cc < base - 0.05) {
      ok = false;
      detail += fmt(" [cclip/%s %.3f]", atk.c_str(), cc);
    }
  }
  const double dt = elapsed_s(t0);
  ok = ok && dt < 600.0;
  g.report(11, "bucketing+momentum never hurts; cclip stays within 5pp of baseline",
           ok, detail + fmt(" %.0fs", dt));
}

// 12. byte-identical reruns, including through the command line interface
void criterion12(Gate& g, const char* cli) {
  bool ok = true;
  std::string detail;

  std::vector<ExperimentConfig> reps;
  {
    ExperimentConfig c;
    c.name = "det_quadratic";
    c.task.kind = "quadratic";
    c.task.dim = 8;
    c.task.zeta = 1.0;
    c.task.sigma = 0.3;
    c.n = 25;
    c.q = 5;
    c.steps = 120;
    c.eta = 0.05;
    c.beta = 0.9;
    c.aggregator = "rfa";
    c.bucketing_s = 2;
    c.attack = "alie";
    c.seeds = {1};
    reps.push_back(c);
  }
  {
    ExperimentConfig c;
    c.name = "det_lsq";
    c.task.kind = "least_squares";
    c.task.dim = 40;
    c.task.rows_per_worker = 2;
    c.n = 25;
    c.q = 5;
    c.steps = 200;
    c.eta = 0.5;
    c.beta = 0.9;
    c.aggregator = "cclip";
    c.bucketing_s = 2;
    c.attack = "ipm";
    c.seeds = {1};
    reps.push_back(c);
  }
  {
    ExperimentConfig c = grid_config(5, "cm", 2, 0.9, "mimic");
    c.name = "det_logistic";
    c.steps = 120;
    c.seeds = {1};
    reps.push_back(c);
  }
  {
    ExperimentConfig c;
    c.name = "det_lowerbound";
    c.task.kind = "lower_bound";
    c.task.mu = 1.0;
    c.task.zeta = 1.0;
    c.n = 10;
    c.q = 2;
    c.steps = 150;
    c.eta = 0.1;
    c.aggregator = "cm";
    c.bucketing_s = 2;
    c.seeds = {1};
    reps.push_back(c);
  }

  for (const auto& c : reps) {
    const auto a = run_experiment(c, kWork / "det_a" / c.name);
    const auto b = run_experiment(c, kWork / "det_b" / c.name);
    const bool same = !a.empty() && slurp(a[0].csv_path) == slurp(b[0].csv_path) &&
                      !slurp(a[0].csv_path).empty();
    ok = ok && same;
    detail += fmt("%s=%s ", c.name.c_str(), same ? "ok" : "DIFFERS");
  }

  if (cli) {
    const fs::path cfg_path = kWork / "det_cli.json";
    {
      std::ofstream out(cfg_path);
      out << reps[0].to_json().dump(2) << "\n";
    }
    const fs::path oa = kWork / "det_cli_a", ob = kWork / "det_cli_b";
    bool cli_ok = true;
    for (const fs::path& o : {oa, ob}) {
      const std::string cmd = std::string("\"") + cli + "\" run --config \"" +
                              cfg_path.string() + "\" --out \"" + o.string() +
                              "\" > /dev/null";
      if (std::system(cmd.c_str()) != 0) cli_ok = false;
    }
    const fs::path csv = "det_quadratic_seed1.csv";
    cli_ok = cli_ok && slurp(oa / csv) == slurp(ob / csv) && !slurp(oa / csv).empty();
    ok = ok && cli_ok;
    detail += fmt("cli=%s", cli_ok ? "ok" : "DIFFERS");
  } else {
    detail += "cli=skipped";
  }

  g.report(12, "repeated runs produce byte-identical metrics files", ok, detail);
}

}  // namespace

int main(int argc, char** argv) {
  std::error_code ec;
  fs::remove_all(kWork, ec);
  fs::create_directories(kWork);

  Gate gate;
  criterion1(gate);
  criterion2(gate);
  criterion3(gate);
  criterion4(gate);
  criterion5(gate);
  criterion6(gate);
  criterion7(gate);
  criterion8(gate);
  criterion9(gate);
  criterion10(gate);
  criterion11(gate);
  criterion12(gate, argc > 1 ? argv[1] : nullptr);

  if (gate.failures == 0)
    std::printf("all 12 criteria passed\n");
  else
    std::printf("%d criteria FAILED\n", gate.failures);
  return gate.failures == 0 ? 0 : 1;
}
