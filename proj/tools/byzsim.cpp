#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "byzsim/certification.hpp"
#include "byzsim/experiment.hpp"
#include "byzsim/presets.hpp"

namespace {

std::filesystem::path default_out_dir() {
  if (const char* env = std::getenv("BYZSIM_OUT")) return env;
  return "results";
}

void print_run_summaries(const std::vector<byzsim::RunResult>& runs) {
  for (const auto& r : runs) {
    const auto& m = r.metrics;
    std::cout << r.csv_path.string() << "  seed=" << r.seed
              << "  final_loss=" << m.final_loss()
              << "  final_grad_norm_sq=" << m.final_grad_norm_sq();
    if (!m.records.empty() && m.records.back().accuracy)
      std::cout << "  acc(last150)=" << m.mean_accuracy_last(150);
    if (m.diverged) std::cout << "  DIVERGED";
    std::cout << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Byzantine-robust distributed optimization simulator"};
  app.require_subcommand(1);

  // run
  auto* run_cmd = app.add_subcommand("run", "Execute an experiment config");
  std::string config_path;
  std::optional<std::uint64_t> seed_override;
  std::string out_override;
  run_cmd->add_option("--config", config_path, "Path to JSON config (comments allowed)")
      ->required();
  run_cmd->add_option("--seed", seed_override, "Override the config's seed list");
  run_cmd->add_option("--out", out_override, "Output directory");

  // preset
  auto* preset_cmd = app.add_subcommand("preset", "Run a named experiment preset");
  std::string preset_name;
  std::string preset_out;
  bool list_presets = false;
  preset_cmd->add_option("name", preset_name, "Preset name");
  preset_cmd->add_option("--out", preset_out, "Output directory");
  preset_cmd->add_flag("--list", list_presets, "List available presets");

  // certify-aggregator
  auto* cert_cmd = app.add_subcommand("certify-aggregator",
                                      "Monte-Carlo robustness certification");
  std::string cert_agg = "rfa";
  std::size_t cert_s = 0;
  double cert_delta = 0.1;
  std::size_t cert_trials = 1000;
  cert_cmd->add_option("--aggregator", cert_agg, "mean|krum|cm|rfa|cclip");
  cert_cmd->add_option("--s", cert_s, "Bucket size (0 = floor(delta_max/delta))");
  cert_cmd->add_option("--delta", cert_delta, "Byzantine fraction");
  cert_cmd->add_option("--trials", cert_trials, "Monte-Carlo trials");

  // lemma1
  auto* lemma_cmd = app.add_subcommand("lemma1", "Bucketing variance-reduction report");
  std::size_t l_n = 24, l_s = 2, l_trials = 1000;
  double l_delta = 0.0;
  lemma_cmd->add_option("--n", l_n, "Worker count");
  lemma_cmd->add_option("--s", l_s, "Bucket size");
  lemma_cmd->add_option("--trials", l_trials, "Monte-Carlo trials");
  lemma_cmd->add_option("--delta", l_delta, "Byzantine fraction");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) ? 2 : 0;
  }

  try {
    if (*run_cmd) {
      byzsim::ExperimentConfig cfg = byzsim::load_config(config_path);
      if (seed_override) cfg.seeds = {*seed_override};
      const std::filesystem::path out =
          !out_override.empty() ? std::filesystem::path(out_override)
          : !cfg.out_dir.empty() ? std::filesystem::path(cfg.out_dir)
                                 : default_out_dir();
      print_run_summaries(byzsim::run_experiment(cfg, out));
      return 0;
    }
    if (*preset_cmd) {
      const auto catalog = byzsim::preset_catalog();
      if (list_presets || preset_name.empty()) {
        for (const auto& p : catalog)
          std::cout << p.name << "\n    " << p.description << '\n';
        return list_presets || preset_name.empty() ? 0 : 2;
      }
      const byzsim::Preset* p = byzsim::find_preset(catalog, preset_name);
      if (!p) {
        std::cerr << "unknown preset: " << preset_name << '\n';
        return 2;
      }
      const std::filesystem::path out =
          !preset_out.empty() ? std::filesystem::path(preset_out)
                              : default_out_dir() / p->name;
      for (const auto& cfg : p->configs)
        print_run_summaries(byzsim::run_experiment(cfg, out));
      return 0;
    }
    if (*cert_cmd) {
      const auto kind = byzsim::aggregator_kind_from_string(cert_agg);
      const auto cert = byzsim::certification_constants(
          kind, 4);
      const std::size_t s =
          cert_s > 0 ? cert_s
                     : byzsim::choose_s(cert_delta, cert.delta_max, 5);
      const auto res = byzsim::certify_aggregator(kind, 20, cert_delta, s,
                                                  cert_trials, 12345);
      std::cout << "aggregator=" << cert_agg << " s=" << res.s
                << " delta=" << res.delta << " nu=" << res.nu << " c=" << res.c
                << "\nmean_error=" << res.mean_error << " bound=" << res.bound
                << " -> " << (res.pass ? "PASS" : "FAIL") << '\n';
      return res.pass ? 0 : 1;
    }
    if (*lemma_cmd) {
      const byzsim::SeededRng rng(99);
      auto sampler = [](std::mt19937_64& g) {
        std::normal_distribution<double> nd(0.0, 1.0);
        return byzsim::Vec{nd(g)};
      };
      const auto rep =
          byzsim::lemma1_check(sampler, l_n, l_s, l_delta, l_trials, rng);
      std::cout << "n=" << l_n << " s=" << l_s << " trials=" << l_trials
                << " delta=" << l_delta
                << "\nvariance_ratio=" << rep.variance_ratio
                << " (expected ~" << 1.0 / static_cast<double>(l_s) << ")"
                << "\ngood_bucket_frac=" << rep.good_bucket_frac
                << " (bound " << 1.0 - l_delta * static_cast<double>(l_s) << ")"
                << "\nmean_preserved=" << (rep.mean_preserved ? "yes" : "no")
                << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
