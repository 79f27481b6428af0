// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: run policy sweeps, the prefilter ablation, the toy
// posterior check, and synthetic pool generation.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "qpo/errors.hpp"
#include "qpo/loop.hpp"
#include "qpo/manifest.hpp"
#include "qpo/sweep.hpp"

namespace {

struct SweepFlags {
  std::string config;
  std::string dataset;
  std::string out;
  std::string seeds;
  std::string policies;
  unsigned threads = 0;
};

void add_sweep_flags(CLI::App* cmd, SweepFlags& f, bool with_policies) {
  cmd->add_option("--config", f.config, "INI configuration file")->required();
  cmd->add_option("--dataset", f.dataset, "pool file (overrides dataset.path)");
  cmd->add_option("--out", f.out, "output directory (overrides run.out)");
  cmd->add_option("--seeds", f.seeds, "seed list, e.g. 0,1,2 or 0-9 (overrides run.seeds)");
  if (with_policies) cmd->add_option("--policies", f.policies, "comma-separated policies (overrides policy.policies)");
  cmd->add_option("--threads", f.threads, "worker threads (overrides run.threads)");
}

qpo::RunManifest resolve(const SweepFlags& f) {
  auto m = qpo::load_manifest(f.config);
  if (!f.dataset.empty()) {
    m.dataset.path = f.dataset;
    m.dataset.synthetic.reset();
  }
  if (!f.out.empty()) m.out_dir = f.out;
  if (!f.seeds.empty()) m.seeds = qpo::parse_seed_list(f.seeds);
  if (!f.policies.empty()) m.policies = qpo::parse_policy_list(f.policies);
  if (f.threads > 0) m.threads = f.threads;
  m.validate();
  return m;
}

int report(const qpo::SweepResult& result, const std::string& out_dir) {
  std::size_t failed = 0;
  for (const auto& run : result.runs) {
    if (!run.failed) continue;
    ++failed;
    std::cerr << "campaign " << run.label << " seed " << run.seed << " failed: " << run.error << '\n';
  }
  std::cout << result.runs.size() - failed << "/" << result.runs.size() << " campaigns completed; output in "
            << out_dir << '\n';
  return result.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Batched Bayesian optimization with multipoint probability of optimality"};
  app.require_subcommand(1);

  SweepFlags run_flags;
  auto* run = app.add_subcommand("run", "run campaigns for every (policy, seed) pair");
  add_sweep_flags(run, run_flags, true);

  SweepFlags ablate_flags;
  auto* ablate = app.add_subcommand("ablate-prefilter", "compare greedy and UCB prefilters under qPO");
  add_sweep_flags(ablate, ablate_flags, false);

  std::uint64_t toy_seed = 0;
  std::int64_t toy_samples = 1000000;
  std::size_t toy_trials = 100000;
  unsigned toy_threads = 1;
  auto* toy = app.add_subcommand("toycheck", "check qPO, greedy and pTS on the three-candidate toy posterior");
  toy->add_option("--seed", toy_seed, "random seed");
  toy->add_option("--samples", toy_samples, "Monte Carlo samples for qPO scores");
  toy->add_option("--trials", toy_trials, "pTS repetitions");
  toy->add_option("--threads", toy_threads, "worker threads");

  qpo::SyntheticSpec synth_spec;
  std::string synth_generator = "multimodal";
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "write a synthetic pool file");
  synth->add_option("--generator", synth_generator, "gp-draw, sparse-linear or multimodal");
  synth->add_option("--size", synth_spec.size, "number of candidates");
  synth->add_option("--dim", synth_spec.dimension, "fingerprint dimension");
  synth->add_option("--seed", synth_spec.seed, "random seed");
  synth->add_option("--families", synth_spec.families, "structural families");
  synth->add_option("--weight-density", synth_spec.weight_density, "fraction of features with a linear weight");
  synth->add_option("--motifs", synth_spec.motifs, "planted motifs (multimodal)");
  synth->add_option("--out", synth_out, "output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(qpo::ExitCode::usage);
  }

  try {
    if (*run) {
      const auto m = resolve(run_flags);
      const auto pool = qpo::load_dataset(m.dataset);
      return report(qpo::run_sweep(pool, qpo::policy_arms(m), m.seeds, m.out_dir, m.threads), m.out_dir);
    }
    if (*ablate) {
      const auto m = resolve(ablate_flags);
      const auto pool = qpo::load_dataset(m.dataset);
      const auto result = qpo::run_sweep(pool, qpo::prefilter_ablation_arms(m), m.seeds, m.out_dir, m.threads);
      std::ofstream table(std::filesystem::path(m.out_dir) / "ablation.tsv");
      qpo::write_comparison(table, result.summary, "qpo-greedy", "qpo-ucb");
      qpo::write_comparison(std::cout, result.summary, "qpo-greedy", "qpo-ucb");
      return report(result, m.out_dir);
    }
    if (*toy) {
      const auto r = qpo::run_toycheck(toy_seed, toy_samples, toy_trials, toy_threads);
      qpo::print_toy_report(std::cout, r);
      return r.passed() ? 0 : static_cast<int>(qpo::ExitCode::numeric);
    }
    if (*synth) {
      synth_spec.generator = qpo::parse_generator(synth_generator);
      const auto pool = qpo::synthetic_pool(synth_spec);
      std::ofstream out(synth_out);
      if (!out) throw qpo::DataError("cannot write '" + synth_out + "'");
      qpo::write_pool(out, pool);
      std::cout << "wrote " << pool.size() << " candidates to " << synth_out << '\n';
      return 0;
    }
  } catch (const qpo::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(qpo::ExitCode::data);
  }
  return 0;
}
