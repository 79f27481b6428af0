// SPDX-License-Identifier: Apache-2.0
#include "qpo/sweep.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "qpo/acquisition.hpp"
#include "qpo/errors.hpp"
#include "qpo/parallel.hpp"

namespace qpo {

namespace fs = std::filesystem;

std::map<std::string, double> flatten_metrics(const MetricSnapshot& m) {
  std::map<std::string, double> out;
  for (const auto& [k, v] : m.top_k_avg) out["top_k_avg:" + std::to_string(k)] = v;
  for (const auto& [p, v] : m.fraction_top) out["fraction_top:" + nlohmann::json(p).dump()] = v;
  out["best_value"] = m.best_value;
  if (m.has_regret) {
    out["simple_regret"] = m.simple_regret;
    out["cumulative_regret"] = m.cumulative_regret;
  }
  return out;
}

SummaryTable summarize(const std::vector<CampaignRun>& runs) {
  std::map<std::string, std::map<std::size_t, std::map<std::string, std::vector<double>>>> values;
  for (const auto& run : runs) {
    if (run.failed) continue;
    auto absorb = [&](const IterationRecord& rec) {
      for (const auto& [name, v] : flatten_metrics(rec.metrics)) values[run.label][rec.iteration][name].push_back(v);
    };
    absorb(run.state.initial);
    for (const auto& rec : run.state.records) absorb(rec);
  }
  SummaryTable table;
  for (const auto& [label, iters] : values)
    for (const auto& [it, metrics] : iters)
      for (const auto& [name, vs] : metrics) table[label][it][name] = mean_sem(vs);
  return table;
}

void write_summary(std::ostream& out, const SummaryTable& table) {
  out << "label\titeration\tmetric\tmean\tsem\tn\n";
  out << std::setprecision(10);
  for (const auto& [label, iters] : table)
    for (const auto& [it, metrics] : iters)
      for (const auto& [name, ms] : metrics)
        out << label << '\t' << it << '\t' << name << '\t' << ms.mean << '\t' << ms.sem << '\t' << ms.count << '\n';
}

void write_comparison(std::ostream& out, const SummaryTable& table, const std::string& a, const std::string& b) {
  out << "metric\titeration\t" << a << "_mean\t" << a << "_sem\t" << b << "_mean\t" << b << "_sem\n";
  out << std::setprecision(10);
  const auto ia = table.find(a);
  const auto ib = table.find(b);
  if (ia == table.end() || ib == table.end()) return;
  std::map<std::string, std::map<std::size_t, std::pair<MeanSem, MeanSem>>> rows;
  for (const auto& [it, metrics] : ia->second)
    for (const auto& [name, ms] : metrics) rows[name][it].first = ms;
  for (const auto& [it, metrics] : ib->second)
    for (const auto& [name, ms] : metrics) rows[name][it].second = ms;
  for (const auto& [name, iters] : rows)
    for (const auto& [it, pair] : iters)
      out << name << '\t' << it << '\t' << pair.first.mean << '\t' << pair.first.sem << '\t' << pair.second.mean
          << '\t' << pair.second.sem << '\n';
}

SweepResult run_sweep(const CandidatePool& pool, const std::vector<SweepArm>& arms,
                      const std::vector<std::uint64_t>& seeds, const std::string& out_dir, unsigned threads) {
  if (seeds.empty()) throw UsageError("sweep: seed list is empty");
  SweepResult result;
  result.runs.resize(arms.size() * seeds.size());
  const bool write = !out_dir.empty();
  if (write) fs::create_directories(fs::path(out_dir) / "logs");

  // Spread whole campaigns over workers; each campaign stays single-threaded
  // unless there is only one campaign.
  const unsigned inner = result.runs.size() == 1 ? threads : 1;
  parallel_for(result.runs.size(), threads, [&](std::size_t k) {
    const auto& arm = arms[k / seeds.size()];
    auto& run = result.runs[k];
    run.label = arm.label;
    run.seed = seeds[k % seeds.size()];
    CampaignConfig cfg = arm.config;
    cfg.seed = run.seed;
    cfg.threads = inner;
    try {
      run.state = run_campaign(pool, cfg);
      if (run.state.aborted) {
        run.failed = true;
        run.exit_code = static_cast<int>(ExitCode::numeric);
        run.error = run.state.abort_reason;
      }
    } catch (const Error& e) {
      run.failed = true;
      run.exit_code = static_cast<int>(e.code());
      run.error = e.what();
    } catch (const std::exception& e) {
      run.failed = true;
      run.exit_code = static_cast<int>(ExitCode::numeric);
      run.error = e.what();
    }
    if (write && !run.error.empty() && run.state.initial.selected.empty()) return;
    if (write) {
      std::ofstream log(fs::path(out_dir) / "logs" / (run.label + "_seed" + std::to_string(run.seed) + ".jsonl"));
      write_state_log(log, run.state, pool);
    }
  });

  for (const auto& run : result.runs)
    if (run.failed) result.exit_code = std::max(result.exit_code, run.exit_code);
  result.summary = summarize(result.runs);

  if (write) {
    std::ofstream summary(fs::path(out_dir) / "summary.tsv");
    write_summary(summary, result.summary);
    std::ofstream timing(fs::path(out_dir) / "timing.tsv");
    timing << "label\tseed\titeration\tfit_seconds\tacquire_seconds\n";
    for (const auto& run : result.runs) {
      for (const auto& rec : run.state.records)
        timing << run.label << '\t' << run.seed << '\t' << rec.iteration << '\t' << rec.fit_seconds << '\t'
               << rec.acquire_seconds << '\n';
    }
    if (result.exit_code != 0) {
      std::ofstream failures(fs::path(out_dir) / "failures.tsv");
      failures << "label\tseed\texit_code\terror\n";
      for (const auto& run : result.runs)
        if (run.failed) failures << run.label << '\t' << run.seed << '\t' << run.exit_code << '\t' << run.error << '\n';
    }
  }
  return result;
}

std::vector<SweepArm> policy_arms(const RunManifest& manifest) {
  std::vector<SweepArm> arms;
  for (auto kind : manifest.policies) {
    SweepArm arm{std::string(policy_name(kind)), manifest.campaign};
    arm.config.policy.policy = kind;
    arms.push_back(std::move(arm));
  }
  return arms;
}

std::vector<SweepArm> prefilter_ablation_arms(const RunManifest& manifest) {
  std::vector<SweepArm> arms;
  for (auto metric : {PrefilterMetric::greedy, PrefilterMetric::ucb}) {
    SweepArm arm{"qpo-" + std::string(prefilter_metric_name(metric)), manifest.campaign};
    arm.config.policy.policy = PolicyKind::qpo;
    arm.config.policy.prefilter_metric = metric;
    arms.push_back(std::move(arm));
  }
  return arms;
}

GaussianPosterior toy_posterior() {
  Eigen::Vector3d mean(10.0, 5.0, 0.0);
  Eigen::Matrix3d cov;
  cov << 101.0, 100.0, 0.0,  //
      100.0, 101.0, 0.0,     //
      0.0, 0.0, 1.0;
  return GaussianPosterior(mean, cov);
}

ToyReport run_toycheck(std::uint64_t seed, std::int64_t samples, std::size_t pts_trials, unsigned threads) {
  const auto post = toy_posterior();
  ToyReport report;
  const auto draws = sample_joint(post, samples, seed, threads);
  report.scores = qpo_scores(draws, threads);
  report.qpo_batch = qpo_select(report.scores, post.mean(), 2).batch;
  report.greedy_batch = greedy_select(post.mean(), 2);

  // Independent two-sample draws: streams beyond the scoring block.
  const auto base = static_cast<std::uint64_t>(samples);
  for (std::size_t t = 0; t < pts_trials; ++t) {
    const auto pair_draw = sample_joint(post, 2, seed, 1, base + 2 * t);
    auto pick = pts_select(pair_draw, 2);
    std::sort(pick.begin(), pick.end());
    if (pick == std::vector<std::size_t>{0, 1}) ++report.pts_pair_12;
    else if (pick == std::vector<std::size_t>{0, 2}) ++report.pts_pair_13;
    else ++report.pts_pair_23;
  }
  report.pts_trials = pts_trials;

  const Eigen::Vector3d expected(0.84, 0.0, 0.16);
  report.scores_ok = ((report.scores - expected).cwiseAbs().array() <= 0.005).all();
  auto as_set = [](std::vector<std::size_t> v) {
    std::sort(v.begin(), v.end());
    return v;
  };
  report.qpo_ok = as_set(report.qpo_batch) == std::vector<std::size_t>{0, 2};
  report.greedy_ok = as_set(report.greedy_batch) == std::vector<std::size_t>{0, 1};
  report.pts_ok = report.pts_pair_12 > report.pts_pair_13;
  return report;
}

void print_toy_report(std::ostream& out, const ToyReport& r) {
  auto name = [](std::size_t i) { return "x" + std::to_string(i + 1); };
  auto pass = [](bool ok) { return ok ? "PASS" : "FAIL"; };
  out << std::fixed << std::setprecision(4);
  out << "qPO scores: " << name(0) << "=" << r.scores(0) << " " << name(1) << "=" << r.scores(1) << " " << name(2)
      << "=" << r.scores(2) << "  (expected 0.84 / 0.00 / 0.16 +- 0.005) " << pass(r.scores_ok) << '\n';
  out << "qPO b=2 batch: {" << name(r.qpo_batch[0]) << ", " << name(r.qpo_batch[1]) << "}  (expected {x1, x3}) "
      << pass(r.qpo_ok) << '\n';
  out << "greedy b=2 batch: {" << name(r.greedy_batch[0]) << ", " << name(r.greedy_batch[1])
      << "}  (expected {x1, x2}) " << pass(r.greedy_ok) << '\n';
  out << "pTS b=2 pairs over " << r.pts_trials << " trials: {x1,x2}=" << r.pts_pair_12 << " {x1,x3}=" << r.pts_pair_13
      << " {x2,x3}=" << r.pts_pair_23 << "  (expected {x1,x2} > {x1,x3}) " << pass(r.pts_ok) << '\n';
  out << (r.passed() ? "toycheck: PASS" : "toycheck: FAIL") << '\n';
  out.unsetf(std::ios::floatfield);
}

}  // namespace qpo
