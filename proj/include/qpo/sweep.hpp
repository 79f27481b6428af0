// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "qpo/loop.hpp"
#include "qpo/manifest.hpp"
#include "qpo/metrics.hpp"

namespace qpo {

/// One campaign of a sweep, keyed by a label (usually the policy name).
struct CampaignRun {
  std::string label;
  std::uint64_t seed = 0;
  CampaignState state;
  bool failed = false;
  int exit_code = 0;
  std::string error;
};

/// Mean and SEM across seeds of every metric, per label and iteration.
/// Keys: label -> iteration -> metric name.
using SummaryTable = std::map<std::string, std::map<std::size_t, std::map<std::string, MeanSem>>>;

/// Flattens a record's metrics to "top_k_avg:10", "fraction_top:0.01",
/// "best_value", "simple_regret", "cumulative_regret".
std::map<std::string, double> flatten_metrics(const MetricSnapshot& m);

SummaryTable summarize(const std::vector<CampaignRun>& runs);
void write_summary(std::ostream& out, const SummaryTable& table);

/// A (label, campaign config) pair to run for every seed.
struct SweepArm {
  std::string label;
  CampaignConfig config;
};

struct SweepResult {
  std::vector<CampaignRun> runs;
  SummaryTable summary;
  /// Highest exit code among failed campaigns, 0 when all succeeded.
  int exit_code = 0;
};

/// Runs every (arm, seed) pair, spreading pairs over `threads` workers, and
/// writes out_dir/logs/<label>_seed<k>.jsonl, out_dir/summary.tsv and
/// out_dir/timing.tsv (plus out_dir/failures.tsv when a campaign failed). An
/// empty out_dir skips file output. Failures are recorded and the sweep
/// continues.
SweepResult run_sweep(const CandidatePool& pool, const std::vector<SweepArm>& arms,
                      const std::vector<std::uint64_t>& seeds, const std::string& out_dir, unsigned threads);

/// One arm per manifest policy.
std::vector<SweepArm> policy_arms(const RunManifest& manifest);

/// qPO with the greedy and UCB prefilters.
std::vector<SweepArm> prefilter_ablation_arms(const RunManifest& manifest);

/// Paired comparison of two labels: metric, iteration, mean/SEM of each.
void write_comparison(std::ostream& out, const SummaryTable& table, const std::string& a, const std::string& b);

/// Three-candidate toy posterior check.
struct ToyReport {
  Eigen::VectorXd scores;
  std::vector<std::size_t> qpo_batch;
  std::vector<std::size_t> greedy_batch;
  std::size_t pts_pair_12 = 0;
  std::size_t pts_pair_13 = 0;
  std::size_t pts_pair_23 = 0;
  std::size_t pts_trials = 0;
  bool scores_ok = false;
  bool qpo_ok = false;
  bool greedy_ok = false;
  bool pts_ok = false;
  bool passed() const { return scores_ok && qpo_ok && greedy_ok && pts_ok; }
};

/// The posterior N((10, 5, 0), [[101, 100, 0], [100, 101, 0], [0, 0, 1]]).
GaussianPosterior toy_posterior();

/// Scores at `samples` draws must fall within 0.005 of (0.84, 0, 0.16); the
/// qPO pair must be {x1, x3}, the greedy pair {x1, x2}; over `pts_trials`
/// independent two-sample draws, pTS must pick {x1, x2} more often than {x1, x3}.
ToyReport run_toycheck(std::uint64_t seed, std::int64_t samples = 1000000, std::size_t pts_trials = 100000,
                       unsigned threads = 1);
void print_toy_report(std::ostream& out, const ToyReport& report);

}  // namespace qpo
