// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "qpo/gaussian.hpp"

namespace qpo {

// All indices in this header are positions within the scored candidate
// subset (0..n-1), not pool indices. Scores and means are in maximization
// sign.

enum class PolicyKind { qpo, qpo_conditional, greedy, ucb, bucb, pts, qei, qpi, tsrsr, random10k };

std::string_view policy_name(PolicyKind kind);
/// Throws UsageError listing the valid names when `name` is unknown.
PolicyKind parse_policy(std::string_view name);
const std::vector<std::string>& policy_names();

/// True for policies that need a joint posterior over the candidate subset.
bool needs_joint_posterior(PolicyKind kind);
/// True for policies that run on the prefiltered subset.
bool uses_prefilter(PolicyKind kind);

enum class PrefilterMetric { greedy, ucb };
std::string_view prefilter_metric_name(PrefilterMetric metric);
PrefilterMetric parse_prefilter_metric(std::string_view name);

struct PolicyConfig {
  PolicyKind policy = PolicyKind::qpo;
  std::int64_t mc_samples = 10000;
  double beta_ucb = 1.0;
  /// Multiplier in the batch UCB convention; the reparameterized utility uses
  /// beta = beta_bucb^2 inside sqrt(beta * pi / 2).
  double beta_bucb = std::numbers::sqrt3;
  std::size_t prefilter_size = 10000;
  PrefilterMetric prefilter_metric = PrefilterMetric::greedy;
  std::uint64_t seed = 0;

  /// Throws UsageError when mc_samples < 1 or prefilter_size < batch_size.
  void validate(std::size_t batch_size) const;
};

struct AcquisitionResult {
  Eigen::VectorXd scores;
  std::vector<std::size_t> batch;
  PolicyKind policy = PolicyKind::qpo;
  std::map<std::string, double> diagnostics;
};

/// Top `prefilter_size` candidates by mean (greedy) or mean + beta_ucb * std
/// (ucb), ties by index. The result is returned in ascending index order so
/// downstream sampling does not depend on the ranking metric; when
/// n <= prefilter_size it is the identity.
std::vector<std::size_t> prefilter(const Eigen::VectorXd& means, const Eigen::VectorXd& stds,
                                   const PolicyConfig& cfg);

/// Monte Carlo probability of optimality: fraction of rows in which each
/// candidate is the row maximum. Exact ties within a row go to the lowest
/// index, so each row contributes exactly one count.
Eigen::VectorXd qpo_scores(const SampleMatrix& samples, unsigned threads = 1);

struct QpoSelection {
  std::vector<std::size_t> batch;
  /// Slots taken by zero-score candidates through the greedy fill rule.
  std::size_t filled_slots = 0;
};

/// Ranks by (score desc, mean desc, index asc) and returns the first b.
/// Zero-score candidates therefore only enter through the greedy fill.
QpoSelection qpo_select(const Eigen::VectorXd& scores, const Eigen::VectorXd& means, std::size_t b);

/// Myopic conditional construction: after each pick, samples whose maximum is
/// already in the batch are discarded and optimality is re-estimated on the
/// survivors. Once no samples survive, remaining slots go to the highest means.
QpoSelection qpo_conditional_batch(const SampleMatrix& samples, std::size_t b, const Eigen::VectorXd& means);

/// Parallel Thompson sampling: slot m takes the best candidate of sample row m
/// that is not yet in the batch. Throws UsageError when fewer than b rows.
std::vector<std::size_t> pts_select(const SampleMatrix& samples, std::size_t b);

std::vector<std::size_t> greedy_select(const Eigen::VectorXd& means, std::size_t b);
std::vector<std::size_t> ucb_select(const Eigen::VectorXd& means, const Eigen::VectorXd& stds, double beta,
                                    std::size_t b);

enum class BatchUtility { expected_improvement, probability_of_improvement, upper_confidence_bound };

struct ScoredBatch {
  std::vector<std::size_t> batch;
  /// MC utility of the batch after each slot was added.
  std::vector<double> slot_scores;
  /// Single-candidate utilities evaluated for the first slot.
  Eigen::VectorXd first_slot;
};

/// Monte Carlo estimate of a batch-level utility for the set `members`.
///   expected_improvement:        E[max(0, max_j y_j - incumbent)]
///   probability_of_improvement:  E[1{max_j y_j > incumbent}]
///   upper_confidence_bound:      E[max_j (mu_j + sqrt(beta pi / 2) |y_j - mu_j|)], beta = beta_bucb^2
double batch_utility(const SampleMatrix& samples, const Eigen::VectorXd& means, std::span<const std::size_t> members,
                     BatchUtility kind, double incumbent, double beta_bucb);

/// Sequential (hallucinating) construction over one shared sample matrix:
/// each slot takes the candidate maximizing the utility of the batch so far
/// plus that candidate. Ties go to the higher mean, then the lower index.
ScoredBatch mc_batch_select(const SampleMatrix& samples, const Eigen::VectorXd& means, std::size_t b,
                            BatchUtility kind, double incumbent, double beta_bucb);

/// As above, drawing cfg.mc_samples joint samples from `post` with cfg.seed.
ScoredBatch mc_batch_policy(const GaussianPosterior& post, std::size_t b, BatchUtility kind, double incumbent,
                            const PolicyConfig& cfg, unsigned threads = 1);

/// Thompson sampling with regret-to-sigma ratio: slot m takes the unselected
/// candidate minimizing (max_j y_j^(m) - mu_i) / sigma_i on sample row m, with
/// sigma floored at 1e-9. Throws UsageError when fewer than b rows.
std::vector<std::size_t> tsrsr_select(const Eigen::VectorXd& means, const Eigen::VectorXd& stds,
                                      const SampleMatrix& samples, std::size_t b);

/// Uniform sample of b entries of `candidates` without replacement, in
/// shuffled order.
std::vector<std::size_t> random10k_select(std::span<const std::size_t> candidates, std::size_t b,
                                          std::uint64_t seed);

/// Everything a policy may consume for one iteration. `posterior` may be
/// null for policies that only need marginals.
struct AcquisitionInput {
  const GaussianPosterior* posterior = nullptr;
  Eigen::VectorXd means;
  Eigen::VectorXd stds;
  double incumbent = -std::numeric_limits<double>::infinity();
};

/// Number of joint sample rows `kind` consumes (0 when it needs none).
std::int64_t samples_required(const PolicyConfig& cfg, std::size_t b);

/// Runs cfg.policy and returns its scores, batch and diagnostics.
AcquisitionResult acquire(const PolicyConfig& cfg, const AcquisitionInput& input, std::size_t b,
                          unsigned threads = 1);

}  // namespace qpo
