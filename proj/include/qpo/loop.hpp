// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "qpo/acquisition.hpp"
#include "qpo/fingerprints.hpp"
#include "qpo/metrics.hpp"
#include "qpo/surrogate.hpp"

namespace qpo {

struct CampaignConfig {
  std::uint64_t seed = 0;
  std::size_t init_batch = 50;
  std::size_t batch_size = 50;
  std::size_t iterations = 10;
  PolicyConfig policy;
  Direction direction = Direction::maximize;
  SurrogateOptions surrogate;
  std::vector<std::size_t> top_k = {10, 50, 100};
  std::vector<double> top_fractions = {0.005, 0.01};
  unsigned threads = 1;

  /// Throws UsageError on non-positive sizes or init_batch + T * b > pool_size.
  void validate(std::size_t pool_size) const;
};

struct Acquisition {
  std::size_t index;
  double value;
  std::size_t iteration;
};

/// Seeds consumed by one iteration, derived from the campaign seed.
struct IterationSeeds {
  std::uint64_t fit = 0;
  std::uint64_t policy = 0;
};

struct IterationRecord {
  std::size_t iteration = 0;
  /// "seed" for the initial random batch, otherwise the policy name.
  std::string policy;
  std::vector<std::size_t> selected;
  std::vector<double> values;
  std::optional<GpHyperparams> hyperparams;
  std::size_t candidates_scored = 0;
  std::map<std::string, double> diagnostics;
  MetricSnapshot metrics;
  IterationSeeds seeds;
  // Wall-clock timings; the only nondeterministic fields, logged separately.
  double fit_seconds = 0.0;
  double acquire_seconds = 0.0;
};

struct CampaignState {
  std::uint64_t seed = 0;
  std::vector<Acquisition> acquired;
  IterationRecord initial;
  /// One record per completed iteration (the initial batch is not counted).
  std::vector<IterationRecord> records;
  bool aborted = false;
  std::string abort_reason;

  std::vector<std::size_t> acquired_indices() const;
  std::vector<double> acquired_values() const;
};

/// Maps requested pool indices to objective values, order-preserving.
using Oracle = std::function<std::vector<double>(std::span<const std::size_t>)>;

/// Stored, noise-free objective values. Throws DataError when the pool has
/// none and UsageError on an out-of-range index.
std::vector<double> lookup_oracle(const CandidatePool& pool, std::span<const std::size_t> indices);

/// Seeds uniformly without replacement, then runs T iterations of
/// fit -> predict -> prefilter -> acquire -> evaluate -> append.
///
/// Deterministic for a given (pool, cfg). When `oracle` is empty the pool's
/// stored values are used. A surrogate failure stops the campaign and returns
/// the state so far with `aborted` set.
CampaignState run_campaign(const CandidatePool& pool, const CampaignConfig& cfg, const Oracle& oracle = {});

/// Cumulative best-so-far regret of a finished campaign (initial batch
/// included as iteration 0). Throws DataError when the pool has no oracle.
double cumulative_regret(const CampaignState& state, const CandidatePool& pool, Direction direction);

/// One JSON object per line: the initial batch, then each iteration. Timing
/// is excluded so identical configurations produce byte-identical logs.
void write_state_log(std::ostream& out, const CampaignState& state, const CandidatePool& pool);

/// Timing records (iteration, fit_seconds, acquire_seconds), one per line.
void write_timing_log(std::ostream& out, const CampaignState& state);

enum class SyntheticGenerator { gp_draw, sparse_linear, multimodal };

std::string_view generator_name(SyntheticGenerator g);
SyntheticGenerator parse_generator(std::string_view name);

struct SyntheticSpec {
  SyntheticGenerator generator = SyntheticGenerator::multimodal;
  std::size_t size = 2000;
  std::uint32_t dimension = 256;
  std::uint64_t seed = 0;
  /// Number of structural families the fingerprints are drawn around.
  std::size_t families = 20;
  /// Fraction of features carrying a nonzero linear weight.
  double weight_density = 0.1;
  /// Planted motifs for the multimodal generator.
  std::size_t motifs = 5;
};

/// Seeded synthetic design space with a known objective:
///  - gp_draw: one draw from the unit-scale Tanimoto GP prior;
///  - sparse_linear: sum of seeded sparse weights times counts;
///  - multimodal: a weak linear trend plus bonuses for carrying planted motifs.
CandidatePool synthetic_pool(const SyntheticSpec& spec);

}  // namespace qpo
