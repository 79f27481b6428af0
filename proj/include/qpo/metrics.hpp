// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <string_view>
#include <vector>

#include "qpo/fingerprints.hpp"

namespace qpo {

enum class Direction { maximize, minimize };

std::string_view direction_name(Direction d);
/// Accepts "max"/"maximize" and "min"/"minimize".
Direction parse_direction(std::string_view name);
inline int direction_sign(Direction d) { return d == Direction::maximize ? 1 : -1; }

/// Mean of the k best values under `direction`. Throws UsageError when fewer
/// than k values (or k == 0).
double top_k_average(std::span<const double> values, std::size_t k, Direction direction);

/// ceil(p * n), guarded against representation error in p.
std::size_t top_count(std::size_t n, double p);

/// Pool indices of the true best ceil(p * N) candidates, ties by index.
std::vector<std::size_t> true_top_set(const CandidatePool& pool, double p, Direction direction);

/// Fraction of the true top ceil(p * N) contained in `acquired`.
double fraction_top(std::span<const std::size_t> acquired, const CandidatePool& pool, double p,
                    Direction direction);

/// Sum over iterations of the gap between the optimum and the best value
/// acquired so far. `best_so_far[t]` is the best raw value after iteration t.
double cumulative_regret(std::span<const double> best_so_far, double optimum, Direction direction);

struct SimilarityEdge {
  std::size_t a;
  std::size_t b;
  double similarity;
};

struct DiversityStats {
  static constexpr std::size_t kBins = 20;
  /// Counts over [k/20, (k+1)/20); the last bin is closed at 1.
  std::array<std::size_t, kBins> histogram{};
  /// Pool-index pairs with similarity strictly above the threshold.
  std::vector<SimilarityEdge> edges;
};

/// Pairwise Tanimoto statistics of one batch. Throws UsageError when the
/// batch has fewer than two members.
DiversityStats diversity_stats(const CandidatePool& pool, std::span<const std::size_t> batch, double threshold = 0.4,
                               TanimotoForm form = TanimotoForm::min_max);

/// Per-iteration metrics.
struct MetricSnapshot {
  std::map<std::size_t, double> top_k_avg;
  std::map<double, double> fraction_top;
  double best_value = 0.0;
  /// Present only when the pool's full oracle is known.
  bool has_regret = false;
  double simple_regret = 0.0;
  double cumulative_regret = 0.0;
};

/// Snapshot after some acquisitions. `previous_cumulative` is the cumulative
/// regret before this iteration; k values larger than the acquired count are
/// skipped, and retrieval/regret need the pool's oracle.
MetricSnapshot snapshot(const CandidatePool& pool, std::span<const std::size_t> acquired,
                        std::span<const double> values, Direction direction, std::span<const std::size_t> ks,
                        std::span<const double> fractions, double previous_cumulative);

struct MeanSem {
  double mean = 0.0;
  double sem = 0.0;
  std::size_t count = 0;
};

/// Mean and standard error (sample standard deviation / sqrt(n)); sem is 0
/// for a single value.
MeanSem mean_sem(std::span<const double> values);

}  // namespace qpo
