// SPDX-License-Identifier: Apache-2.0
#include "qpo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "qpo/errors.hpp"

namespace qpo {

std::string_view direction_name(Direction d) { return d == Direction::maximize ? "max" : "min"; }

Direction parse_direction(std::string_view name) {
  if (name == "max" || name == "maximize") return Direction::maximize;
  if (name == "min" || name == "minimize") return Direction::minimize;
  throw UsageError("unknown objective direction '" + std::string(name) + "'; expected max or min");
}

double top_k_average(std::span<const double> values, std::size_t k, Direction direction) {
  if (k == 0 || k > values.size())
    throw UsageError("top_k_average: k = " + std::to_string(k) + " but " + std::to_string(values.size()) +
                     " values acquired");
  std::vector<double> sorted(values.begin(), values.end());
  if (direction == Direction::maximize)
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1), sorted.end(), std::greater<>());
  else
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1), sorted.end());
  // nth_element leaves the k best in the first k slots, unordered.
  std::sort(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k));
  return std::accumulate(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), 0.0) /
         static_cast<double>(k);
}

std::size_t top_count(std::size_t n, double p) {
  if (!(p > 0.0) || p > 1.0) throw UsageError("top fraction must lie in (0, 1]");
  const double raw = p * static_cast<double>(n);
  return static_cast<std::size_t>(std::ceil(raw - 1e-9 * std::max(1.0, raw)));
}

std::vector<std::size_t> true_top_set(const CandidatePool& pool, double p, Direction direction) {
  const auto& f = pool.oracle_values();
  const auto count = top_count(f.size(), p);
  std::vector<std::size_t> order(f.size());
  std::iota(order.begin(), order.end(), 0);
  const int sign = direction_sign(direction);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      const double fa = sign * f[a];
                      const double fb = sign * f[b];
                      return fa != fb ? fa > fb : a < b;
                    });
  order.resize(count);
  return order;
}

double fraction_top(std::span<const std::size_t> acquired, const CandidatePool& pool, double p,
                    Direction direction) {
  const auto top = true_top_set(pool, p, direction);
  if (top.empty()) return 0.0;
  const std::unordered_set<std::size_t> have(acquired.begin(), acquired.end());
  const auto hits = std::count_if(top.begin(), top.end(), [&](std::size_t i) { return have.count(i) > 0; });
  return static_cast<double>(hits) / static_cast<double>(top.size());
}

double cumulative_regret(std::span<const double> best_so_far, double optimum, Direction direction) {
  const int sign = direction_sign(direction);
  double total = 0.0;
  for (double best : best_so_far) total += std::max(0.0, sign * (optimum - best));
  return total;
}

DiversityStats diversity_stats(const CandidatePool& pool, std::span<const std::size_t> batch, double threshold,
                               TanimotoForm form) {
  if (batch.size() < 2) throw UsageError("diversity_stats: batch needs at least two members");
  DiversityStats out;
  for (std::size_t x = 0; x < batch.size(); ++x) {
    for (std::size_t y = x + 1; y < batch.size(); ++y) {
      const double s = tanimoto(pool.fingerprint(batch[x]), pool.fingerprint(batch[y]), form);
      const auto bin = std::min(DiversityStats::kBins - 1,
                                static_cast<std::size_t>(s * static_cast<double>(DiversityStats::kBins)));
      ++out.histogram[bin];
      if (s > threshold) out.edges.push_back({batch[x], batch[y], s});
    }
  }
  return out;
}

MetricSnapshot snapshot(const CandidatePool& pool, std::span<const std::size_t> acquired,
                        std::span<const double> values, Direction direction, std::span<const std::size_t> ks,
                        std::span<const double> fractions, double previous_cumulative) {
  MetricSnapshot s;
  if (values.empty()) return s;
  for (auto k : ks)
    if (k >= 1 && k <= values.size()) s.top_k_avg[k] = top_k_average(values, k, direction);
  s.best_value = direction == Direction::maximize ? *std::max_element(values.begin(), values.end())
                                                  : *std::min_element(values.begin(), values.end());
  if (pool.has_oracle()) {
    for (double p : fractions) s.fraction_top[p] = fraction_top(acquired, pool, p, direction);
    const auto& f = pool.oracle_values();
    const double optimum = direction == Direction::maximize ? *std::max_element(f.begin(), f.end())
                                                            : *std::min_element(f.begin(), f.end());
    s.has_regret = true;
    s.simple_regret = std::max(0.0, direction_sign(direction) * (optimum - s.best_value));
    s.cumulative_regret = previous_cumulative + s.simple_regret;
  }
  return s;
}

MeanSem mean_sem(std::span<const double> values) {
  MeanSem out;
  out.count = values.size();
  if (values.empty()) return out;
  const double n = static_cast<double>(values.size());
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.sem = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return out;
}

}  // namespace qpo
