// SPDX-License-Identifier: Apache-2.0
#include "qpo/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>

#include "qpo/errors.hpp"
#include "qpo/parallel.hpp"
#include "qpo/rng.hpp"

namespace qpo {

namespace {

constexpr std::pair<PolicyKind, std::string_view> kPolicyNames[] = {
    {PolicyKind::qpo, "qpo"},       {PolicyKind::qpo_conditional, "qpo-conditional"},
    {PolicyKind::greedy, "greedy"}, {PolicyKind::ucb, "ucb"},
    {PolicyKind::bucb, "bucb"},     {PolicyKind::pts, "pts"},
    {PolicyKind::qei, "qei"},       {PolicyKind::qpi, "qpi"},
    {PolicyKind::tsrsr, "tsrsr"},   {PolicyKind::random10k, "random10k"},
};

void check_batch(std::size_t b, std::size_t n) {
  if (b > n)
    throw UsageError("batch size " + std::to_string(b) + " exceeds candidate count " + std::to_string(n));
}

// Indices sorted by (key desc, mean desc, index asc).
std::vector<std::size_t> rank_by(const Eigen::VectorXd& key, const Eigen::VectorXd& means) {
  std::vector<std::size_t> order(static_cast<std::size_t>(key.size()));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ia = static_cast<Eigen::Index>(a);
    const auto ib = static_cast<Eigen::Index>(b);
    if (key(ia) != key(ib)) return key(ia) > key(ib);
    if (means(ia) != means(ib)) return means(ia) > means(ib);
    return a < b;
  });
  return order;
}

// Row argmax, lowest index on ties, skipping masked columns. Returns -1 when
// every column is masked.
template <typename Row>
Eigen::Index row_argmax(const Row& row, const std::vector<char>* masked = nullptr) {
  Eigen::Index best = -1;
  double best_value = 0.0;
  for (Eigen::Index j = 0; j < row.size(); ++j) {
    if (masked && (*masked)[static_cast<std::size_t>(j)]) continue;
    if (best < 0 || row(j) > best_value) {
      best = j;
      best_value = row(j);
    }
  }
  return best;
}

}  // namespace

std::string_view policy_name(PolicyKind kind) {
  for (const auto& [k, name] : kPolicyNames)
    if (k == kind) return name;
  return "unknown";
}

const std::vector<std::string>& policy_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& entry : kPolicyNames) out.emplace_back(entry.second);
    return out;
  }();
  return names;
}

PolicyKind parse_policy(std::string_view name) {
  for (const auto& [k, n] : kPolicyNames)
    if (n == name) return k;
  std::string valid;
  for (const auto& n : policy_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw UsageError("unknown policy '" + std::string(name) + "'; valid policies: " + valid);
}

bool needs_joint_posterior(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::greedy:
    case PolicyKind::ucb:
    case PolicyKind::random10k:
      return false;
    default:
      return true;
  }
}

bool uses_prefilter(PolicyKind kind) {
  return kind != PolicyKind::greedy && kind != PolicyKind::ucb;
}

std::string_view prefilter_metric_name(PrefilterMetric metric) {
  return metric == PrefilterMetric::greedy ? "greedy" : "ucb";
}

PrefilterMetric parse_prefilter_metric(std::string_view name) {
  if (name == "greedy") return PrefilterMetric::greedy;
  if (name == "ucb") return PrefilterMetric::ucb;
  throw UsageError("unknown prefilter metric '" + std::string(name) + "'; valid metrics: greedy, ucb");
}

void PolicyConfig::validate(std::size_t batch_size) const {
  if (mc_samples < 1) throw UsageError("policy: mc_samples must be >= 1");
  if (prefilter_size < batch_size) throw UsageError("policy: prefilter_size must be >= batch size");
  if (!std::isfinite(beta_ucb) || !std::isfinite(beta_bucb)) throw UsageError("policy: beta must be finite");
}

std::vector<std::size_t> prefilter(const Eigen::VectorXd& means, const Eigen::VectorXd& stds,
                                   const PolicyConfig& cfg) {
  if (means.size() != stds.size()) throw UsageError("prefilter: means and stds differ in length");
  const auto n = static_cast<std::size_t>(means.size());
  std::vector<std::size_t> keep(n);
  std::iota(keep.begin(), keep.end(), 0);
  if (n <= cfg.prefilter_size) return keep;

  Eigen::VectorXd key = means;
  if (cfg.prefilter_metric == PrefilterMetric::ucb) key += cfg.beta_ucb * stds;
  std::vector<std::size_t> order = keep;
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cfg.prefilter_size), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      const auto ka = key(static_cast<Eigen::Index>(a));
                      const auto kb = key(static_cast<Eigen::Index>(b));
                      return ka != kb ? ka > kb : a < b;
                    });
  order.resize(cfg.prefilter_size);
  std::sort(order.begin(), order.end());
  return order;
}

Eigen::VectorXd qpo_scores(const SampleMatrix& samples, unsigned threads) {
  const auto& y = samples.values();
  const auto m = y.rows();
  const auto n = y.cols();
  constexpr Eigen::Index kChunk = 4096;
  const auto chunks = static_cast<std::size_t>((m + kChunk - 1) / kChunk);
  std::vector<std::vector<std::int64_t>> partial(chunks, std::vector<std::int64_t>(static_cast<std::size_t>(n), 0));
  parallel_for(chunks, threads, [&](std::size_t c) {
    const Eigen::Index begin = static_cast<Eigen::Index>(c) * kChunk;
    const Eigen::Index end = std::min(m, begin + kChunk);
    for (Eigen::Index r = begin; r < end; ++r) ++partial[c][static_cast<std::size_t>(row_argmax(y.row(r)))];
  });
  Eigen::VectorXd scores = Eigen::VectorXd::Zero(n);
  for (const auto& counts : partial)
    for (Eigen::Index j = 0; j < n; ++j) scores(j) += static_cast<double>(counts[static_cast<std::size_t>(j)]);
  return scores / static_cast<double>(m);
}

QpoSelection qpo_select(const Eigen::VectorXd& scores, const Eigen::VectorXd& means, std::size_t b) {
  if (scores.size() != means.size()) throw UsageError("qpo_select: scores and means differ in length");
  check_batch(b, static_cast<std::size_t>(scores.size()));
  auto order = rank_by(scores, means);
  order.resize(b);
  QpoSelection out{std::move(order), 0};
  for (auto i : out.batch)
    if (scores(static_cast<Eigen::Index>(i)) <= 0.0) ++out.filled_slots;
  return out;
}

QpoSelection qpo_conditional_batch(const SampleMatrix& samples, std::size_t b, const Eigen::VectorXd& means) {
  const auto& y = samples.values();
  const auto n = y.cols();
  if (means.size() != n) throw UsageError("qpo_conditional_batch: means length differs from candidate count");
  check_batch(b, static_cast<std::size_t>(n));

  std::vector<Eigen::Index> winner(static_cast<std::size_t>(y.rows()));
  for (Eigen::Index r = 0; r < y.rows(); ++r) winner[static_cast<std::size_t>(r)] = row_argmax(y.row(r));
  std::vector<char> alive(winner.size(), 1);
  std::vector<char> chosen(static_cast<std::size_t>(n), 0);

  QpoSelection out;
  std::size_t survivors = winner.size();
  while (out.batch.size() < b && survivors > 0) {
    // Survivors' maxima are never in the batch, so their argmax over the
    // remaining candidates is the unconditional one.
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(n);
    for (std::size_t r = 0; r < winner.size(); ++r)
      if (alive[r]) counts(winner[r]) += 1.0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (chosen[static_cast<std::size_t>(j)]) counts(j) = -1.0;
    const auto pick = rank_by(counts, means).front();
    chosen[pick] = 1;
    out.batch.push_back(pick);
    for (std::size_t r = 0; r < winner.size(); ++r) {
      if (alive[r] && static_cast<std::size_t>(winner[r]) == pick) {
        alive[r] = 0;
        --survivors;
      }
    }
  }
  if (out.batch.size() < b) {
    for (auto i : rank_by(means, means)) {
      if (out.batch.size() == b) break;
      if (chosen[i]) continue;
      chosen[i] = 1;
      out.batch.push_back(i);
      ++out.filled_slots;
    }
  }
  return out;
}

std::vector<std::size_t> pts_select(const SampleMatrix& samples, std::size_t b) {
  const auto& y = samples.values();
  check_batch(b, static_cast<std::size_t>(y.cols()));
  if (static_cast<std::size_t>(y.rows()) < b) throw UsageError("pts_select: fewer sample rows than batch slots");
  std::vector<char> chosen(static_cast<std::size_t>(y.cols()), 0);
  std::vector<std::size_t> batch;
  batch.reserve(b);
  for (std::size_t m = 0; m < b; ++m) {
    const auto pick = static_cast<std::size_t>(row_argmax(y.row(static_cast<Eigen::Index>(m)), &chosen));
    chosen[pick] = 1;
    batch.push_back(pick);
  }
  return batch;
}

std::vector<std::size_t> greedy_select(const Eigen::VectorXd& means, std::size_t b) {
  check_batch(b, static_cast<std::size_t>(means.size()));
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(means.size());
  auto order = rank_by(means, zero);
  order.resize(b);
  return order;
}

std::vector<std::size_t> ucb_select(const Eigen::VectorXd& means, const Eigen::VectorXd& stds, double beta,
                                    std::size_t b) {
  if (means.size() != stds.size()) throw UsageError("ucb_select: means and stds differ in length");
  return greedy_select(means + beta * stds, b);
}

namespace {

// Per-row contribution of the batch utility given the row's current batch
// maximum (of y, or of the UCB-transformed values).
double row_utility(BatchUtility kind, double row_max, double incumbent) {
  switch (kind) {
    case BatchUtility::expected_improvement:
      return std::max(0.0, row_max - incumbent);
    case BatchUtility::probability_of_improvement:
      return row_max > incumbent ? 1.0 : 0.0;
    case BatchUtility::upper_confidence_bound:
      return row_max;
  }
  return 0.0;
}

// Values whose per-row maximum the utility consumes.
RowMatrix utility_values(const SampleMatrix& samples, const Eigen::VectorXd& means, BatchUtility kind,
                         double beta_bucb) {
  if (kind != BatchUtility::upper_confidence_bound) return samples.values();
  const double scale = std::sqrt(beta_bucb * beta_bucb * std::numbers::pi / 2.0);
  RowMatrix z = samples.values();
  z.rowwise() -= means.transpose();
  z = z.cwiseAbs() * scale;
  z.rowwise() += means.transpose();
  return z;
}

}  // namespace

double batch_utility(const SampleMatrix& samples, const Eigen::VectorXd& means, std::span<const std::size_t> members,
                     BatchUtility kind, double incumbent, double beta_bucb) {
  if (members.empty()) throw UsageError("batch_utility: empty batch");
  const RowMatrix z = utility_values(samples, means, kind, beta_bucb);
  double total = 0.0;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    double best = -std::numeric_limits<double>::infinity();
    for (auto j : members) best = std::max(best, z(r, static_cast<Eigen::Index>(j)));
    total += row_utility(kind, best, incumbent);
  }
  return total / static_cast<double>(z.rows());
}

ScoredBatch mc_batch_select(const SampleMatrix& samples, const Eigen::VectorXd& means, std::size_t b,
                            BatchUtility kind, double incumbent, double beta_bucb) {
  const auto n = samples.candidates();
  if (means.size() != n) throw UsageError("mc_batch_select: means length differs from candidate count");
  check_batch(b, static_cast<std::size_t>(n));
  const RowMatrix z = utility_values(samples, means, kind, beta_bucb);
  const auto m = z.rows();

  Eigen::VectorXd running = Eigen::VectorXd::Constant(m, -std::numeric_limits<double>::infinity());
  std::vector<char> chosen(static_cast<std::size_t>(n), 0);
  ScoredBatch out;
  Eigen::VectorXd score(n);
  for (std::size_t slot = 0; slot < b; ++slot) {
    score.setConstant(-std::numeric_limits<double>::infinity());
    for (Eigen::Index j = 0; j < n; ++j) {
      if (chosen[static_cast<std::size_t>(j)]) continue;
      double total = 0.0;
      for (Eigen::Index r = 0; r < m; ++r) total += row_utility(kind, std::max(running(r), z(r, j)), incumbent);
      score(j) = total / static_cast<double>(m);
    }
    if (slot == 0) out.first_slot = score;
    const auto pick = rank_by(score, means).front();
    chosen[pick] = 1;
    out.batch.push_back(pick);
    out.slot_scores.push_back(score(static_cast<Eigen::Index>(pick)));
    running = running.cwiseMax(z.col(static_cast<Eigen::Index>(pick)));
  }
  return out;
}

ScoredBatch mc_batch_policy(const GaussianPosterior& post, std::size_t b, BatchUtility kind, double incumbent,
                            const PolicyConfig& cfg, unsigned threads) {
  const auto samples = sample_joint(post, cfg.mc_samples, cfg.seed, threads);
  return mc_batch_select(samples, post.mean(), b, kind, incumbent, cfg.beta_bucb);
}

std::vector<std::size_t> tsrsr_select(const Eigen::VectorXd& means, const Eigen::VectorXd& stds,
                                      const SampleMatrix& samples, std::size_t b) {
  const auto& y = samples.values();
  const auto n = y.cols();
  if (means.size() != n || stds.size() != n) throw UsageError("tsrsr_select: moment vectors differ in length");
  check_batch(b, static_cast<std::size_t>(n));
  if (static_cast<std::size_t>(y.rows()) < b) throw UsageError("tsrsr_select: fewer sample rows than batch slots");
  const Eigen::VectorXd sigma = stds.cwiseMax(1e-9);
  std::vector<char> chosen(static_cast<std::size_t>(n), 0);
  std::vector<std::size_t> batch;
  for (std::size_t m = 0; m < b; ++m) {
    const double reference = y.row(static_cast<Eigen::Index>(m)).maxCoeff();
    Eigen::Index best = -1;
    double best_ratio = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (chosen[static_cast<std::size_t>(j)]) continue;
      const double ratio = (reference - means(j)) / sigma(j);
      if (best < 0 || ratio < best_ratio) {
        best = j;
        best_ratio = ratio;
      }
    }
    chosen[static_cast<std::size_t>(best)] = 1;
    batch.push_back(static_cast<std::size_t>(best));
  }
  return batch;
}

std::vector<std::size_t> random10k_select(std::span<const std::size_t> candidates, std::size_t b,
                                          std::uint64_t seed) {
  check_batch(b, candidates.size());
  std::vector<std::size_t> pool(candidates.begin(), candidates.end());
  StreamRng rng(seed, 0);
  // Partial Fisher-Yates.
  for (std::size_t k = 0; k < b; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
    std::swap(pool[k], pool[pick(rng)]);
  }
  pool.resize(b);
  return pool;
}

std::int64_t samples_required(const PolicyConfig& cfg, std::size_t b) {
  switch (cfg.policy) {
    case PolicyKind::greedy:
    case PolicyKind::ucb:
    case PolicyKind::random10k:
      return 0;
    case PolicyKind::pts:
    case PolicyKind::tsrsr:
      // Counter-keyed streams make these the first b rows of the full draw.
      return static_cast<std::int64_t>(b);
    default:
      return cfg.mc_samples;
  }
}

AcquisitionResult acquire(const PolicyConfig& cfg, const AcquisitionInput& input, std::size_t b, unsigned threads) {
  const auto n = input.means.size();
  if (input.stds.size() != n) throw UsageError("acquire: means and stds differ in length");
  check_batch(b, static_cast<std::size_t>(n));
  AcquisitionResult out;
  out.policy = cfg.policy;

  std::optional<SampleMatrix> samples;
  if (const auto rows = samples_required(cfg, b); rows > 0) {
    if (!input.posterior) throw UsageError("acquire: policy requires a joint posterior");
    if (input.posterior->size() != n) throw UsageError("acquire: posterior size differs from candidate count");
    samples.emplace(sample_joint(*input.posterior, rows, cfg.seed, threads));
    out.diagnostics["mc_samples"] = static_cast<double>(rows);
    out.diagnostics["jitter"] = input.posterior->jitter_used();
  }

  auto mc_kind = [&] {
    switch (cfg.policy) {
      case PolicyKind::qei: return BatchUtility::expected_improvement;
      case PolicyKind::qpi: return BatchUtility::probability_of_improvement;
      default: return BatchUtility::upper_confidence_bound;
    }
  };

  switch (cfg.policy) {
    case PolicyKind::qpo:
    case PolicyKind::qpo_conditional: {
      out.scores = qpo_scores(*samples, threads);
      const auto sel = cfg.policy == PolicyKind::qpo ? qpo_select(out.scores, input.means, b)
                                                     : qpo_conditional_batch(*samples, b, input.means);
      out.batch = sel.batch;
      out.diagnostics["zero_score_candidates"] = static_cast<double>((out.scores.array() <= 0.0).count());
      out.diagnostics["filled_slots"] = static_cast<double>(sel.filled_slots);
      out.diagnostics["fill_engaged"] = sel.filled_slots > 0 ? 1.0 : 0.0;
      break;
    }
    case PolicyKind::greedy:
      out.scores = input.means;
      out.batch = greedy_select(input.means, b);
      break;
    case PolicyKind::ucb:
      out.scores = input.means + cfg.beta_ucb * input.stds;
      out.batch = ucb_select(input.means, input.stds, cfg.beta_ucb, b);
      break;
    case PolicyKind::bucb:
    case PolicyKind::qei:
    case PolicyKind::qpi: {
      auto scored = mc_batch_select(*samples, input.means, b, mc_kind(), input.incumbent, cfg.beta_bucb);
      out.scores = scored.first_slot;
      out.batch = std::move(scored.batch);
      out.diagnostics["batch_utility"] = scored.slot_scores.back();
      break;
    }
    case PolicyKind::pts:
      out.scores = qpo_scores(*samples, threads);
      out.batch = pts_select(*samples, b);
      break;
    case PolicyKind::tsrsr:
      out.scores = qpo_scores(*samples, threads);
      out.batch = tsrsr_select(input.means, input.stds, *samples, b);
      break;
    case PolicyKind::random10k: {
      std::vector<std::size_t> all(static_cast<std::size_t>(n));
      std::iota(all.begin(), all.end(), 0);
      out.scores = Eigen::VectorXd::Zero(n);
      out.batch = random10k_select(all, b, cfg.seed);
      break;
    }
  }
  return out;
}

}  // namespace qpo
