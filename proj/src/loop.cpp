// SPDX-License-Identifier: Apache-2.0
#include "qpo/loop.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "qpo/errors.hpp"
#include "qpo/rng.hpp"

namespace qpo {

namespace {

constexpr std::uint64_t kInitialStream = 0x5eed;
constexpr std::uint64_t kFitStream = 0xf17;
constexpr std::uint64_t kPolicyStream = 0xac0;

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

void CampaignConfig::validate(std::size_t pool_size) const {
  if (init_batch == 0) throw UsageError("campaign: init_batch must be positive");
  if (batch_size == 0) throw UsageError("campaign: batch_size must be positive");
  if (init_batch + iterations * batch_size > pool_size)
    throw UsageError("campaign: init_batch + iterations * batch_size = " +
                     std::to_string(init_batch + iterations * batch_size) + " exceeds pool size " +
                     std::to_string(pool_size));
  policy.validate(batch_size);
  if (iterations > 0 && init_batch < 2) throw UsageError("campaign: init_batch must be >= 2 to fit the surrogate");
}

std::vector<std::size_t> CampaignState::acquired_indices() const {
  std::vector<std::size_t> out;
  out.reserve(acquired.size());
  for (const auto& a : acquired) out.push_back(a.index);
  return out;
}

std::vector<double> CampaignState::acquired_values() const {
  std::vector<double> out;
  out.reserve(acquired.size());
  for (const auto& a : acquired) out.push_back(a.value);
  return out;
}

std::vector<double> lookup_oracle(const CandidatePool& pool, std::span<const std::size_t> indices) {
  const auto& f = pool.oracle_values();
  std::vector<double> out;
  out.reserve(indices.size());
  for (auto i : indices) {
    if (i >= f.size()) throw UsageError("oracle: candidate index " + std::to_string(i) + " out of range");
    out.push_back(f[i]);
  }
  return out;
}

CampaignState run_campaign(const CandidatePool& pool, const CampaignConfig& cfg, const Oracle& oracle) {
  cfg.validate(pool.size());
  if (!oracle && !pool.has_oracle()) throw DataError("campaign: pool has no oracle values and no oracle was given");
  const auto evaluate = [&](std::span<const std::size_t> idx) {
    auto values = oracle ? oracle(idx) : lookup_oracle(pool, idx);
    if (values.size() != idx.size()) throw DataError("oracle returned the wrong number of values");
    for (double v : values)
      if (!std::isfinite(v)) throw DataError("oracle returned a non-finite value");
    return values;
  };

  CampaignState state;
  state.seed = cfg.seed;
  std::vector<char> taken(pool.size(), 0);

  auto record_batch = [&](IterationRecord& rec, std::span<const std::size_t> picks, std::size_t iteration) {
    rec.selected.assign(picks.begin(), picks.end());
    rec.values = evaluate(picks);
    for (std::size_t k = 0; k < picks.size(); ++k) {
      if (taken[picks[k]]) throw UsageError("campaign: candidate " + std::to_string(picks[k]) + " acquired twice");
      taken[picks[k]] = 1;
      state.acquired.push_back({picks[k], rec.values[k], iteration});
    }
    const auto idx = state.acquired_indices();
    const auto vals = state.acquired_values();
    const double before = iteration == 0 ? 0.0
                          : state.records.empty() ? state.initial.metrics.cumulative_regret
                                                  : state.records.back().metrics.cumulative_regret;
    rec.metrics = snapshot(pool, idx, vals, cfg.direction, cfg.top_k, cfg.top_fractions, before);
  };

  // Initial batch.
  {
    std::vector<std::size_t> all(pool.size());
    std::iota(all.begin(), all.end(), 0);
    state.initial.iteration = 0;
    state.initial.policy = "seed";
    state.initial.seeds.policy = stream_key(cfg.seed, kInitialStream);
    const auto picks = random10k_select(all, cfg.init_batch, state.initial.seeds.policy);
    record_batch(state.initial, picks, 0);
  }

  const int sign = direction_sign(cfg.direction);
  for (std::size_t t = 1; t <= cfg.iterations; ++t) {
    IterationRecord rec;
    rec.iteration = t;
    rec.policy = std::string(policy_name(cfg.policy.policy));
    rec.seeds.fit = stream_key(stream_key(cfg.seed, kFitStream), t);
    rec.seeds.policy = stream_key(stream_key(cfg.seed, kPolicyStream), t);

    const auto acquired = state.acquired_indices();
    const auto values = state.acquired_values();
    std::vector<std::size_t> candidates;
    candidates.reserve(pool.size() - acquired.size());
    for (std::size_t i = 0; i < pool.size(); ++i)
      if (!taken[i]) candidates.push_back(i);

    std::vector<std::size_t> picks;
    try {
      auto start = std::chrono::steady_clock::now();
      auto train = TrainingSet::from_pool(pool, acquired, values, sign);
      SurrogateOptions sopts = cfg.surrogate;
      sopts.threads = cfg.threads;
      const auto hp = fit(train, sopts, rec.seeds.fit);
      rec.hyperparams = hp;
      const TanimotoGp gp(std::move(train), hp, sopts);
      rec.fit_seconds = seconds_since(start);

      start = std::chrono::steady_clock::now();
      const auto marginals = gp.predict_marginals(pool, candidates);
      std::vector<std::size_t> subset = candidates;
      AcquisitionInput input;
      if (uses_prefilter(cfg.policy.policy)) {
        const auto keep = prefilter(marginals.mean, marginals.stddev, cfg.policy);
        subset.clear();
        input.means.resize(static_cast<Eigen::Index>(keep.size()));
        input.stds.resize(static_cast<Eigen::Index>(keep.size()));
        for (std::size_t k = 0; k < keep.size(); ++k) {
          subset.push_back(candidates[keep[k]]);
          input.means(static_cast<Eigen::Index>(k)) = marginals.mean(static_cast<Eigen::Index>(keep[k]));
          input.stds(static_cast<Eigen::Index>(k)) = marginals.stddev(static_cast<Eigen::Index>(keep[k]));
        }
      } else {
        input.means = marginals.mean;
        input.stds = marginals.stddev;
      }
      std::optional<GaussianPosterior> post;
      if (needs_joint_posterior(cfg.policy.policy)) {
        post.emplace(gp.posterior(pool, subset));
        input.posterior = &*post;
        input.means = post->mean();
        input.stds = post->stddev();
      }
      double incumbent = -std::numeric_limits<double>::infinity();
      for (double v : values) incumbent = std::max(incumbent, sign * v);
      input.incumbent = incumbent;

      PolicyConfig pcfg = cfg.policy;
      pcfg.seed = rec.seeds.policy;
      const auto result = acquire(pcfg, input, cfg.batch_size, cfg.threads);
      rec.acquire_seconds = seconds_since(start);
      rec.candidates_scored = subset.size();
      rec.diagnostics = result.diagnostics;
      for (auto local : result.batch) picks.push_back(subset[local]);
    } catch (const NumericError& e) {
      state.aborted = true;
      state.abort_reason = "iteration " + std::to_string(t) + ": " + e.what();
      return state;
    }
    record_batch(rec, picks, t);
    state.records.push_back(std::move(rec));
  }
  return state;
}

double cumulative_regret(const CampaignState& state, const CandidatePool& pool, Direction direction) {
  const auto& f = pool.oracle_values();
  if (f.empty()) return 0.0;
  const double optimum =
      direction == Direction::maximize ? *std::max_element(f.begin(), f.end()) : *std::min_element(f.begin(), f.end());
  std::vector<double> best;
  double running = direction == Direction::maximize ? -std::numeric_limits<double>::infinity()
                                                    : std::numeric_limits<double>::infinity();
  auto absorb = [&](const IterationRecord& rec) {
    for (double v : rec.values) running = direction == Direction::maximize ? std::max(running, v) : std::min(running, v);
    best.push_back(running);
  };
  absorb(state.initial);
  for (const auto& rec : state.records) absorb(rec);
  return cumulative_regret(best, optimum, direction);
}

namespace {

nlohmann::ordered_json record_json(const IterationRecord& rec, const CandidatePool& pool) {
  nlohmann::ordered_json j;
  j["iteration"] = rec.iteration;
  j["policy"] = rec.policy;
  std::vector<std::string> ids;
  for (auto i : rec.selected) ids.push_back(pool.id(i));
  j["selected_ids"] = ids;
  j["selected_indices"] = rec.selected;
  j["oracle_values"] = rec.values;
  if (rec.hyperparams) {
    j["hyperparams"] = {{"mean_const", rec.hyperparams->mean_const},
                        {"output_scale", rec.hyperparams->output_scale},
                        {"noise", rec.hyperparams->noise}};
  } else {
    j["hyperparams"] = nullptr;
  }
  j["candidates_scored"] = rec.candidates_scored;
  j["seeds"] = {{"fit", rec.seeds.fit}, {"policy", rec.seeds.policy}};
  j["diagnostics"] = rec.diagnostics;

  nlohmann::ordered_json m;
  nlohmann::ordered_json topk = nlohmann::ordered_json::object();
  for (const auto& [k, v] : rec.metrics.top_k_avg) topk[std::to_string(k)] = v;
  nlohmann::ordered_json frac = nlohmann::ordered_json::object();
  for (const auto& [p, v] : rec.metrics.fraction_top) frac[nlohmann::json(p).dump()] = v;
  m["top_k_avg"] = topk;
  m["fraction_top"] = frac;
  m["best_value"] = rec.metrics.best_value;
  if (rec.metrics.has_regret) {
    m["simple_regret"] = rec.metrics.simple_regret;
    m["cumulative_regret"] = rec.metrics.cumulative_regret;
    m["regret_definition"] = "best-so-far";
  }
  j["metrics"] = m;
  return j;
}

}  // namespace

void write_state_log(std::ostream& out, const CampaignState& state, const CandidatePool& pool) {
  out << record_json(state.initial, pool).dump() << '\n';
  for (const auto& rec : state.records) out << record_json(rec, pool).dump() << '\n';
  if (state.aborted) {
    nlohmann::ordered_json j;
    j["aborted"] = true;
    j["reason"] = state.abort_reason;
    out << j.dump() << '\n';
  }
}

void write_timing_log(std::ostream& out, const CampaignState& state) {
  for (const auto& rec : state.records) {
    nlohmann::ordered_json j;
    j["iteration"] = rec.iteration;
    j["fit_seconds"] = rec.fit_seconds;
    j["acquire_seconds"] = rec.acquire_seconds;
    out << j.dump() << '\n';
  }
}

std::string_view generator_name(SyntheticGenerator g) {
  switch (g) {
    case SyntheticGenerator::gp_draw: return "gp-draw";
    case SyntheticGenerator::sparse_linear: return "sparse-linear";
    case SyntheticGenerator::multimodal: return "multimodal";
  }
  return "unknown";
}

SyntheticGenerator parse_generator(std::string_view name) {
  if (name == "gp-draw") return SyntheticGenerator::gp_draw;
  if (name == "sparse-linear") return SyntheticGenerator::sparse_linear;
  if (name == "multimodal") return SyntheticGenerator::multimodal;
  throw UsageError("unknown generator '" + std::string(name) + "'; valid generators: gp-draw, sparse-linear, multimodal");
}

namespace {

using FeatureCounts = std::map<std::uint32_t, std::uint32_t>;

CountFingerprint to_fingerprint(const FeatureCounts& counts, std::uint32_t dim) {
  std::vector<CountFingerprint::Entry> entries;
  entries.reserve(counts.size());
  for (const auto& [i, c] : counts) entries.push_back({i, c});
  return CountFingerprint(std::move(entries), dim);
}

std::vector<std::uint32_t> distinct_features(std::size_t k, std::uint32_t dim, StreamRng& rng) {
  std::vector<std::uint32_t> all(dim);
  std::iota(all.begin(), all.end(), 0u);
  k = std::min<std::size_t>(k, dim);
  for (std::size_t j = 0; j < k; ++j) {
    std::uniform_int_distribution<std::size_t> pick(j, dim - 1);
    std::swap(all[j], all[pick(rng)]);
  }
  all.resize(k);
  return all;
}

}  // namespace

CandidatePool synthetic_pool(const SyntheticSpec& spec) {
  if (spec.size < 1) throw UsageError("synthetic_pool: size must be >= 1");
  if (spec.dimension < 1) throw UsageError("synthetic_pool: dimension must be >= 1");
  if (spec.families < 1) throw UsageError("synthetic_pool: families must be >= 1");
  if (spec.weight_density < 0.0 || spec.weight_density > 1.0)
    throw UsageError("synthetic_pool: weight_density must lie in [0, 1]");
  const std::uint32_t dim = spec.dimension;

  // Family prototypes: ~20 features with small counts.
  StreamRng proto_rng(spec.seed, 1);
  std::geometric_distribution<std::uint32_t> extra_count(0.5);
  std::vector<FeatureCounts> prototypes(spec.families);
  for (auto& proto : prototypes)
    for (auto f : distinct_features(20, dim, proto_rng)) proto[f] = 1 + std::min(extra_count(proto_rng), 4u);

  // Planted motifs (multimodal only).
  StreamRng motif_rng(spec.seed, 2);
  std::vector<std::vector<std::uint32_t>> motifs;
  if (spec.generator == SyntheticGenerator::multimodal)
    for (std::size_t k = 0; k < spec.motifs; ++k) motifs.push_back(distinct_features(6, dim, motif_rng));

  std::vector<FeatureCounts> counts(spec.size);
  for (std::size_t i = 0; i < spec.size; ++i) {
    StreamRng rng(spec.seed, 1000 + i);
    std::uniform_int_distribution<std::size_t> family(0, spec.families - 1);
    std::bernoulli_distribution keep(0.7);
    std::uniform_int_distribution<int> wiggle(-1, 1);
    auto& fc = counts[i];
    for (const auto& [f, c] : prototypes[family(rng)]) {
      if (!keep(rng)) continue;
      fc[f] = static_cast<std::uint32_t>(std::max(1, static_cast<int>(c) + wiggle(rng)));
    }
    std::uniform_int_distribution<int> extras(4, 10);
    std::uniform_int_distribution<std::uint32_t> feature(0, dim - 1);
    std::uniform_int_distribution<std::uint32_t> small(1, 2);
    for (int e = extras(rng); e > 0; --e) fc[feature(rng)] += small(rng);
    std::bernoulli_distribution carries(0.03);
    for (const auto& motif : motifs) {
      if (!carries(rng)) continue;
      for (auto f : motif) fc[f] = std::max<std::uint32_t>(fc[f], 2);
    }
  }

  std::vector<CountFingerprint> fps;
  fps.reserve(spec.size);
  for (const auto& fc : counts) fps.push_back(to_fingerprint(fc, dim));

  std::vector<double> objective(spec.size, 0.0);
  auto linear = [&] {
    StreamRng wrng(spec.seed, 3);
    std::bernoulli_distribution active(spec.weight_density);
    std::normal_distribution<double> normal;
    std::vector<double> w(dim, 0.0);
    for (auto& x : w)
      if (active(wrng)) x = normal(wrng);
    std::vector<double> out(spec.size, 0.0);
    for (std::size_t i = 0; i < spec.size; ++i)
      for (const auto& e : fps[i].entries()) out[i] += w[e.index] * e.count;
    return out;
  };

  switch (spec.generator) {
    case SyntheticGenerator::sparse_linear:
      objective = linear();
      break;
    case SyntheticGenerator::multimodal: {
      auto trend = linear();
      const double mean = std::accumulate(trend.begin(), trend.end(), 0.0) / static_cast<double>(spec.size);
      double var = 0.0;
      for (double v : trend) var += (v - mean) * (v - mean);
      const double sd = std::sqrt(var / static_cast<double>(spec.size));
      for (std::size_t i = 0; i < spec.size; ++i) {
        double value = sd > 0.0 ? 0.3 * (trend[i] - mean) / sd : 0.0;
        for (std::size_t k = 0; k < motifs.size(); ++k) {
          std::size_t present = 0;
          for (auto f : motifs[k])
            if (counts[i].count(f)) ++present;
          const double frac = static_cast<double>(present) / static_cast<double>(motifs[k].size());
          value += (1.0 + 0.5 * static_cast<double>(k)) * frac * frac;
        }
        objective[i] = value;
      }
      break;
    }
    case SyntheticGenerator::gp_draw: {
      const auto gram = tanimoto_gram(fps, TanimotoForm::min_max);
      const auto factor = cholesky_with_jitter(gram);
      Eigen::VectorXd eps(static_cast<Eigen::Index>(spec.size));
      StreamRng rng(spec.seed, 4);
      std::normal_distribution<double> normal;
      for (Eigen::Index i = 0; i < eps.size(); ++i) eps(i) = normal(rng);
      const Eigen::VectorXd f = factor.lower.triangularView<Eigen::Lower>() * eps;
      for (std::size_t i = 0; i < spec.size; ++i) objective[i] = f(static_cast<Eigen::Index>(i));
      break;
    }
  }

  std::vector<std::string> ids;
  ids.reserve(spec.size);
  for (std::size_t i = 0; i < spec.size; ++i) ids.push_back("s" + std::to_string(i));
  return CandidatePool(std::move(fps), std::move(ids), std::move(objective));
}

}  // namespace qpo
