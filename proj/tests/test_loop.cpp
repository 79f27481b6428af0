// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "qpo/errors.hpp"
#include "qpo/loop.hpp"

namespace {

qpo::CandidatePool small_pool(std::size_t n = 120, qpo::SyntheticGenerator g = qpo::SyntheticGenerator::multimodal,
                              std::uint64_t seed = 3) {
  qpo::SyntheticSpec spec;
  spec.generator = g;
  spec.size = n;
  spec.dimension = 64;
  spec.families = 6;
  spec.seed = seed;
  return qpo::synthetic_pool(spec);
}

qpo::CampaignConfig small_config(qpo::PolicyKind policy, std::uint64_t seed = 1) {
  qpo::CampaignConfig cfg;
  cfg.seed = seed;
  cfg.init_batch = 10;
  cfg.batch_size = 5;
  cfg.iterations = 3;
  cfg.policy.policy = policy;
  cfg.policy.mc_samples = 400;
  cfg.policy.prefilter_size = 60;
  cfg.surrogate.restarts = 2;
  cfg.top_k = {5, 10};
  cfg.top_fractions = {0.05, 0.1};
  return cfg;
}

std::string log_of(const qpo::CampaignState& s, const qpo::CandidatePool& pool) {
  std::ostringstream out;
  qpo::write_state_log(out, s, pool);
  return out.str();
}

// Average ranks, ties sharing the mean rank.
std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = 0.5 * static_cast<double>(i + j);
    i = j + 1;
  }
  return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / static_cast<double>(ra.size());
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / static_cast<double>(rb.size());
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_CASE("campaign config validation") {
  auto cfg = small_config(qpo::PolicyKind::greedy);
  CHECK_NOTHROW(cfg.validate(25));
  CHECK_THROWS_AS(cfg.validate(24), qpo::UsageError);
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(100), qpo::UsageError);
  cfg.batch_size = 5;
  cfg.init_batch = 1;
  CHECK_THROWS_AS(cfg.validate(100), qpo::UsageError);
  cfg.iterations = 0;
  CHECK_NOTHROW(cfg.validate(100));
}

TEST_CASE("zero iterations keeps only the seed batch") {
  const auto pool = small_pool();
  auto cfg = small_config(qpo::PolicyKind::qpo);
  cfg.iterations = 0;
  const auto s = qpo::run_campaign(pool, cfg);
  CHECK(s.acquired.size() == 10);
  CHECK(s.records.empty());
  CHECK(s.initial.policy == "seed");
  CHECK_FALSE(s.aborted);
}

TEST_CASE("every policy exhausts a pool of exact capacity") {
  const auto pool = small_pool(25);
  for (const auto& name : qpo::policy_names()) {
    auto cfg = small_config(qpo::parse_policy(name));
    cfg.iterations = 1;
    cfg.batch_size = 15;
    cfg.policy.prefilter_size = 20;
    CAPTURE(name);
    const auto s = qpo::run_campaign(pool, cfg);
    REQUIRE_FALSE(s.aborted);
    const auto idx = s.acquired_indices();
    CHECK(std::set<std::size_t>(idx.begin(), idx.end()).size() == 25);
  }
}

TEST_CASE("campaign invariants for every policy") {
  const auto pool = small_pool();
  for (const auto& name : qpo::policy_names()) {
    CAPTURE(name);
    const auto cfg = small_config(qpo::parse_policy(name));
    const auto s = qpo::run_campaign(pool, cfg);
    REQUIRE_FALSE(s.aborted);
    const auto idx = s.acquired_indices();
    CHECK(std::set<std::size_t>(idx.begin(), idx.end()).size() == idx.size());
    CHECK(s.records.size() == cfg.iterations);
    std::size_t expected = cfg.init_batch;
    double previous_fraction = 0.0;
    double previous_top = -INFINITY;
    for (std::size_t t = 0; t < s.records.size(); ++t) {
      const auto& r = s.records[t];
      expected += cfg.batch_size;
      CHECK(r.iteration == t + 1);
      CHECK(r.policy == name);
      CHECK(r.selected.size() == cfg.batch_size);
      CHECK(r.hyperparams.has_value());
      const auto acquired_now = static_cast<std::size_t>(
          std::count_if(s.acquired.begin(), s.acquired.end(), [&](const auto& a) { return a.iteration <= t + 1; }));
      CHECK(acquired_now == expected);
      const double f = r.metrics.fraction_top.at(0.1);
      CHECK(f >= previous_fraction);
      CHECK(f <= 1.0);
      previous_fraction = f;
      CHECK(r.metrics.top_k_avg.at(5) >= previous_top);
      previous_top = r.metrics.top_k_avg.at(5);
    }
    // Values match the stored oracle.
    for (const auto& a : s.acquired) CHECK(a.value == pool.oracle_values()[a.index]);
    CHECK(qpo::cumulative_regret(s, pool, cfg.direction) >= 0.0);
  }
}

TEST_CASE("campaigns are deterministic") {
  const auto pool = small_pool();
  for (auto kind : {qpo::PolicyKind::qpo, qpo::PolicyKind::pts, qpo::PolicyKind::random10k}) {
    const auto cfg = small_config(kind, 7);
    const auto a = qpo::run_campaign(pool, cfg);
    const auto b = qpo::run_campaign(pool, cfg);
    CHECK(a.acquired_indices() == b.acquired_indices());
    CHECK(log_of(a, pool) == log_of(b, pool));
    auto threaded = cfg;
    threaded.threads = 3;
    threaded.surrogate.threads = 3;
    CHECK(log_of(qpo::run_campaign(pool, threaded), pool) == log_of(a, pool));
  }
  const auto c = qpo::run_campaign(pool, small_config(qpo::PolicyKind::qpo, 8));
  CHECK(c.acquired_indices() != qpo::run_campaign(pool, small_config(qpo::PolicyKind::qpo, 7)).acquired_indices());
}

TEST_CASE("state log layout") {
  const auto pool = small_pool();
  const auto cfg = small_config(qpo::PolicyKind::qpo);
  const auto s = qpo::run_campaign(pool, cfg);
  std::istringstream in(log_of(s, pool));
  std::string line;
  std::vector<nlohmann::json> lines;
  while (std::getline(in, line)) lines.push_back(nlohmann::json::parse(line));
  REQUIRE(lines.size() == 1 + cfg.iterations);
  CHECK(lines[0]["policy"] == "seed");
  CHECK(lines[1]["policy"] == "qpo");
  CHECK(lines[1]["selected_ids"].size() == cfg.batch_size);
  CHECK(lines[1]["selected_indices"].size() == cfg.batch_size);
  CHECK(lines[1]["oracle_values"].size() == cfg.batch_size);
  CHECK(lines[1].contains("hyperparams"));
  CHECK(lines[1].contains("metrics"));
  CHECK_FALSE(lines[1].contains("fit_seconds"));

  std::ostringstream timing;
  qpo::write_timing_log(timing, s);
  const auto text = timing.str();
  CHECK(std::count(text.begin(), text.end(), '\n') >= static_cast<long>(cfg.iterations));
}

TEST_CASE("minimization campaigns") {
  const auto pool = small_pool();
  auto cfg = small_config(qpo::PolicyKind::greedy);
  cfg.direction = qpo::Direction::minimize;
  const auto s = qpo::run_campaign(pool, cfg);
  const auto& r = s.records.back();
  const auto vals = s.acquired_values();
  CHECK(r.metrics.best_value == *std::min_element(vals.begin(), vals.end()));
}

TEST_CASE("greedy on an exhaustible pool finds the optimum") {
  const auto pool = small_pool(40, qpo::SyntheticGenerator::sparse_linear);
  auto cfg = small_config(qpo::PolicyKind::greedy);
  cfg.init_batch = 10;
  cfg.batch_size = 10;
  cfg.iterations = 3;
  const auto s = qpo::run_campaign(pool, cfg);
  const auto& f = pool.oracle_values();
  const auto best = static_cast<std::size_t>(std::max_element(f.begin(), f.end()) - f.begin());
  const auto idx = s.acquired_indices();
  CHECK(std::find(idx.begin(), idx.end(), best) != idx.end());
  CHECK(s.records.back().metrics.simple_regret == 0.0);
}

TEST_CASE("oracle callbacks") {
  const auto pool = small_pool();
  const qpo::CandidatePool blind(pool.fingerprints());
  const auto& truth = pool.oracle_values();
  const qpo::Oracle oracle = [&](std::span<const std::size_t> idx) {
    std::vector<double> out;
    for (auto i : idx) out.push_back(truth[i]);
    return out;
  };
  const auto cfg = small_config(qpo::PolicyKind::qpo);
  const auto a = qpo::run_campaign(blind, cfg, oracle);
  const auto b = qpo::run_campaign(pool, cfg);
  CHECK(a.acquired_indices() == b.acquired_indices());
  CHECK_FALSE(a.records.back().metrics.has_regret);
  CHECK_THROWS_AS(qpo::run_campaign(blind, cfg), qpo::DataError);
  const qpo::Oracle short_oracle = [](std::span<const std::size_t>) { return std::vector<double>{1.0}; };
  CHECK_THROWS_AS(qpo::run_campaign(blind, cfg, short_oracle), qpo::DataError);
}

TEST_CASE("lookup_oracle") {
  const qpo::CandidatePool pool({qpo::CountFingerprint({{0, 1}}, 4), qpo::CountFingerprint({{1, 1}}, 4),
                                 qpo::CountFingerprint({{2, 1}}, 4)},
                                {}, std::vector<double>{0.5, -1.0, 2.0});
  const std::size_t one[] = {2};
  CHECK(qpo::lookup_oracle(pool, one) == std::vector<double>{2.0});
  const std::size_t repeat[] = {1, 1};
  CHECK(qpo::lookup_oracle(pool, repeat) == std::vector<double>{-1.0, -1.0});
  const std::size_t order[] = {2, 0, 1};
  CHECK(qpo::lookup_oracle(pool, order) == std::vector<double>{2.0, 0.5, -1.0});
  const std::size_t bad[] = {3};
  CHECK_THROWS_AS(qpo::lookup_oracle(pool, bad), qpo::UsageError);
  const qpo::CandidatePool blind(pool.fingerprints());
  CHECK_THROWS_AS(qpo::lookup_oracle(blind, one), qpo::DataError);
}

TEST_CASE("synthetic pools") {
  SUBCASE("fixed seed reproduces the pool") {
    for (auto g : {qpo::SyntheticGenerator::gp_draw, qpo::SyntheticGenerator::sparse_linear,
                   qpo::SyntheticGenerator::multimodal}) {
      const auto a = small_pool(80, g, 5);
      const auto b = small_pool(80, g, 5);
      CHECK(a.fingerprints() == b.fingerprints());
      CHECK(a.oracle_values() == b.oracle_values());
      CHECK(a.size() == 80);
      CHECK(a.id(3) == "s3");
      CHECK(small_pool(80, g, 6).oracle_values() != a.oracle_values());
    }
  }
  SUBCASE("zero weights give a constant objective") {
    qpo::SyntheticSpec spec;
    spec.generator = qpo::SyntheticGenerator::sparse_linear;
    spec.size = 50;
    spec.weight_density = 0.0;
    const auto pool = qpo::synthetic_pool(spec);
    const auto& f = pool.oracle_values();
    CHECK(std::all_of(f.begin(), f.end(), [&](double v) { return v == f.front(); }));
  }
  SUBCASE("generator names") {
    CHECK(qpo::parse_generator("gp-draw") == qpo::SyntheticGenerator::gp_draw);
    CHECK(qpo::generator_name(qpo::SyntheticGenerator::sparse_linear) == "sparse-linear");
    CHECK_THROWS_AS(qpo::parse_generator("smiles"), qpo::UsageError);
  }
}

TEST_CASE("gp-draw objectives follow Tanimoto similarity") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    qpo::SyntheticSpec spec;
    spec.generator = qpo::SyntheticGenerator::gp_draw;
    spec.size = 500;
    spec.seed = seed;
    const auto pool = qpo::synthetic_pool(spec);
    const auto gram = qpo::tanimoto_gram(pool.fingerprints(), qpo::TanimotoForm::min_max);
    const auto& f = pool.oracle_values();
    std::vector<double> similarity, closeness;
    for (std::size_t i = 0; i < f.size(); ++i)
      for (std::size_t j = i + 1; j < f.size(); ++j) {
        similarity.push_back(gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        closeness.push_back(-std::abs(f[i] - f[j]));
      }
    CAPTURE(seed);
    CHECK(spearman(similarity, closeness) > 0.0);
  }
}
