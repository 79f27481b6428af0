// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include <boost/math/distributions/normal.hpp>

#include "qpo/acquisition.hpp"
#include "qpo/errors.hpp"
#include "qpo/rng.hpp"

namespace {

qpo::GaussianPosterior toy() {
  Eigen::Vector3d mean(10.0, 5.0, 0.0);
  Eigen::Matrix3d cov;
  cov << 101, 100, 0, 100, 101, 0, 0, 0, 1;
  return {mean, cov};
}

// Orthant probabilities of the toy posterior, from an independent Owen's T
// evaluation.
constexpr double kToyProb[3] = {0.8387930648807578, 0.000158084731271102, 0.1610488503879712};

qpo::SampleMatrix rows(std::initializer_list<std::initializer_list<double>> values) {
  qpo::RowMatrix m(static_cast<Eigen::Index>(values.size()), static_cast<Eigen::Index>(values.begin()->size()));
  Eigen::Index r = 0;
  for (const auto& row : values) {
    Eigen::Index c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return qpo::SampleMatrix(m);
}

qpo::GaussianPosterior random_posterior(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = normal(rng);
  Eigen::VectorXd mu(n);
  for (auto& v : mu) v = 0.5 * normal(rng);
  return {mu, a * a.transpose() / static_cast<double>(n) + 0.05 * Eigen::MatrixXd::Identity(n, n)};
}

std::set<std::size_t> as_set(const std::vector<std::size_t>& v) { return {v.begin(), v.end()}; }

bool unique_in_range(const std::vector<std::size_t>& v, std::size_t n) {
  return as_set(v).size() == v.size() && std::all_of(v.begin(), v.end(), [n](std::size_t i) { return i < n; });
}

}  // namespace

TEST_CASE("policy names") {
  CHECK(qpo::policy_names().size() == 10);
  for (const auto& name : qpo::policy_names()) CHECK(qpo::policy_name(qpo::parse_policy(name)) == name);
  try {
    qpo::parse_policy("thompson");
    FAIL("expected UsageError");
  } catch (const qpo::UsageError& e) {
    CHECK(std::string(e.what()).find("qpo-conditional") != std::string::npos);
  }
  CHECK(qpo::uses_prefilter(qpo::PolicyKind::qpo));
  CHECK(qpo::uses_prefilter(qpo::PolicyKind::random10k));
  CHECK_FALSE(qpo::uses_prefilter(qpo::PolicyKind::greedy));
  CHECK_FALSE(qpo::uses_prefilter(qpo::PolicyKind::ucb));
  CHECK(qpo::needs_joint_posterior(qpo::PolicyKind::tsrsr));
  CHECK_FALSE(qpo::needs_joint_posterior(qpo::PolicyKind::greedy));
}

TEST_CASE("policy config validation") {
  qpo::PolicyConfig cfg;
  CHECK_NOTHROW(cfg.validate(50));
  cfg.mc_samples = 0;
  CHECK_THROWS_AS(cfg.validate(50), qpo::UsageError);
  cfg.mc_samples = 10;
  cfg.prefilter_size = 10;
  CHECK_THROWS_AS(cfg.validate(11), qpo::UsageError);
  CHECK(qpo::PolicyConfig{}.beta_bucb == doctest::Approx(std::sqrt(3.0)));
}

TEST_CASE("prefilter") {
  qpo::PolicyConfig cfg;
  SUBCASE("identity when the pool is small") {
    const Eigen::VectorXd means = Eigen::VectorXd::LinSpaced(5, 3.0, -1.0).reverse();
    const auto keep = qpo::prefilter(means, Eigen::VectorXd::Ones(5), cfg);
    CHECK(keep == std::vector<std::size_t>{0, 1, 2, 3, 4});
  }
  SUBCASE("greedy metric") {
    cfg.prefilter_size = 2;
    CHECK(qpo::prefilter(Eigen::Vector3d(3, 1, 2), Eigen::Vector3d::Zero(), cfg) == std::vector<std::size_t>{0, 2});
  }
  SUBCASE("ucb metric") {
    cfg.prefilter_size = 1;
    cfg.prefilter_metric = qpo::PrefilterMetric::ucb;
    CHECK(qpo::prefilter(Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 2), cfg) == std::vector<std::size_t>{1});
  }
  SUBCASE("ties go to the lower index") {
    cfg.prefilter_size = 2;
    CHECK(qpo::prefilter(Eigen::Vector4d(1, 2, 2, 2), Eigen::Vector4d::Zero(), cfg) == std::vector<std::size_t>{1, 2});
  }
  SUBCASE("length mismatch") {
    CHECK_THROWS_AS(qpo::prefilter(Eigen::Vector2d::Zero(), Eigen::Vector3d::Zero(), cfg), qpo::UsageError);
  }
}

TEST_CASE("qpo_scores on the toy posterior") {
  const auto scores = qpo::qpo_scores(qpo::sample_joint(toy(), 1000000, 7));
  CHECK(std::abs(scores(0) - 0.84) <= 0.005);
  CHECK(std::abs(scores(1) - 0.00) <= 0.005);
  CHECK(std::abs(scores(2) - 0.16) <= 0.005);
  for (int i = 0; i < 3; ++i) {
    const double p = kToyProb[i];
    CHECK(std::abs(scores(i) - p) <= 4.0 * std::sqrt(p * (1 - p) / 1e6) + 1e-6);
  }
}

TEST_CASE("qpo_scores symmetry, single candidate and threading") {
  const qpo::GaussianPosterior iid(Eigen::VectorXd::Zero(5), Eigen::MatrixXd::Identity(5, 5));
  constexpr double kM = 100000;
  const auto samples = qpo::sample_joint(iid, static_cast<std::int64_t>(kM), 3);
  const auto scores = qpo::qpo_scores(samples);
  for (int i = 0; i < 5; ++i) CHECK(std::abs(scores(i) - 0.2) <= 3.0 * std::sqrt(0.2 * 0.8 / kM));
  CHECK(qpo::qpo_scores(samples, 4) == scores);

  const qpo::GaussianPosterior single(Eigen::VectorXd::Ones(1), Eigen::MatrixXd::Identity(1, 1));
  CHECK(qpo::qpo_scores(qpo::sample_joint(single, 10, 1))(0) == 1.0);
}

TEST_CASE("qpo_scores sum to one, ties to the lowest index") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> small(0, 3);
  for (int t = 0; t < 50; ++t) {
    qpo::RowMatrix m(37 + t, 1 + t % 9);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = small(rng);
    const auto scores = qpo::qpo_scores(qpo::SampleMatrix(m));
    CHECK(std::abs(scores.sum() - 1.0) <= 1e-12);
    CHECK(scores.minCoeff() >= 0.0);
  }
  const auto tied = qpo::qpo_scores(rows({{1, 1, 0}, {2, 2, 2}}));
  CHECK(tied(0) == 1.0);
  CHECK(tied(1) == 0.0);
}

TEST_CASE("qpo_select") {
  SUBCASE("equal scores fall back to the mean") {
    const auto sel = qpo::qpo_select(Eigen::Vector2d(0.5, 0.5), Eigen::Vector2d(1, 2), 1);
    CHECK(sel.batch == std::vector<std::size_t>{1});
  }
  SUBCASE("forced ordering engages the fill") {
    const auto sel = qpo::qpo_select(Eigen::Vector3d(0.9, 0.1, 0.0), Eigen::Vector3d::Zero(), 3);
    CHECK(sel.batch == std::vector<std::size_t>{0, 1, 2});
    CHECK(sel.filled_slots == 1);
  }
  SUBCASE("all zero scores is pure greedy") {
    const auto sel = qpo::qpo_select(Eigen::Vector3d::Zero(), Eigen::Vector3d(1, 3, 2), 2);
    CHECK(sel.batch == std::vector<std::size_t>{1, 2});
    CHECK(sel.filled_slots == 2);
  }
  SUBCASE("positive scores outrank any mean") {
    const auto sel = qpo::qpo_select(Eigen::Vector3d(0.0, 1e-6, 0.999999), Eigen::Vector3d(100, 0, 0), 2);
    CHECK(sel.batch == std::vector<std::size_t>{2, 1});
    CHECK(sel.filled_slots == 0);
  }
  SUBCASE("oversized batch") {
    CHECK_THROWS_AS(qpo::qpo_select(Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero(), 3), qpo::UsageError);
  }
}

TEST_CASE("qpo_select maximizes the summed score over all subsets") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> unif;
  for (int n = 1; n <= 10; ++n) {
    for (int b = 1; b <= std::min(n, 3); ++b) {
      for (int rep = 0; rep < 20; ++rep) {
        Eigen::VectorXd s(n);
        for (auto& v : s) v = unif(rng);
        s /= s.sum();
        const auto sel = qpo::qpo_select(s, Eigen::VectorXd::Zero(n), static_cast<std::size_t>(b));
        double chosen = 0.0;
        for (auto i : sel.batch) chosen += s(static_cast<Eigen::Index>(i));
        // Enumerate every b-subset by bitmask.
        double best = 0.0;
        for (unsigned mask = 0; mask < (1u << n); ++mask) {
          if (std::popcount(mask) != b) continue;
          double total = 0.0;
          for (int i = 0; i < n; ++i)
            if (mask & (1u << i)) total += s(i);
          best = std::max(best, total);
        }
        CHECK(chosen >= best - 1e-12);
      }
    }
  }
}

TEST_CASE("conditional construction agrees with qpo_select") {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 60; ++t) {
    const auto n = 2 + t % 7;
    const auto post = random_posterior(n, rng);
    const auto samples = qpo::sample_joint(post, 2000, static_cast<std::uint64_t>(t));
    const auto scores = qpo::qpo_scores(samples);
    for (std::size_t b = 1; b <= std::min<std::size_t>(3, static_cast<std::size_t>(n)); ++b) {
      const auto plain = qpo::qpo_select(scores, post.mean(), b);
      const auto cond = qpo::qpo_conditional_batch(samples, b, post.mean());
      CHECK(as_set(plain.batch) == as_set(cond.batch));
      if (b == 1) CHECK(plain.batch == cond.batch);
    }
  }
  const auto all_zero = rows({{3, 0, 0}, {2, 1, 1}, {9, 8, 7}});
  CHECK(qpo::qpo_conditional_batch(all_zero, 2, Eigen::Vector3d(0, 5, 1)).batch == std::vector<std::size_t>{0, 1});
}

TEST_CASE("monotone transforms leave every selection unchanged") {
  std::mt19937_64 rng(41);
  for (int t = 0; t < 10; ++t) {
    const auto post = random_posterior(6, rng);
    const auto base = qpo::sample_joint(post, 3000, 50 + t);
    const qpo::SampleMatrix moved(((2.0 * base.values()).array() + 3.0).matrix());
    const auto s0 = qpo::qpo_scores(base);
    const auto s1 = qpo::qpo_scores(moved);
    CHECK(s0 == s1);
    const Eigen::VectorXd m0 = post.mean();
    const Eigen::VectorXd m1 = (2.0 * m0).array() + 3.0;
    CHECK(qpo::qpo_select(s0, m0, 3).batch == qpo::qpo_select(s1, m1, 3).batch);
    CHECK(qpo::qpo_conditional_batch(base, 3, m0).batch == qpo::qpo_conditional_batch(moved, 3, m1).batch);
    CHECK(qpo::pts_select(base, 3) == qpo::pts_select(moved, 3));
  }
}

TEST_CASE("toy posterior batches") {
  const auto post = toy();
  const auto scores = qpo::qpo_scores(qpo::sample_joint(post, 100000, 1));
  CHECK(as_set(qpo::qpo_select(scores, post.mean(), 2).batch) == std::set<std::size_t>{0, 2});
  CHECK(as_set(qpo::greedy_select(post.mean(), 2)) == std::set<std::size_t>{0, 1});
}

TEST_CASE("pts_select") {
  SUBCASE("identical rows force max then runner-up") {
    const auto s = rows({{3, 1, 2}, {3, 1, 2}});
    CHECK(qpo::pts_select(s, 2) == std::vector<std::size_t>{0, 2});
  }
  SUBCASE("too few rows") {
    CHECK_THROWS_AS(qpo::pts_select(rows({{1, 2}}), 2), qpo::UsageError);
  }
  SUBCASE("single draws select in proportion to optimality") {
    const auto post = toy();
    constexpr int kReps = 100000;
    std::array<int, 3> counts{};
    for (int r = 0; r < kReps; ++r)
      ++counts[qpo::pts_select(qpo::sample_joint(post, 1, 1, 1, static_cast<std::uint64_t>(r)), 1)[0]];
    const auto reference = qpo::qpo_scores(qpo::sample_joint(post, 1000000, 99));
    for (int i = 0; i < 3; ++i) CHECK(std::abs(counts[i] / double(kReps) - reference(i)) <= 0.01);
  }
  SUBCASE("pairs favour the correlated runner-up") {
    const auto post = toy();
    int pair12 = 0;
    int pair13 = 0;
    for (int r = 0; r < 20000; ++r) {
      const auto batch = as_set(qpo::pts_select(qpo::sample_joint(post, 2, 5, 1, 2u * r), 2));
      if (batch == std::set<std::size_t>{0, 1}) ++pair12;
      if (batch == std::set<std::size_t>{0, 2}) ++pair13;
    }
    CHECK(pair12 > pair13);
  }
}

TEST_CASE("greedy and ucb") {
  CHECK(qpo::greedy_select(Eigen::Vector3d(1, 3, 2), 2) == std::vector<std::size_t>{1, 2});
  CHECK(qpo::ucb_select(Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 2), 1.0, 1) == std::vector<std::size_t>{1});
  CHECK(qpo::greedy_select(Eigen::Vector3d(1, 1, 1), 2) == std::vector<std::size_t>{0, 1});
  std::mt19937_64 rng(51);
  std::normal_distribution<double> normal;
  for (int t = 0; t < 20; ++t) {
    Eigen::VectorXd m(12), s(12);
    for (auto& v : m) v = normal(rng);
    for (auto& v : s) v = std::abs(normal(rng));
    CHECK(qpo::ucb_select(m, s, 0.0, 5) == qpo::greedy_select(m, 5));
  }
}

TEST_CASE("single-candidate expected improvement matches the closed form") {
  const double mu = 0.4;
  const double sigma = 1.3;
  const double incumbent = 0.9;
  const qpo::GaussianPosterior post(Eigen::VectorXd::Constant(1, mu), Eigen::MatrixXd::Constant(1, 1, sigma * sigma));
  const auto samples = qpo::sample_joint(post, 200000, 8);
  const std::size_t member[] = {0};
  const double est = qpo::batch_utility(samples, post.mean(), member, qpo::BatchUtility::expected_improvement,
                                        incumbent, 0.0);
  const Eigen::ArrayXd imp = (samples.values().col(0).array() - incumbent).max(0.0);
  const double stderr_mc = std::sqrt((imp - imp.mean()).square().sum() / (imp.size() - 1) / imp.size());
  const double z = (mu - incumbent) / sigma;
  const boost::math::normal_distribution<> n01;
  const double exact = sigma * (z * boost::math::cdf(n01, z) + boost::math::pdf(n01, z));
  CHECK(std::abs(est - exact) <= 3.0 * stderr_mc);

  qpo::PolicyConfig cfg;
  cfg.mc_samples = 1000;
  const auto pi = qpo::mc_batch_policy(post, 1, qpo::BatchUtility::probability_of_improvement,
                                       -std::numeric_limits<double>::infinity(), cfg);
  CHECK(pi.slot_scores[0] == 1.0);
}

TEST_CASE("a correlated dominated point adds little improvement") {
  Eigen::Matrix2d cov;
  cov << 1.0, 0.999, 0.999, 1.0;
  const qpo::GaussianPosterior post(Eigen::Vector2d(1.0, 0.0), cov);
  const auto samples = qpo::sample_joint(post, 50000, 12);
  const auto scored = qpo::mc_batch_select(samples, post.mean(), 2, qpo::BatchUtility::expected_improvement, 0.5, 0);
  REQUIRE(scored.batch == std::vector<std::size_t>{0, 1});
  const double marginal = scored.slot_scores[1] - scored.slot_scores[0];
  CHECK(marginal <= scored.first_slot(1));
  CHECK(marginal >= 0.0);
}

TEST_CASE("batch utilities") {
  const auto s = rows({{1.0, 3.0}, {2.0, -1.0}});
  const Eigen::Vector2d mu(1.0, 1.0);
  const std::size_t both[] = {0, 1};
  CHECK(qpo::batch_utility(s, mu, both, qpo::BatchUtility::expected_improvement, 1.5, 0) ==
        doctest::Approx((1.5 + 0.5) / 2));
  CHECK(qpo::batch_utility(s, mu, both, qpo::BatchUtility::probability_of_improvement, 1.5, 0) == 1.0);
  const double k = std::sqrt(3.0 * std::numbers::pi / 2.0);
  // Row 1: max(1 + 0, 1 + 2k); row 2: max(1 + k, 1 + 2k).
  CHECK(qpo::batch_utility(s, mu, both, qpo::BatchUtility::upper_confidence_bound, 0, std::sqrt(3.0)) ==
        doctest::Approx(1.0 + 2.0 * k));
}

TEST_CASE("sequential batch policies return distinct picks") {
  std::mt19937_64 rng(61);
  const auto post = random_posterior(8, rng);
  qpo::PolicyConfig cfg;
  cfg.mc_samples = 2000;
  for (auto kind : {qpo::BatchUtility::expected_improvement, qpo::BatchUtility::probability_of_improvement,
                    qpo::BatchUtility::upper_confidence_bound}) {
    const auto scored = qpo::mc_batch_policy(post, 4, kind, post.mean().maxCoeff(), cfg);
    CHECK(unique_in_range(scored.batch, 8));
    CHECK(scored.slot_scores.size() == 4);
    CHECK(std::is_sorted(scored.slot_scores.begin(), scored.slot_scores.end()));
  }
}

TEST_CASE("tsrsr_select") {
  SUBCASE("smaller regret wins") {
    CHECK(qpo::tsrsr_select(Eigen::Vector2d(4, 1), Eigen::Vector2d(1, 1), rows({{5, 3}}), 1) ==
          std::vector<std::size_t>{0});
  }
  SUBCASE("zero regret beats any positive ratio") {
    CHECK(qpo::tsrsr_select(Eigen::Vector3d(1, 2, 5), Eigen::Vector3d(0.5, 0.1, 3), rows({{1, 2, 5}}), 1) ==
          std::vector<std::size_t>{2});
  }
  SUBCASE("picks are never repeated") {
    const auto batch = qpo::tsrsr_select(Eigen::Vector3d(4, 1, 0), Eigen::Vector3d::Ones(), rows({{5, 3, 0}, {5, 3, 0}}), 2);
    CHECK(batch == std::vector<std::size_t>{0, 1});
  }
  SUBCASE("too few rows") {
    CHECK_THROWS_AS(qpo::tsrsr_select(Eigen::Vector2d::Zero(), Eigen::Vector2d::Ones(), rows({{1, 2}}), 2),
                    qpo::UsageError);
  }
}

TEST_CASE("random10k_select") {
  const std::vector<std::size_t> list{4, 8, 15, 16, 23};
  const auto all = qpo::random10k_select(list, 5, 3);
  CHECK(as_set(all) == as_set(list));
  CHECK(qpo::random10k_select(list, 3, 9) == qpo::random10k_select(list, 3, 9));
  std::map<std::size_t, int> counts;
  const std::vector<std::size_t> four{0, 1, 2, 3};
  for (std::uint64_t r = 0; r < 10000; ++r) ++counts[qpo::random10k_select(four, 1, r)[0]];
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(counts[i] / 1e4 - 0.25) <= 0.02);
  CHECK_THROWS_AS(qpo::random10k_select(four, 5, 0), qpo::UsageError);
}

TEST_CASE("rarely optimal candidates are seldom missed") {
  // Two independent unit normals; candidate 0 wins with probability p.
  const double p = 0.007;
  const boost::math::normal_distribution<> n01;
  const double gap = -std::sqrt(2.0) * boost::math::quantile(n01, p);
  const qpo::GaussianPosterior post(Eigen::Vector2d(0.0, gap), Eigen::Matrix2d::Identity());
  REQUIRE(qpo::prob_max_analytic(post, 0) == doctest::Approx(p).epsilon(1e-9));
  constexpr int kTrials = 10000;
  constexpr std::int64_t kM = 1000;
  const double delta = std::pow(1.0 - p, static_cast<double>(kM));
  CHECK(delta < 0.001);
  int missed = 0;
  for (int t = 0; t < kTrials; ++t)
    if (qpo::qpo_scores(qpo::sample_joint(post, kM, qpo::stream_key(1, t)))(0) == 0.0) ++missed;
  CHECK(missed / double(kTrials) <= delta + 3.0 * std::sqrt(delta / kTrials));
  CHECK(missed / double(kTrials) < 0.001 + 3.0 * std::sqrt(0.001 / kTrials));
}

TEST_CASE("MC scores satisfy the Hoeffding interval") {
  const qpo::GaussianPosterior post(Eigen::Vector2d(0.0, 0.7), Eigen::Matrix2d::Identity());
  const double p = qpo::prob_max_analytic(post, 0);
  constexpr int kTrials = 10000;
  constexpr std::int64_t kM = 1000;
  const double alpha = 0.1;
  const double radius = std::sqrt(std::log(2.0 / alpha) / (2.0 * kM));
  int inside = 0;
  for (int t = 0; t < kTrials; ++t)
    if (std::abs(qpo::qpo_scores(qpo::sample_joint(post, kM, qpo::stream_key(2, t)))(0) - p) <= radius) ++inside;
  const double sd = std::sqrt(kTrials * alpha * (1 - alpha));
  CHECK(inside >= (1 - alpha) * kTrials - 3.0 * sd);
}

TEST_CASE("MC scores agree with the bivariate closed form") {
  std::mt19937_64 rng(71);
  constexpr double kM = 1000000;
  for (int t = 0; t < 5; ++t) {
    const auto post = random_posterior(2, rng);
    const auto scores = qpo::qpo_scores(qpo::sample_joint(post, static_cast<std::int64_t>(kM), 1000 + t));
    for (int i = 0; i < 2; ++i) {
      const double p = qpo::prob_max_analytic(post, i);
      CHECK(std::abs(scores(i) - p) <= 4.0 * std::sqrt(p * (1 - p) / kM) + 1e-9);
    }
  }
}

TEST_CASE("acquire dispatches every policy") {
  std::mt19937_64 rng(81);
  const auto post = random_posterior(12, rng);
  qpo::AcquisitionInput input;
  input.posterior = &post;
  input.means = post.mean();
  input.stds = post.stddev();
  input.incumbent = 0.0;
  for (const auto& name : qpo::policy_names()) {
    qpo::PolicyConfig cfg;
    cfg.policy = qpo::parse_policy(name);
    cfg.mc_samples = 500;
    cfg.seed = 4;
    const auto result = qpo::acquire(cfg, input, 4);
    CAPTURE(name);
    CHECK(result.batch.size() == 4);
    CHECK(unique_in_range(result.batch, 12));
    CHECK(result.scores.size() == 12);
    CHECK(result.policy == cfg.policy);
    CHECK(qpo::acquire(cfg, input, 4, 3).batch == result.batch);
  }

  qpo::PolicyConfig pts;
  pts.policy = qpo::PolicyKind::pts;
  pts.seed = 6;
  CHECK(qpo::samples_required(pts, 4) == 4);
  // The b rows used are the head of the full shared draw.
  const auto full = qpo::sample_joint(post, pts.mc_samples, pts.seed);
  const qpo::SampleMatrix head(full.values().topRows(4));
  CHECK(qpo::acquire(pts, input, 4).batch == qpo::pts_select(head, 4));

  qpo::PolicyConfig qpo_cfg;
  qpo_cfg.mc_samples = 2000;
  const auto r = qpo::acquire(qpo_cfg, input, 3);
  CHECK(std::abs(r.scores.sum() - 1.0) <= 1e-12);
  CHECK(r.diagnostics.count("filled_slots") == 1);

  qpo::AcquisitionInput no_post = input;
  no_post.posterior = nullptr;
  CHECK_THROWS_AS(qpo::acquire(qpo_cfg, no_post, 3), qpo::UsageError);
  qpo::PolicyConfig greedy;
  greedy.policy = qpo::PolicyKind::greedy;
  CHECK(qpo::acquire(greedy, no_post, 3).batch == qpo::greedy_select(input.means, 3));
}
