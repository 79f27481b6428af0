// SPDX-License-Identifier: Apache-2.0
#include "qpo/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <unordered_set>

#include <boost/math/tools/minima.hpp>

#include "qpo/parallel.hpp"
#include "qpo/rng.hpp"

namespace qpo {

void TrainingSet::validate() const {
  if (static_cast<Eigen::Index>(inputs.size()) != targets.size())
    throw UsageError("training set: inputs and targets differ in length");
  if (sign != 1 && sign != -1) throw UsageError("training set: sign must be +1 or -1");
  if (!pool_indices.empty()) {
    if (pool_indices.size() != inputs.size())
      throw UsageError("training set: pool index count differs from input count");
    std::unordered_set<std::size_t> seen;
    for (auto i : pool_indices)
      if (!seen.insert(i).second) throw UsageError("training set: duplicate pool index " + std::to_string(i));
  }
  if (extra_noise.size() != 0 && extra_noise.size() != targets.size())
    throw UsageError("training set: extra_noise length differs from target count");
  if (!targets.allFinite()) throw UsageError("training set: non-finite target");
}

TrainingSet TrainingSet::from_pool(const CandidatePool& pool, std::span<const std::size_t> indices,
                                   std::span<const double> values, int sign) {
  if (indices.size() != values.size()) throw UsageError("training set: index and value counts differ");
  TrainingSet t;
  t.sign = sign;
  t.inputs.reserve(indices.size());
  t.targets.resize(static_cast<Eigen::Index>(values.size()));
  for (std::size_t k = 0; k < indices.size(); ++k) {
    t.inputs.push_back(pool.fingerprint(indices[k]));
    t.targets(static_cast<Eigen::Index>(k)) = values[k];
  }
  t.pool_indices.assign(indices.begin(), indices.end());
  t.validate();
  return t;
}

Eigen::MatrixXd tanimoto_gram(std::span<const CountFingerprint> fps, TanimotoForm form, unsigned threads) {
  const auto n = static_cast<Eigen::Index>(fps.size());
  Eigen::MatrixXd g(n, n);
  parallel_for(fps.size(), threads, [&](std::size_t r) {
    const auto row = static_cast<Eigen::Index>(r);
    for (Eigen::Index c = row; c < n; ++c) g(row, c) = tanimoto(fps[r], fps[static_cast<std::size_t>(c)], form);
  });
  for (Eigen::Index r = 1; r < n; ++r)
    for (Eigen::Index c = 0; c < r; ++c) g(r, c) = g(c, r);
  return g;
}

namespace {

Eigen::MatrixXd training_covariance(const TrainingSet& train, const GpHyperparams& hp, const Eigen::MatrixXd& gram) {
  Eigen::MatrixXd k = hp.output_scale * gram;
  k.diagonal().array() += hp.noise;
  if (train.extra_noise.size() != 0) k.diagonal() += train.extra_noise;
  return k;
}

void check_hyperparams(const GpHyperparams& hp) {
  if (!(hp.output_scale > 0.0) || !std::isfinite(hp.output_scale))
    throw UsageError("hyperparameters: output_scale must be positive");
  if (!(hp.noise >= kNoiseFloor) || !std::isfinite(hp.noise))
    throw UsageError("hyperparameters: noise below floor");
  if (!std::isfinite(hp.mean_const)) throw UsageError("hyperparameters: mean_const not finite");
}

double log_density(const Eigen::MatrixXd& lower, const Eigen::VectorXd& resid) {
  const Eigen::VectorXd w = lower.triangularView<Eigen::Lower>().solve(resid);
  const double log_det_half = lower.diagonal().array().log().sum();
  const auto n = static_cast<double>(resid.size());
  return -0.5 * w.squaredNorm() - log_det_half - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

// MLL over (output_scale, noise) with the constant mean profiled out, using
// one eigendecomposition of the Tanimoto Gram so each evaluation is O(n).
class ProfiledLikelihood {
 public:
  ProfiledLikelihood(const Eigen::MatrixXd& gram, const Eigen::VectorXd& y, double mean_lo, double mean_hi)
      : mean_lo_(mean_lo), mean_hi_(mean_hi) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    if (eig.info() != Eigen::Success) throw NumericError("fit: eigendecomposition of Gram matrix failed");
    lambda_ = eig.eigenvalues().cwiseMax(0.0);
    y_rot_ = eig.eigenvectors().transpose() * y;
    ones_rot_ = eig.eigenvectors().transpose() * Eigen::VectorXd::Ones(y.size());
  }

  double best_mean(double scale, double noise) const {
    const Eigen::ArrayXd inv_d = 1.0 / (scale * lambda_.array() + noise);
    const double num = (ones_rot_.array() * y_rot_.array() * inv_d).sum();
    const double den = (ones_rot_.array().square() * inv_d).sum();
    return std::clamp(num / den, mean_lo_, mean_hi_);
  }

  double value(double scale, double noise) const {
    const Eigen::ArrayXd d = scale * lambda_.array() + noise;
    const double c = best_mean(scale, noise);
    const Eigen::ArrayXd r = y_rot_.array() - c * ones_rot_.array();
    const auto n = static_cast<double>(d.size());
    return -0.5 * (r.square() / d).sum() - 0.5 * d.log().sum() - 0.5 * n * std::log(2.0 * std::numbers::pi);
  }

 private:
  double mean_lo_;
  double mean_hi_;
  Eigen::VectorXd lambda_;
  Eigen::VectorXd y_rot_;
  Eigen::VectorXd ones_rot_;
};

struct SearchPoint {
  double log_scale;
  double log_noise;
  double value;
};

}  // namespace

double mll(const TrainingSet& train, const GpHyperparams& hp, TanimotoForm form) {
  train.validate();
  if (train.size() == 0) throw UsageError("mll: empty training set");
  check_hyperparams(hp);
  const Eigen::MatrixXd gram = tanimoto_gram(train.inputs, form);
  const auto factor = cholesky_with_jitter(training_covariance(train, hp, gram));
  const Eigen::VectorXd resid = train.signed_targets().array() - hp.mean_const;
  return log_density(factor.lower, resid);
}

GpHyperparams fit(const TrainingSet& train, const SurrogateOptions& opts, std::uint64_t seed) {
  train.validate();
  if (train.size() < 2) throw UsageError("fit: need at least two training points");
  if (opts.restarts < 1) throw UsageError("fit: restarts must be positive");
  if (!(opts.scale_min > 0.0) || !(opts.scale_max > opts.scale_min) || opts.scale_min < kNoiseFloor)
    throw UsageError("fit: invalid scale bounds");
  if (train.extra_noise.size() != 0) throw UsageError("fit: per-observation noise is not supported when fitting");

  const Eigen::VectorXd y = train.signed_targets();
  const double lo = y.minCoeff();
  const double hi = y.maxCoeff();
  const double width = hi - lo;
  const ProfiledLikelihood objective(tanimoto_gram(train.inputs, opts.form, opts.threads), y, lo - width,
                                     hi + width);

  const double log_min = std::log(opts.scale_min);
  const double log_max = std::log(opts.scale_max);
  auto evaluate = [&](double ls, double ln) {
    const double v = objective.value(std::exp(ls), std::exp(ln));
    return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
  };

  // Coordinate-wise Brent over (log scale, log noise), then over the
  // (log total variance, log ratio) pair, which follows the ridge where
  // scale and noise trade off against each other.
  constexpr int kBits = std::numeric_limits<double>::digits / 2;
  auto climb = [&](SearchPoint p) {
    for (int sweep = 0; sweep < 200; ++sweep) {
      const double before = p.value;
      {
        auto r = boost::math::tools::brent_find_minima(
            [&](double ls) { return -evaluate(ls, p.log_noise); }, log_min, log_max, kBits);
        if (-r.second >= p.value) p = {r.first, p.log_noise, -r.second};
      }
      {
        auto r = boost::math::tools::brent_find_minima(
            [&](double ln) { return -evaluate(p.log_scale, ln); }, log_min, log_max, kBits);
        if (-r.second >= p.value) p = {p.log_scale, r.first, -r.second};
      }
      {
        // Move along scale/noise at fixed total variance.
        const double total = std::log(std::exp(p.log_scale) + std::exp(p.log_noise));
        auto at = [&](double log_ratio) {
          const double frac = 1.0 / (1.0 + std::exp(-log_ratio));
          const double ls = std::clamp(total + std::log(frac), log_min, log_max);
          const double ln = std::clamp(total + std::log1p(-frac), log_min, log_max);
          return std::pair{ls, ln};
        };
        const double span = log_max - log_min + 1.0;
        auto r = boost::math::tools::brent_find_minima(
            [&](double lr) {
              auto [ls, ln] = at(lr);
              return -evaluate(ls, ln);
            },
            -span, span, kBits);
        if (-r.second >= p.value) {
          auto [ls, ln] = at(r.first);
          p = {ls, ln, -r.second};
        }
      }
      if (p.value - before <= 1e-12 * (1.0 + std::abs(p.value))) break;
    }
    return p;
  };

  std::vector<SearchPoint> results(static_cast<std::size_t>(opts.restarts));
  parallel_for(results.size(), opts.threads, [&](std::size_t r) {
    StreamRng rng(seed, r);
    std::uniform_real_distribution<double> u(log_min, log_max);
    const double ls = u(rng);
    const double ln = u(rng);
    results[r] = climb({ls, ln, evaluate(ls, ln)});
  });

  const SearchPoint* best = nullptr;
  for (const auto& p : results)
    if (std::isfinite(p.value) && (!best || p.value > best->value)) best = &p;
  if (!best) throw FitError("fit: every restart failed", GpHyperparams{0.5 * (lo + hi), 1.0, 1.0});

  GpHyperparams hp;
  hp.output_scale = std::exp(best->log_scale);
  hp.noise = std::max(std::exp(best->log_noise), kNoiseFloor);
  hp.mean_const = objective.best_mean(hp.output_scale, hp.noise);
  return hp;
}

TanimotoGp::TanimotoGp(TrainingSet train, GpHyperparams hp, SurrogateOptions opts)
    : train_(std::move(train)), hp_(hp), opts_(opts) {
  train_.validate();
  check_hyperparams(hp_);
  if (train_.size() > 0) {
    const Eigen::MatrixXd gram = tanimoto_gram(train_.inputs, opts_.form, opts_.threads);
    lower_ = cholesky_with_jitter(training_covariance(train_, hp_, gram)).lower;
    const Eigen::VectorXd resid = train_.signed_targets().array() - hp_.mean_const;
    alpha_ = lower_.triangularView<Eigen::Lower>().solve(resid);
    lower_.triangularView<Eigen::Lower>().transpose().solveInPlace(alpha_);
  }
}

void TanimotoGp::check_disjoint(std::span<const std::size_t> indices) const {
  if (train_.pool_indices.empty()) return;
  std::unordered_set<std::size_t> acquired(train_.pool_indices.begin(), train_.pool_indices.end());
  for (auto i : indices)
    if (acquired.count(i)) throw UsageError("posterior: candidate " + std::to_string(i) + " is in the training set");
}

Eigen::MatrixXd TanimotoGp::cross_kernel(const CandidatePool& pool, std::span<const std::size_t> indices) const {
  const auto n_train = static_cast<Eigen::Index>(train_.size());
  Eigen::MatrixXd k(n_train, static_cast<Eigen::Index>(indices.size()));
  parallel_for(indices.size(), opts_.threads, [&](std::size_t c) {
    const auto& fp = pool.fingerprint(indices[c]);
    for (Eigen::Index r = 0; r < n_train; ++r)
      k(r, static_cast<Eigen::Index>(c)) = hp_.output_scale * tanimoto(train_.inputs[static_cast<std::size_t>(r)], fp, opts_.form);
  });
  return k;
}

TanimotoGp::Marginals TanimotoGp::predict_marginals(const CandidatePool& pool,
                                                    std::span<const std::size_t> indices) const {
  check_disjoint(indices);
  const auto n = static_cast<Eigen::Index>(indices.size());
  Marginals out{Eigen::VectorXd::Constant(n, hp_.mean_const), Eigen::VectorXd(n)};
  Eigen::VectorXd prior(n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const auto& fp = pool.fingerprint(indices[static_cast<std::size_t>(c)]);
    prior(c) = hp_.output_scale * tanimoto(fp, fp, opts_.form);
  }
  Eigen::VectorXd var = prior;
  if (train_.size() > 0) {
    Eigen::MatrixXd v = cross_kernel(pool, indices);
    out.mean += v.transpose() * alpha_;
    lower_.triangularView<Eigen::Lower>().solveInPlace(v);
    var -= v.colwise().squaredNorm().transpose();
  }
  if (opts_.predictive_noise) var.array() += hp_.noise;
  out.stddev = var.cwiseMax(0.0).cwiseSqrt();
  return out;
}

GaussianPosterior TanimotoGp::posterior(const CandidatePool& pool, std::span<const std::size_t> subset) const {
  if (subset.empty()) throw UsageError("posterior: empty subset");
  check_disjoint(subset);
  const auto n = static_cast<Eigen::Index>(subset.size());
  Eigen::MatrixXd cov = hp_.output_scale * pairwise_tanimoto(pool, subset, opts_.form, opts_.threads);
  Eigen::VectorXd mean = Eigen::VectorXd::Constant(n, hp_.mean_const);
  if (train_.size() > 0) {
    Eigen::MatrixXd v = cross_kernel(pool, subset);
    mean += v.transpose() * alpha_;
    lower_.triangularView<Eigen::Lower>().solveInPlace(v);
    cov.noalias() -= v.transpose() * v;
  }
  if (opts_.predictive_noise) cov.diagonal().array() += hp_.noise;
  // Restore exact symmetry lost to rounding in the rank update.
  cov = (0.5 * (cov + cov.transpose())).eval();
  return GaussianPosterior(std::move(mean), std::move(cov));
}

GaussianPosterior posterior(const TrainingSet& train, const GpHyperparams& hp, const CandidatePool& pool,
                            std::span<const std::size_t> subset, const SurrogateOptions& opts) {
  return TanimotoGp(train, hp, opts).posterior(pool, subset);
}

}  // namespace qpo
