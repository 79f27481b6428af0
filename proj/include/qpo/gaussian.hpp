// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <mutex>

#include <Eigen/Dense>

namespace qpo {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Lower Cholesky factor of `covariance + jitter * I`.
struct CholeskyFactor {
  Eigen::MatrixXd lower;
  double jitter = 0.0;
};

/// Factorizes a symmetric matrix, escalating diagonal jitter by decades from
/// 1e-10 to 1e-4 times the mean diagonal when the plain factorization fails.
/// Throws NumericError (reporting the most negative pivot) if the matrix is
/// still indefinite at the largest jitter, UsageError on non-finite or
/// non-square input.
CholeskyFactor cholesky_with_jitter(const Eigen::MatrixXd& cov);

/// Joint Gaussian over a candidate subset.
///
/// Immutable; the factorization is computed on first use and shared between
/// copies, so posteriors may be read from several threads.
class GaussianPosterior {
 public:
  /// Throws UsageError on size mismatch, non-finite entries, or asymmetry
  /// beyond 1e-10 relative to the largest entry.
  GaussianPosterior(Eigen::VectorXd mean, Eigen::MatrixXd covariance);

  Eigen::Index size() const noexcept { return mean_.size(); }
  const Eigen::VectorXd& mean() const noexcept { return mean_; }
  const Eigen::MatrixXd& covariance() const noexcept { return cov_; }

  /// Marginal standard deviations (negative variances clamp to zero).
  Eigen::VectorXd stddev() const;

  const CholeskyFactor& factor() const;
  double jitter_used() const { return factor().jitter; }

 private:
  struct Cache {
    std::once_flag once;
    CholeskyFactor factor;
  };
  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;
  std::shared_ptr<Cache> cache_;
};

/// Provenance of a block of Monte Carlo draws: row m was drawn from stream
/// (seed, first_stream + m).
struct SeedLineage {
  std::uint64_t seed = 0;
  std::uint64_t first_stream = 0;
  std::uint64_t count = 0;
};

/// M x n matrix of joint draws; row m is one sample over all n candidates.
class SampleMatrix {
 public:
  /// Throws UsageError when empty or when any entry is not finite.
  explicit SampleMatrix(RowMatrix values, SeedLineage lineage = {});

  Eigen::Index samples() const noexcept { return values_.rows(); }
  Eigen::Index candidates() const noexcept { return values_.cols(); }
  const RowMatrix& values() const noexcept { return values_; }
  const SeedLineage& lineage() const noexcept { return lineage_; }

 private:
  RowMatrix values_;
  SeedLineage lineage_;
};

/// Draws `count` joint samples mean + L * eps. Each sample uses its own
/// counter-keyed stream, and samples are assembled in fixed-size chunks, so
/// the result is bit-identical for any thread count. `first_stream` offsets
/// the stream counter, letting callers extend a previous draw.
SampleMatrix sample_joint(const GaussianPosterior& post, std::int64_t count, std::uint64_t seed,
                          unsigned threads = 1, std::uint64_t first_stream = 0);

/// Unbiased empirical mean and covariance (divisor M - 1). Throws UsageError
/// when fewer than two samples are given.
GaussianPosterior fit_gaussian(const SampleMatrix& samples);

/// Standard normal CDF and density.
double normal_cdf(double x);
double normal_pdf(double x);

/// Exact probability that candidate `i` attains the maximum of the posterior,
/// for n = 2 (closed form) and n = 3 (orthant probability of the pairwise
/// differences, integrated adaptively to 1e-6 absolute error or better).
/// Degenerate difference variances reduce to indicators with ties counted as
/// one half. Throws UsageError for other sizes.
double prob_max_analytic(const GaussianPosterior& post, Eigen::Index i);

}  // namespace qpo
