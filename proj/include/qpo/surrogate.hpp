// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "qpo/errors.hpp"
#include "qpo/fingerprints.hpp"
#include "qpo/gaussian.hpp"

namespace qpo {

inline constexpr double kNoiseFloor = 1e-6;

/// Constant-mean Tanimoto GP parameters: k(a, b) = output_scale * tanimoto(a, b),
/// likelihood variance `noise`.
struct GpHyperparams {
  double mean_const = 0.0;
  double output_scale = 1.0;
  double noise = 1e-2;
};

/// Observed data D_t.
///
/// `targets` hold raw objective values; `sign` is +1 to maximize or -1 to
/// minimize, and the model is always fitted to sign * targets so everything
/// downstream maximizes. `pool_indices`, when filled, records where each
/// input came from so posterior queries can reject already-acquired
/// candidates. `extra_noise`, when filled, adds per-observation variance on
/// top of the shared likelihood noise.
struct TrainingSet {
  std::vector<CountFingerprint> inputs;
  Eigen::VectorXd targets;
  int sign = 1;
  std::vector<std::size_t> pool_indices;
  Eigen::VectorXd extra_noise;

  std::size_t size() const noexcept { return inputs.size(); }
  Eigen::VectorXd signed_targets() const { return static_cast<double>(sign) * targets; }

  /// Throws UsageError on length mismatches, a bad sign, or repeated pool indices.
  void validate() const;

  static TrainingSet from_pool(const CandidatePool& pool, std::span<const std::size_t> indices,
                               std::span<const double> values, int sign = 1);
};

struct SurrogateOptions {
  TanimotoForm form = TanimotoForm::min_max;
  /// Adds the fitted likelihood noise to the predictive covariance diagonal.
  /// Off by default: acquisition reasons about the noise-free latent function.
  bool predictive_noise = false;
  int restarts = 8;
  double scale_min = 1e-4;
  double scale_max = 1e2;
  unsigned threads = 1;
};

/// Exact marginal log likelihood of sign * targets. Throws UsageError on an
/// empty set and NumericError when the Gram matrix cannot be factorized.
double mll(const TrainingSet& train, const GpHyperparams& hp, TanimotoForm form = TanimotoForm::min_max);

/// Thrown by fit() when every restart fails; carries the best parameters seen.
class FitError : public NumericError {
 public:
  FitError(const std::string& what, GpHyperparams best) : NumericError(what), best_(best) {}
  const GpHyperparams& best_partial() const noexcept { return best_; }

 private:
  GpHyperparams best_;
};

/// Maximizes the marginal log likelihood.
///
/// The constant mean is profiled out in closed form (then clamped to the data
/// range widened by one range-width on each side). Output scale and noise are
/// searched in log space over [scale_min, scale_max] by coordinate-wise Brent
/// minimization from `restarts` seeded log-uniform starts. Deterministic for a
/// given seed. Requires at least two points.
GpHyperparams fit(const TrainingSet& train, const SurrogateOptions& opts, std::uint64_t seed);

/// Conditioned Tanimoto GP, ready for prediction.
class TanimotoGp {
 public:
  TanimotoGp(TrainingSet train, GpHyperparams hp, SurrogateOptions opts = {});

  const GpHyperparams& hyperparams() const noexcept { return hp_; }
  const TrainingSet& training() const noexcept { return train_; }

  struct Marginals {
    Eigen::VectorXd mean;
    Eigen::VectorXd stddev;
  };

  /// Per-candidate predictive mean and standard deviation (maximization sign).
  Marginals predict_marginals(const CandidatePool& pool, std::span<const std::size_t> indices) const;

  /// Joint predictive Gaussian over `subset`. Throws UsageError if the subset
  /// is empty or overlaps the training pool indices.
  GaussianPosterior posterior(const CandidatePool& pool, std::span<const std::size_t> subset) const;

 private:
  Eigen::MatrixXd cross_kernel(const CandidatePool& pool, std::span<const std::size_t> indices) const;
  void check_disjoint(std::span<const std::size_t> indices) const;

  TrainingSet train_;
  GpHyperparams hp_;
  SurrogateOptions opts_;
  Eigen::MatrixXd lower_;
  Eigen::VectorXd alpha_;
};

/// Convenience wrapper: condition and return the joint posterior over `subset`.
GaussianPosterior posterior(const TrainingSet& train, const GpHyperparams& hp, const CandidatePool& pool,
                            std::span<const std::size_t> subset, const SurrogateOptions& opts = {});

/// Tanimoto Gram matrix of a fingerprint list.
Eigen::MatrixXd tanimoto_gram(std::span<const CountFingerprint> fps, TanimotoForm form, unsigned threads = 1);

}  // namespace qpo
