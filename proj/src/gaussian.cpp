// SPDX-License-Identifier: Apache-2.0
#include "qpo/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "qpo/errors.hpp"
#include "qpo/parallel.hpp"
#include "qpo/rng.hpp"

namespace qpo {

namespace {

constexpr Eigen::Index kSampleChunk = 256;

// Unblocked Cholesky used only to locate the failing pivot for diagnostics.
double most_negative_pivot(const Eigen::MatrixXd& a) {
  const auto n = a.rows();
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  double worst = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = a(j, j) - l.row(j).head(j).squaredNorm();
    worst = std::min(worst, d);
    if (d <= 0.0) return d;
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i)
      l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / ljj;
  }
  return worst;
}

double indicator(double m) { return m > 0.0 ? 1.0 : (m == 0.0 ? 0.5 : 0.0); }

// P(z1 > 0, z2 > 0) for a bivariate normal with means m1, m2, variances v1,
// v2 and covariance c12. Variances at or below `tol` are treated as point
// masses.
double orthant2(double m1, double v1, double m2, double v2, double c12, double tol) {
  const bool d1 = v1 <= tol;
  const bool d2 = v2 <= tol;
  if (d1 && d2) return indicator(m1) * indicator(m2);
  if (d1) return indicator(m1) * normal_cdf(m2 / std::sqrt(v2));
  if (d2) return indicator(m2) * normal_cdf(m1 / std::sqrt(v1));

  const double s1 = std::sqrt(v1);
  const double s2 = std::sqrt(v2);
  const double rho = std::clamp(c12 / (s1 * s2), -1.0, 1.0);
  const double a = -m1 / s1;
  const double b = -m2 / s2;
  const double resid = 1.0 - rho * rho;
  if (resid <= 1e-12) {
    // z2 is an affine function of z1.
    if (rho > 0.0) return normal_cdf(-std::max(a, b));
    return std::max(0.0, normal_cdf(-b) - normal_cdf(a));
  }

  // Integrate over the standardized first coordinate u; the second
  // coordinate is Gaussian conditional on u.
  const double cond_sd = s2 * std::sqrt(resid);
  auto integrand = [&](double u) { return normal_pdf(u) * normal_cdf((m2 + rho * s2 * u) / cond_sd); };
  constexpr double kTail = 10.0;
  const double lo = std::max(a, -kTail);
  const double hi = std::max(lo, kTail);
  if (lo >= hi) return 0.0;
  double err = 0.0;
  const double value =
      boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, lo, hi, 20, 1e-12, &err);
  return std::clamp(value, 0.0, 1.0);
}

}  // namespace

CholeskyFactor cholesky_with_jitter(const Eigen::MatrixXd& cov) {
  if (cov.rows() != cov.cols()) throw UsageError("cholesky: matrix is not square");
  if (!cov.allFinite()) throw UsageError("cholesky: matrix has non-finite entries");
  const auto n = cov.rows();
  if (n == 0) return {};

  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) return {llt.matrixL(), 0.0};

  const double mean_diag = cov.trace() / static_cast<double>(n);
  const double scale = mean_diag > 0.0 ? mean_diag : 1.0;
  Eigen::MatrixXd shifted = cov;
  double jitter = 0.0;
  for (int exponent = -10; exponent <= -4; ++exponent) {
    jitter = std::pow(10.0, exponent) * scale;
    shifted.diagonal() = cov.diagonal().array() + jitter;
    llt.compute(shifted);
    if (llt.info() == Eigen::Success) return {llt.matrixL(), jitter};
  }
  std::ostringstream msg;
  msg << "cholesky: matrix indefinite after jitter " << jitter << "; most negative pivot "
      << most_negative_pivot(shifted);
  throw NumericError(msg.str());
}

GaussianPosterior::GaussianPosterior(Eigen::VectorXd mean, Eigen::MatrixXd covariance)
    : mean_(std::move(mean)), cov_(std::move(covariance)), cache_(std::make_shared<Cache>()) {
  if (cov_.rows() != cov_.cols() || cov_.rows() != mean_.size())
    throw UsageError("gaussian: mean and covariance sizes disagree");
  if (!mean_.allFinite() || !cov_.allFinite()) throw UsageError("gaussian: non-finite mean or covariance");
  if (cov_.size() > 0) {
    const double scale = std::max(cov_.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    const double asym = (cov_ - cov_.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-10 * scale) throw UsageError("gaussian: covariance is not symmetric");
    cov_ = (0.5 * (cov_ + cov_.transpose())).eval();
  }
}

Eigen::VectorXd GaussianPosterior::stddev() const {
  return cov_.diagonal().cwiseMax(0.0).cwiseSqrt();
}

const CholeskyFactor& GaussianPosterior::factor() const {
  std::call_once(cache_->once, [this] { cache_->factor = cholesky_with_jitter(cov_); });
  return cache_->factor;
}

SampleMatrix::SampleMatrix(RowMatrix values, SeedLineage lineage)
    : values_(std::move(values)), lineage_(lineage) {
  if (values_.rows() < 1 || values_.cols() < 1) throw UsageError("sample matrix must be non-empty");
  if (!values_.allFinite()) throw UsageError("sample matrix has non-finite entries");
}

SampleMatrix sample_joint(const GaussianPosterior& post, std::int64_t count, std::uint64_t seed, unsigned threads,
                          std::uint64_t first_stream) {
  if (count < 1) throw UsageError("sample_joint: sample count must be positive");
  const auto n = post.size();
  if (n < 1) throw UsageError("sample_joint: empty posterior");
  const auto& lower = post.factor().lower;
  const auto& mean = post.mean();

  RowMatrix values(count, n);
  const auto chunks = static_cast<std::size_t>((count + kSampleChunk - 1) / kSampleChunk);
  parallel_for(chunks, threads, [&](std::size_t c) {
    const Eigen::Index begin = static_cast<Eigen::Index>(c) * kSampleChunk;
    const Eigen::Index width = std::min<Eigen::Index>(kSampleChunk, count - begin);
    Eigen::MatrixXd eps(n, width);
    for (Eigen::Index k = 0; k < width; ++k) {
      StreamRng rng(seed, first_stream + static_cast<std::uint64_t>(begin + k));
      std::normal_distribution<double> normal;
      for (Eigen::Index i = 0; i < n; ++i) eps(i, k) = normal(rng);
    }
    Eigen::MatrixXd draws = lower.triangularView<Eigen::Lower>() * eps;
    draws.colwise() += mean;
    values.middleRows(begin, width) = draws.transpose();
  });
  return SampleMatrix(std::move(values), {seed, first_stream, static_cast<std::uint64_t>(count)});
}

GaussianPosterior fit_gaussian(const SampleMatrix& samples) {
  const auto m = samples.samples();
  if (m < 2) throw UsageError("fit_gaussian: need at least two samples");
  const auto& y = samples.values();
  Eigen::VectorXd mean = y.colwise().mean().transpose();
  const Eigen::MatrixXd centered = y.rowwise() - mean.transpose();
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(m - 1);
  return GaussianPosterior(std::move(mean), std::move(cov));
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_pdf(double x) {
  constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;
  return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

double prob_max_analytic(const GaussianPosterior& post, Eigen::Index i) {
  const auto n = post.size();
  if (n != 2 && n != 3) throw UsageError("prob_max_analytic: only n = 2 or n = 3 is supported");
  if (i < 0 || i >= n) throw UsageError("prob_max_analytic: index out of range");
  const auto& mu = post.mean();
  const auto& s = post.covariance();
  const double tol = 1e-12 * std::max(s.diagonal().cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());

  // Differences z_j = y_i - y_j for j != i.
  Eigen::Index others[2];
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < n; ++j)
    if (j != i) others[k++] = j;

  auto diff_mean = [&](Eigen::Index j) { return mu(i) - mu(j); };
  auto diff_cov = [&](Eigen::Index j, Eigen::Index l) { return s(i, i) - s(i, l) - s(j, i) + s(j, l); };

  if (n == 2) {
    const auto j = others[0];
    const double v = diff_cov(j, j);
    if (v <= tol) return indicator(diff_mean(j));
    return normal_cdf(diff_mean(j) / std::sqrt(v));
  }
  const auto j = others[0];
  const auto l = others[1];
  return orthant2(diff_mean(j), diff_cov(j, j), diff_mean(l), diff_cov(l, l), diff_cov(j, l), tol);
}

}  // namespace qpo
