#ifndef PDTW_STATS_HPP
#define PDTW_STATS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "pdtw/common.hpp"

namespace pdtw::stats {

// CDF values are clamped into [eps, 1-eps] so that downstream log-likelihood
// sums stay finite. Perturbs any single log term by at most |log eps|.
inline constexpr double kCdfClampEpsilon = 1e-12;

struct NormalParams {
  double mu = 0.0;
  double sigma = 0.0;  // population standard deviation, > 0 after a valid fit
};

struct Gmm2Params {
  // Components sorted by mean ascending. Weights sum to 1.
  double weight[2] = {0.0, 0.0};
  double mean[2] = {0.0, 0.0};
  double variance[2] = {0.0, 0.0};
  bool converged = false;
  int iterations = 0;
  std::vector<double> loglik_trace;  // one entry per EM iteration
};

// Mean and population standard deviation (divide by n).
// Throws DegenerateSample for < 2 values or all-identical values.
NormalParams fit_normal(std::span<const double> samples);

// P(Z <= x) for Z ~ Normal(mu, sigma^2), clamped to [eps, 1-eps].
double normal_cdf(double x, const NormalParams& params,
                  double clamp_eps = kCdfClampEpsilon);

// Unclamped CDF, exposed for accuracy and property tests.
double normal_cdf_raw(double x, const NormalParams& params);

// 1 - u.v / (|u||v|), accumulated in 64-bit regardless of the element type.
// Norms are floored at 1e-12, so a zero vector is treated as orthogonal to
// everything (distance 1).
template <typename T>
double cosine_distance(std::span<const T> u, std::span<const T> v) {
  if (u.size() != v.size()) {
    throw LengthMismatch("cosine_distance: vector lengths differ");
  }
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double a = u[i], b = v[i];
    dot += a * b;
    nu += a * a;
    nv += b * b;
  }
  const double denom =
      std::max(std::sqrt(nu), 1e-12) * std::max(std::sqrt(nv), 1e-12);
  return 1.0 - dot / denom;
}

// Indexed view over equal-length vectors (segment embeddings, corpus frames).
template <typename T>
struct VectorCollectionT {
  std::size_t count = 0;
  std::size_t dim = 0;
  std::function<std::span<const T>(std::size_t)> row;
};
using VectorCollectionF = VectorCollectionT<float>;
using VectorCollectionD = VectorCollectionT<double>;

// Fits a normal distribution to cosine distances of n_samples random index
// pairs. The pair list is generated serially from std::mt19937_64(rng_seed):
// i ~ uniform_int[0, count-1], then j is redrawn from the same distribution
// until j != i. Distance evaluation over the fixed pair list may run in
// parallel; the result is thread-count invariant.
NormalParams sample_distance_distribution(const VectorCollectionF& vectors,
                                          std::size_t n_samples,
                                          std::uint64_t rng_seed,
                                          int threads = 0);
NormalParams sample_distance_distribution(const VectorCollectionD& vectors,
                                          std::size_t n_samples,
                                          std::uint64_t rng_seed,
                                          int threads = 0);

// Two-component univariate GMM via EM. Means start at the 25th/75th sample
// percentiles, weights at 1/2, variances at the sample variance; rng_seed is
// touched only if the two percentiles coincide (jitter of 1e-3 sample std).
// Runs until the log-likelihood gain drops below tol or max_iters; hitting
// max_iters is not an error (converged flag stays false).
Gmm2Params fit_gmm2(std::span<const double> samples, int max_iters = 200,
                    double tol = 1e-6, std::uint64_t rng_seed = 0);

}  // namespace pdtw::stats

#endif  // PDTW_STATS_HPP
