#include "pdtw/stats.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace pdtw::stats {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244008443621048490;

bool has_two_distinct(std::span<const double> samples) {
  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (samples[i] != samples[0]) return true;
  }
  return false;
}

// Linear-interpolated percentile over a sorted sample, q in [0, 1].
double percentile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double log_normal_pdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (d * d / var + std::log(2.0 * M_PI * var));
}

}  // namespace

NormalParams fit_normal(std::span<const double> samples) {
  if (samples.size() < 2 || !has_two_distinct(samples)) {
    throw DegenerateSample("fit_normal: need at least 2 distinct values");
  }
  const double n = static_cast<double>(samples.size());
  double sum = 0.0;
  for (double v : samples) sum += v;
  const double mu = sum / n;
  double ss = 0.0;
  for (double v : samples) {
    const double d = v - mu;
    ss += d * d;
  }
  const double sigma = std::sqrt(ss / n);
  if (!(sigma > 0.0)) {
    throw DegenerateSample("fit_normal: zero variance");
  }
  return {mu, sigma};
}

double normal_cdf_raw(double x, const NormalParams& params) {
  const double z = (x - params.mu) / params.sigma;
  return 0.5 * std::erfc(-z * kInvSqrt2);
}

double normal_cdf(double x, const NormalParams& params, double clamp_eps) {
  const double p = normal_cdf_raw(x, params);
  return std::clamp(p, clamp_eps, 1.0 - clamp_eps);
}

namespace {

template <typename T>
NormalParams sample_distance_impl(const VectorCollectionT<T>& vectors,
                                  std::size_t n_samples,
                                  std::uint64_t rng_seed, int threads) {
  if (vectors.count < 2) {
    throw DegenerateSample(
        "sample_distance_distribution: need at least 2 vectors");
  }
  // Serial pair generation keeps the sample independent of the thread count.
  std::mt19937_64 rng(rng_seed);
  std::uniform_int_distribution<std::uint64_t> pick(0, vectors.count - 1);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs(n_samples);
  for (auto& pr : pairs) {
    const std::uint64_t i = pick(rng);
    std::uint64_t j = pick(rng);
    while (j == i) j = pick(rng);
    pr = {static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)};
  }

  std::vector<double> dists(n_samples);
  const std::int64_t n = static_cast<std::int64_t>(n_samples);
#pragma omp parallel for schedule(static) num_threads(threads > 0 ? threads : omp_get_max_threads())
  for (std::int64_t s = 0; s < n; ++s) {
    dists[s] = cosine_distance(vectors.row(pairs[s].first),
                               vectors.row(pairs[s].second));
  }
  return fit_normal(dists);
}

}  // namespace

NormalParams sample_distance_distribution(const VectorCollectionF& vectors,
                                          std::size_t n_samples,
                                          std::uint64_t rng_seed, int threads) {
  return sample_distance_impl(vectors, n_samples, rng_seed, threads);
}

NormalParams sample_distance_distribution(const VectorCollectionD& vectors,
                                          std::size_t n_samples,
                                          std::uint64_t rng_seed, int threads) {
  return sample_distance_impl(vectors, n_samples, rng_seed, threads);
}

Gmm2Params fit_gmm2(std::span<const double> samples, int max_iters, double tol,
                    std::uint64_t rng_seed) {
  if (samples.size() < 10 || !has_two_distinct(samples)) {
    throw DegenerateSample("fit_gmm2: need at least 10 samples with 2 distinct values");
  }
  const std::size_t n = samples.size();
  const double dn = static_cast<double>(n);

  double sum = 0.0;
  for (double v : samples) sum += v;
  const double sample_mean = sum / dn;
  double ss = 0.0;
  for (double v : samples) {
    const double d = v - sample_mean;
    ss += d * d;
  }
  const double sample_var = ss / dn;

  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  double m0 = percentile_sorted(sorted, 0.25);
  double m1 = percentile_sorted(sorted, 0.75);
  if (m0 == m1) {
    std::mt19937_64 rng(rng_seed);
    std::normal_distribution<double> jitter(0.0, 1e-3 * std::sqrt(sample_var));
    while (m0 == m1) {
      m0 = percentile_sorted(sorted, 0.25) + jitter(rng);
      m1 = percentile_sorted(sorted, 0.75) + jitter(rng);
    }
  }

  Gmm2Params p;
  p.weight[0] = p.weight[1] = 0.5;
  p.mean[0] = m0;
  p.mean[1] = m1;
  p.variance[0] = p.variance[1] = sample_var;

  const double var_floor = 1e-12 * sample_var;
  std::vector<double> resp(n);  // responsibility of component 0
  double prev_ll = -std::numeric_limits<double>::infinity();

  for (int iter = 0; iter < max_iters; ++iter) {
    // E-step in the log domain.
    double ll = 0.0;
    const double lw0 = std::log(p.weight[0]), lw1 = std::log(p.weight[1]);
    for (std::size_t t = 0; t < n; ++t) {
      const double a = lw0 + log_normal_pdf(samples[t], p.mean[0], p.variance[0]);
      const double b = lw1 + log_normal_pdf(samples[t], p.mean[1], p.variance[1]);
      const double m = std::max(a, b);
      const double lse = m + std::log(std::exp(a - m) + std::exp(b - m));
      resp[t] = std::exp(a - lse);
      ll += lse;
    }
    p.loglik_trace.push_back(ll);
    p.iterations = iter + 1;

    if (iter > 0 && ll + 1e-9 * (1.0 + std::abs(prev_ll)) < prev_ll) {
      // EM guarantees monotone log-likelihood; anything beyond fp noise is a bug.
      throw std::logic_error("fit_gmm2: log-likelihood decreased");
    }
    if (iter > 0 && ll - prev_ll < tol) {
      p.converged = true;
      prev_ll = ll;
      break;
    }
    prev_ll = ll;

    // M-step.
    double r0 = 0.0, s0 = 0.0, s1 = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      r0 += resp[t];
      s0 += resp[t] * samples[t];
      s1 += (1.0 - resp[t]) * samples[t];
    }
    const double r1 = dn - r0;
    p.weight[0] = r0 / dn;
    p.weight[1] = r1 / dn;
    p.mean[0] = s0 / r0;
    p.mean[1] = s1 / r1;
    double v0 = 0.0, v1 = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double d0 = samples[t] - p.mean[0];
      const double d1 = samples[t] - p.mean[1];
      v0 += resp[t] * d0 * d0;
      v1 += (1.0 - resp[t]) * d1 * d1;
    }
    p.variance[0] = std::max(v0 / r0, var_floor);
    p.variance[1] = std::max(v1 / r1, var_floor);
  }

  if (p.mean[0] > p.mean[1]) {
    std::swap(p.mean[0], p.mean[1]);
    std::swap(p.weight[0], p.weight[1]);
    std::swap(p.variance[0], p.variance[1]);
  }
  return p;
}

}  // namespace pdtw::stats
