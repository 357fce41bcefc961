#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bpre/rng.hpp"

namespace bpre {

struct RngProvenance {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

// Universal result carrier: point value, confidence interval, sample size,
// and the RNG identity that produced it.
struct Estimate {
  double value = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::uint64_t n = 0;
  std::string method;
  RngProvenance rng;

  bool contains(double x) const { return ci_low <= x && x <= ci_high; }
  double half_width() const { return 0.5 * (ci_high - ci_low); }
};

// Inverse standard normal CDF (Acklam's rational approximation, |err| < 1e-9).
double normal_quantile(double p);

// Wilson score interval for a binomial proportion.
Estimate wilson_interval(std::uint64_t successes, std::uint64_t trials,
                         double level);

// Mean/variance accumulator that merges exactly, so a partition of the data
// over streams reduces to the same result in any merge order up to float
// reassociation. Pairwise-tree merging is provided by merge_accumulators.
struct MeanAcc {
  std::uint64_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  void merge(const MeanAcc& o);
  double variance() const {
    return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0;
  }
  double stderr_mean() const;
};

MeanAcc merge_accumulators(std::span<const MeanAcc> parts);

// Normal-theory CI around a sample mean.
Estimate mean_estimate(const MeanAcc& acc, double level);

// Weighted accumulator keeping (sum w, sum wY, sum wY^2) for self-normalized
// averages; merges are exact sums.
struct WeightedAcc {
  std::uint64_t n = 0;  // raw draws, including zero-weight ones
  double w = 0.0;
  double wy = 0.0;
  double wy2 = 0.0;
  double w2 = 0.0;

  void add(double weight, double y) {
    ++n;
    w += weight;
    wy += weight * y;
    wy2 += weight * y * y;
    w2 += weight * weight;
  }
  void merge(const WeightedAcc& o) {
    n += o.n;
    w += o.w;
    wy += o.wy;
    wy2 += o.wy2;
    w2 += o.w2;
  }
  double effective_n() const { return w2 > 0.0 ? w * w / w2 : 0.0; }
  double mean() const { return wy / w; }
};

// Self-normalized mean with a linearization CI; throws DegenerateSample when
// the total weight is zero.
Estimate weighted_mean_estimate(const WeightedAcc& acc, double level);

// Two-sample Kolmogorov-Smirnov on weighted empirical CDFs. Empty weight
// spans mean unit weights. Effective sample sizes are (sum w)^2 / sum w^2.
struct KsResult {
  double statistic = 0.0;
  double threshold = 0.0;  // rejection bound at the requested alpha
  double p_value = 0.0;    // asymptotic, conservative for discrete data
  double n_eff_a = 0.0;
  double n_eff_b = 0.0;
  bool pass() const { return statistic < threshold; }
};

KsResult ks_two_sample(std::span<const double> a,
                       std::span<const double> wa,
                       std::span<const double> b,
                       std::span<const double> wb, double alpha);

inline KsResult ks_two_sample(std::span<const double> a,
                              std::span<const double> b, double alpha) {
  return ks_two_sample(a, {}, b, {}, alpha);
}

// Least-squares slope of log y against log n.
struct SlopeFit {
  double slope = 0.0;
  double stderr_slope = 0.0;
};
SlopeFit loglog_slope(std::span<const double> n, std::span<const double> y);

// CI for mean(num)/mean(den) over paired samples, delta method with the
// covariance term.
Estimate ratio_estimate(std::span<const double> num,
                        std::span<const double> den, double level);

// Percentile bootstrap for the same ratio (resamples pairs).
Estimate bootstrap_ratio_estimate(std::span<const double> num,
                                  std::span<const double> den, double level,
                                  std::size_t resamples, Rng& rng);

double median(std::vector<double> values);  // by copy; sorts internally
double quantile(std::vector<double> values, double q);

// Pearson correlation.
double correlation(std::span<const double> x, std::span<const double> y);

}  // namespace bpre
