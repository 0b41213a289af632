#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ellpos/sampler.hpp"

namespace ellpos {

/// Monte Carlo statistic with provenance.
struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t n_samples = 0;
  SeedSpec seed;
};

/// Streaming mean/variance (Welford), mergeable with Chan's update.
struct Moments {
  double count = 0.0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    count += 1.0;
    const double delta = x - mean;
    mean += delta / count;
    m2 += delta * (x - mean);
  }
  double variance() const { return count > 1.0 ? m2 / (count - 1.0) : 0.0; }
  static Moments merge(const Moments& a, const Moments& b);
};

/// mean with std_error = sample sd / sqrt(n).
McEstimate to_estimate(const Moments& m, const SeedSpec& seed);

/// Batch-means standard error: sd of the per-batch values / sqrt(#batches).
double batch_means_se(std::span<const double> per_batch);

/// Order-statistic median; midpoint of the two central values for even counts.
double sample_median(std::vector<double> values);

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

/// Wilson score interval for a binomial proportion.
Interval wilson_interval(std::size_t successes, std::size_t trials, double z = 1.959963984540054);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

LinearFit least_squares(std::span<const double> x, std::span<const double> y);

}  // namespace ellpos
