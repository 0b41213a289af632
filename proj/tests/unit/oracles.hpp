#pragma once

// Independent reference formulas used as test oracles. Nothing here calls
// into the library, so a shared bug cannot make both sides agree.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <boost/math/distributions/normal.hpp>

namespace oracle {

inline double linf(const std::vector<double>& x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

inline double lp(const std::vector<double>& x, double p) {
  double s = 0.0;
  for (double v : x) s += std::pow(std::abs(v), p);
  return std::pow(s, 1.0 / p);
}

/// max(||head||_inf, ||tail||_2) with the last m coordinates in the tail.
inline double cylinder(const std::vector<double>& x, std::size_t m) {
  const std::size_t head = x.size() - m;
  double h = 0.0, t = 0.0;
  for (std::size_t i = 0; i < head; ++i) h = std::max(h, std::abs(x[i]));
  for (std::size_t i = head; i < x.size(); ++i) t += x[i] * x[i];
  return std::max(h, std::sqrt(t));
}

/// E chi_n.
inline double chi_mean(double n) { return std::sqrt(2.0) * std::exp(std::lgamma((n + 1) / 2) - std::lgamma(n / 2)); }

/// Var chi_n = n - (E chi_n)^2.
inline double chi_variance(double n) { return n - chi_mean(n) * chi_mean(n); }

/// Median of max_{i<=n} g_i^2: P{|g| <= s}^n = 1/2.
inline double median_max_square(double n) {
  const boost::math::normal_distribution<> g;
  const double s = boost::math::quantile(g, (1.0 + std::pow(2.0, -1.0 / n)) / 2.0);
  return s * s;
}

/// E max(g1^2, g2^2) = 1 + 2/pi.
inline double cube2_second_moment() { return 1.0 + 2.0 / std::numbers::pi; }

/// Wide-margin check that a Monte Carlo value agrees with a target.
inline bool within_se(double value, double target, double se, double k = 4.0) { return std::abs(value - target) <= k * se; }

/// Test-side randomness, independent from the library sampler.
inline std::vector<double> normals(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> d;
  std::vector<double> x(n);
  for (double& v : x) v = d(rng);
  return x;
}

}  // namespace oracle
