#pragma once

// Monte Carlo functionals of the standard Gaussian vector G in R^n.
//
// Every estimator takes a SeedSpec and an Execution. Sample streams:
//   split_seed(seed, 0)  main stream (shared by all estimators: common random numbers)
//   split_seed(seed, 1)  pilot stream (independent: E||G|| for the flat/spiky
//                        threshold, the median of the deviation curve)
// p is restricted to [1, 8]; higher moments are not estimable at desk budgets.

#include <cstddef>
#include <span>
#include <vector>

#include "ellpos/bodies.hpp"
#include "ellpos/parallel.hpp"
#include "ellpos/stats.hpp"

namespace ellpos {

inline constexpr double kMaxMomentOrder = 8.0;
inline constexpr std::size_t kMinSamples = 100;

SeedSpec main_stream(const SeedSpec& seed);
SeedSpec pilot_stream(const SeedSpec& seed);

struct NormMoments {
  double p = 1.0;
  McEstimate mean_p;   // E||G||^p
  McEstimate var_p;    // Var(||G||^p), batch-means SE
  double median = 0.0;
  McEstimate mean_1;
  McEstimate mean_2;
};

NormMoments norm_moments(const BodySpec& body, double p, std::size_t n_samples, const SeedSpec& seed,
                         const parallel::Execution& exec = {});

/// p^2 E(||G||^{2p-2} |grad_B(G)|_2^2): the Dirichlet energy of ||.||^p.
McEstimate gradient_energy(const BodySpec& body, double p, std::size_t n_samples, const SeedSpec& seed,
                           const parallel::Execution& exec = {});

struct FlatSpikyStats {
  double flat_energy = 0.0;
  double spiky_energy = 0.0;
  double spiky_prob_per_coord = 0.0;  // max_i P{S_i != 0}
  double threshold = 0.0;             // n^{-exponent} * pilot E||G||
  McEstimate pilot_mean;
};

FlatSpikyStats flat_spiky_stats(const BodySpec& body, double p, std::size_t n_samples, const SeedSpec& seed,
                                double threshold_exponent = 0.125, const parallel::Execution& exec = {});

/// sum_i m2_i / (1 + log(sqrt(m2_i) / m1_i)); zero-m2 coordinates contribute 0.
double talagrand_sum(std::span<const double> first_abs_moments, std::span<const double> second_moments);

/// Talagrand's L1-L2 right-hand side for f = ||.||^p with the constant set to 1.
double talagrand_rhs(const BodySpec& body, double p, std::size_t n_samples, const SeedSpec& seed,
                     const parallel::Execution& exec = {});

struct SuperconcentrationReport {
  double p = 1.0;
  McEstimate variance;         // Var(||G||^p)
  McEstimate gradient_energy;  // p^2 E(||G||^{2p-2} |grad|^2)
  double ratio = 0.0;
  double ratio_se = 0.0;
  double talagrand_rhs = 0.0;
  double flat_energy = 0.0;
  double spiky_energy = 0.0;
  double spiky_prob_per_coord = 0.0;
};

/// All fields come from one pass over the main stream (the flat/spiky
/// threshold from the pilot stream). Throws if the energy is not resolved from 0.
SuperconcentrationReport superconcentration_ratio(const BodySpec& body, double p, std::size_t n_samples,
                                                  const SeedSpec& seed, double threshold_exponent = 0.125,
                                                  const parallel::Execution& exec = {});

struct BalanceResiduals {
  std::vector<double> residuals;   // r_i = n E(||G|| grad_i G_i) / E||G||^2 - 1
  std::vector<double> std_errors;  // batch-means delta method
  McEstimate ell_squared;          // E||G||^2

  /// max_i |r_i| / se_i (coordinates with se = 0 count as 0 when r_i = 0).
  double max_abs_z() const;
  double max_abs_residual() const;
};

BalanceResiduals balance_residuals(const BodySpec& body, std::size_t n_samples, const SeedSpec& seed,
                                   const parallel::Execution& exec = {});

/// k(B) = (E||G|| / Lip)^2 with delta-method SE.
McEstimate dvoretzky_dimension(const BodySpec& body, std::size_t n_samples, const SeedSpec& seed,
                               const parallel::Execution& exec = {});

struct GradientRatioCondition {
  McEstimate lhs;           // E||G||_B
  McEstimate mean_grad;     // E|grad_B(G)|_2
  double rhs = 0.0;         // n^c E|grad|_2
  double combined_se = 0.0;
  bool holds = false;       // lhs <= rhs + 3 combined SE
};

GradientRatioCondition gradient_ratio_condition(const BodySpec& body, double c, std::size_t n_samples,
                                                const SeedSpec& seed, const parallel::Execution& exec = {});

struct DeviationCurve {
  std::size_t n = 0;
  std::vector<double> eps_grid;
  double median = 0.0;
  std::vector<double> probs;  // P{| ||G|| - Med | >= eps Med}
  std::vector<std::size_t> counts;
  std::vector<double> wilson_low;
  std::vector<double> wilson_high;
  std::size_t n_samples = 0;
  std::size_t median_samples = 0;
  SeedSpec seed;
};

/// Median from the pilot stream, counts from the main stream.
/// median_samples = 0 uses n_samples.
DeviationCurve deviation_curve(const BodySpec& body, std::span<const double> eps_grid, std::size_t n_samples,
                               const SeedSpec& seed, std::size_t median_samples = 0,
                               const parallel::Execution& exec = {});

struct L1GradientCheck {
  double lhs = 0.0;         // E|grad_B(G)|_1^p
  double rhs = 0.0;         // (pi/2)^{p/2} E||G||^p
  double raw_margin = 0.0;  // rhs - lhs
  double std_error = 0.0;   // SE of rhs - lhs
  double margin = 0.0;      // raw_margin + 3 SE
  bool holds = false;       // margin >= 0
};

L1GradientCheck l1_gradient_check(const BodySpec& body, double p, std::size_t n_samples, const SeedSpec& seed,
                                  const parallel::Execution& exec = {});

}  // namespace ellpos
