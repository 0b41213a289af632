#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "ellpos/bodies.hpp"
#include "ellpos/estimators.hpp"

namespace ellpos {

struct EllSolveOptions {
  double step = 0.5;
  std::size_t max_iters = 200;
  /// Sample budget per iteration; the last entry repeats. Must be nondecreasing.
  std::vector<std::size_t> samples_schedule{20000, 50000, 100000};
  SeedSpec seed;
  /// Stop when max_i |r_i| / se_i <= z_tolerance.
  double z_tolerance = 3.0;
  /// Iterations run after the stop rule fires; their geometric mean is returned.
  std::size_t averaging_iters = 32;
  /// Permutation-invariant bodies: return the uniform diagonal, estimate only the scale.
  bool exploit_symmetry = false;
  parallel::Execution exec;
};

struct EllIteration {
  std::size_t samples = 0;
  double max_abs_residual = 0.0;
  double max_abs_z = 0.0;
  double ell_value = 0.0;        // E||G||^2 of the iterate before renormalization
  double log_det = 0.0;          // sum log d_i after renormalization
  double log_det_se = 0.0;
};

enum class EllCertificate { Statistical, Symmetry };

struct EllPositionResult {
  std::vector<double> diag;
  std::vector<double> residuals;
  std::vector<double> residual_se;
  std::size_t iterations = 0;
  bool converged = false;
  double ell_value = 0.0;  // E||G||^2 of the returned body on a fresh stream
  double ell_value_se = 0.0;
  SeedSpec seed;
  EllCertificate certificate = EllCertificate::Statistical;
  std::vector<EllIteration> trace;
  std::string diagnostics;

  BodySpec body(const BodySpec& original) const { return original.with_diag(diag); }
};

/// Damped multiplicative fixed-point iteration on the diagonal scaling,
/// d_i <- d_i * clip(1 + r_i, 1/4, 4)^{step/2}, driven by the balance residuals.
EllPositionResult solve_ell_position(const BodySpec& body, const EllSolveOptions& opts);

/// Scales diag so that the estimated E||G||^2 equals 1.
BodySpec ell_norm_normalize(const BodySpec& body, std::size_t n_samples, const SeedSpec& seed,
                            const parallel::Execution& exec = {});

struct JohnCylinderCheck {
  bool contains_ball = false;
  bool contact_points_ok = false;
};

/// ||e_i|| = 1 for all i, and ||u|| <= 1 + 1e-12 on 10^3 random unit vectors and ±e_i.
JohnCylinderCheck verify_john_cylinder(const BodySpec& body, const SeedSpec& seed = {});

nlohmann::ordered_json to_json(const EllPositionResult& result);

}  // namespace ellpos
