#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ellpos/parallel.hpp"
#include "ellpos/sampler.hpp"

namespace ellpos {

enum class Family { Cube, LpBall, WeightedLp, CylinderJohn };

std::string family_name(Family f);
Family family_from_name(const std::string& name);

/// A 1-unconditional origin-symmetric convex body, represented by its gauge.
///
/// The stored norm is ||x|| = ||D^{-1} x||_family with D = diag(diag()).
/// Instances are immutable; every oracle call is pure and thread safe.
class BodySpec {
 public:
  static BodySpec cube(std::size_t n);
  static BodySpec lp_ball(std::size_t n, double p);
  static BodySpec euclidean(std::size_t n) { return lp_ball(n, 2.0); }
  static BodySpec weighted_lp(std::size_t n, double p, std::vector<double> weights);
  /// B' ∩ B'': unit cube on the first n-m coordinates, unit Euclidean ball on the last m.
  static BodySpec cylinder_john(std::size_t n, std::size_t m);

  Family family() const { return family_; }
  std::size_t dim() const { return inv_scale_.size(); }
  double p() const { return p_; }
  std::size_t m() const { return m_; }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& diag() const { return diag_; }

  /// Per-coordinate factor a_i such that the family norm is applied to (a_i x_i).
  /// Folds the diagonal scaling and (for WeightedLp) the weights into one vector.
  std::span<const double> inv_scale() const { return inv_scale_; }

  /// Returns a body with diag replaced (not composed).
  BodySpec with_diag(std::vector<double> diag) const;

  /// True when the norm is invariant under coordinate permutations.
  bool permutation_invariant() const;

  bool operator==(const BodySpec&) const = default;

 private:
  BodySpec(Family family, std::size_t n, double p, std::size_t m, std::vector<double> weights,
           std::vector<double> diag);
  void rebuild_scale();

  Family family_ = Family::Cube;
  double p_ = 0.0;
  std::size_t m_ = 0;
  std::vector<double> weights_;
  std::vector<double> diag_;
  std::vector<double> inv_scale_;
};

struct NormEvaluation {
  double value = 0.0;
  std::vector<double> gradient;
};

/// Minkowski functional of the body at x.
double norm(const BodySpec& body, std::span<const double> x);

/// Value and a subgradient. At non-smooth points the lowest-index maximal
/// coordinate is selected (cube ties, cylinder head/tail ties go to the head).
NormEvaluation gradient(const BodySpec& body, std::span<const double> x);

/// Allocation-free kernel used by the estimators. `grad` must have length dim.
/// Returns the norm value; x is assumed finite and of the right size.
double evaluate(const BodySpec& body, std::span<const double> x, std::span<double> grad);
double evaluate_value(const BodySpec& body, std::span<const double> x);

/// max of ||u||_B over the Euclidean unit sphere (closed form for every family).
double lipschitz_constant(const BodySpec& body);

/// Lower bound on the Lipschitz constant from projected-gradient multi-start ascent.
double lipschitz_multistart(const BodySpec& body, std::size_t starts, const SeedSpec& seed);

/// Composes the scaling: the new norm at x equals the old norm at x / d.
BodySpec apply_diagonal(const BodySpec& body, std::span<const double> d);

struct CylinderOptions {
  std::size_t trials = 20000;
  std::size_t n_floor = 64;
};

/// Builds the John-position cylinder body with m = floor(Med max_i g_i^2).
BodySpec make_cylinder_john_body(std::size_t n, const SeedSpec& seed, CylinderOptions opts = {},
                                 const parallel::Execution& exec = {});

/// Median of max_{i<=n} g_i^2 over `trials` samples (the quantity behind m).
double median_max_gaussian_square(std::size_t n, std::size_t trials, const SeedSpec& seed,
                                  const parallel::Execution& exec = {});

nlohmann::ordered_json to_json(const BodySpec& body);
BodySpec body_from_json(const nlohmann::json& j);

/// FNV-1a over the compact JSON form, rendered as 16 hex digits.
std::string body_hash(const BodySpec& body);

}  // namespace ellpos
