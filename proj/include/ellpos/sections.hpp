#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ellpos/bodies.hpp"
#include "ellpos/parallel.hpp"
#include "ellpos/sampler.hpp"
#include "ellpos/stats.hpp"

namespace ellpos {

/// value ||Q u||_B and gradient Q^T grad_B(Q u).
NormEvaluation section_norm(const BodySpec& body, const SubspaceBasis& basis, std::span<const double> u);

struct NetMethod {
  double resolution = 0.0;  // 0: default (1e-3 for k=2, 1e-2 for k=3)
};

struct MultiStartMethod {
  std::size_t starts = 64;
  std::size_t max_iters = 500;
};

struct SphericityMethod {
  enum class Kind { Net, MultiStart } kind = Kind::Net;
  NetMethod net;
  MultiStartMethod multi;

  static SphericityMethod net_default() { return {}; }
  static SphericityMethod multistart(std::size_t starts = 64) {
    SphericityMethod m;
    m.kind = Kind::MultiStart;
    m.multi.starts = starts;
    return m;
  }
};

struct SphericityReport {
  std::size_t n = 0;
  std::size_t k = 0;
  double r_min = 0.0;       // Net: certified lower bound on the min; MultiStart: best min found
  double r_max = 0.0;       // Net: certified upper bound on the max; MultiStart: best max found
  double ratio = 0.0;       // r_max / r_min
  double ratio_lower = 0.0; // ratio of the observed extrema: a lower bound on the true ratio
  SphericityMethod method;
  double resolution = 0.0;  // covering radius (chord) of the net
  double lipschitz = 0.0;   // Lipschitz constant used in the certificate
  bool certified = false;
  SeedSpec seed;
};

/// Net: k <= 3, certified. MultiStart: any k, lower bound on the ratio.
SphericityReport sphericity_ratio(const BodySpec& body, const SubspaceBasis& basis, const SphericityMethod& method,
                                  const SeedSpec& seed, const parallel::Execution& exec = {});

std::string sphericity_csv_header();
std::string sphericity_csv_row(const SphericityReport& report);

/// Closed-form lower bound on the Banach-Mazur distance from
/// B_2^2 ∩ {x1^2/a^2 + x2^2/b^2 <= 1} to the disk, 0 < a < 1 < b.
double ellipse_intersection_distance(double a, double b);

/// Upper bound on the same distance: minimum over diagonal maps of the
/// circumradius/inradius ratio, on a `grid`-point log grid in beta/kappa.
double bm_distance_2d_bruteforce(double a, double b, std::size_t grid);

/// Same search for the disk cut by an axis-aligned ellipse with arbitrary semi-axes.
double bm_distance_disk_ellipse(double semi_x, double semi_y, std::size_t grid);

struct CylinderSemiaxes {
  std::vector<double> singular_values;          // descending, of the m x k tail block
  std::vector<std::optional<double>> semiaxes;  // 1/s_j; nullopt marks an infinite semi-axis
};

CylinderSemiaxes cylinder_section_semiaxes(const BodySpec& body, const SubspaceBasis& basis);

struct ExtremeRow {
  double c = 0.0;
  double smax_threshold = 0.0;  // sqrt(m) + c sqrt(k)
  double smin_threshold = 0.0;  // sqrt(m) - c sqrt(k)
  double p_smax_below = 0.0;
  double p_smin_above = 0.0;
  Interval smax_band;
  Interval smin_band;
};

struct ExtremesReport {
  std::size_t m = 0;
  std::size_t k = 0;
  std::size_t trials = 0;
  double mean_smax = 0.0;
  double mean_smin = 0.0;
  std::vector<ExtremeRow> rows;
};

/// Extreme singular values of m x k standard Gaussian matrices.
ExtremesReport gaussian_extremes_experiment(std::size_t m, std::size_t k, std::size_t trials, const SeedSpec& seed,
                                            std::vector<double> c_values = {1.0 / 64, 1.0 / 16, 1.0 / 4},
                                            const parallel::Execution& exec = {});

}  // namespace ellpos
