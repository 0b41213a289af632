#include "ellpos/sections.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <Eigen/Dense>
#include <Eigen/SVD>

namespace ellpos {

namespace {

constexpr std::size_t kBoundaryNet = 2048;
constexpr double kZeroSingular = 1e-14;

struct Extrema {
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
};

Eigen::Map<const Eigen::VectorXd> as_vector(std::span<const double> v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}

double section_value(const BodySpec& body, const Eigen::MatrixXd& q, const Eigen::VectorXd& u, Eigen::VectorXd& x) {
  x.noalias() = q * u;
  return evaluate_value(body, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
}

// Net points in R^k (unit vectors up to sign) with their covering radius (chord).
std::vector<Eigen::VectorXd> sphere_net(std::size_t k, double resolution, double& covering) {
  std::vector<Eigen::VectorXd> pts;
  if (k == 2) {
    const auto count = static_cast<std::size_t>(std::ceil(std::numbers::pi / (2.0 * resolution)));
    const double h = std::numbers::pi / static_cast<double>(count);
    covering = 2.0 * std::sin(h / 4.0);
    for (std::size_t j = 0; j < count; ++j) {
      Eigen::VectorXd u(2);
      u << std::cos(h * static_cast<double>(j)), std::sin(h * static_cast<double>(j));
      pts.push_back(u);
    }
    return pts;
  }
  // k == 3: grid on the faces x=1, y=1, z=1 of the cube, projected radially.
  // Projection from |x| >= 1 is 1-Lipschitz, so the chord covering radius is
  // at most half the face-cell diagonal.
  const auto cells = static_cast<std::size_t>(std::ceil(std::numbers::sqrt2 / resolution));
  const double spacing = 2.0 / static_cast<double>(cells);
  covering = spacing / std::numbers::sqrt2;
  for (int face = 0; face < 3; ++face) {
    for (std::size_t i = 0; i <= cells; ++i) {
      for (std::size_t j = 0; j <= cells; ++j) {
        const double s = -1.0 + spacing * static_cast<double>(i);
        const double t = -1.0 + spacing * static_cast<double>(j);
        Eigen::Vector3d v;
        if (face == 0) v << 1.0, s, t;
        if (face == 1) v << s, 1.0, t;
        if (face == 2) v << s, t, 1.0;
        pts.emplace_back(v.normalized());
      }
    }
  }
  return pts;
}

Eigen::VectorXd random_unit(GaussianStream& rng, std::size_t k) {
  Eigen::VectorXd u(static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = rng();
  return u.normalized();
}

// Projected gradient on the sphere with step halving; sign = +1 ascends, -1 descends.
double sphere_search(const BodySpec& body, const SubspaceBasis& basis, Eigen::VectorXd u, double sign,
                     std::size_t max_iters) {
  const std::size_t n = basis.n();
  Eigen::VectorXd x(static_cast<Eigen::Index>(n)), grad(static_cast<Eigen::Index>(n));
  auto eval = [&](const Eigen::VectorXd& v, Eigen::VectorXd& g_out) {
    x.noalias() = basis.columns * v;
    const double value = evaluate(body, std::span<const double>(x.data(), n), std::span<double>(grad.data(), n));
    g_out.noalias() = basis.columns.transpose() * grad;
    return value;
  };
  Eigen::VectorXd g(u.size()), cand_g(u.size());
  double value = eval(u, g);
  double step = 0.5;
  for (std::size_t it = 0; it < max_iters && step > 1e-12; ++it) {
    const Eigen::VectorXd tangent = g - g.dot(u) * u;
    if (tangent.norm() == 0.0) break;
    const Eigen::VectorXd cand = (u + sign * step * tangent).normalized();
    const double cv = eval(cand, cand_g);
    if (sign * (cv - value) > 0.0) {
      u = cand;
      value = cv;
      g = cand_g;
      step = std::min(1.0, step * 1.5);
    } else {
      step *= 0.5;
    }
  }
  return value;
}

}  // namespace

NormEvaluation section_norm(const BodySpec& body, const SubspaceBasis& basis, std::span<const double> u) {
  if (u.size() != basis.k() || basis.n() != body.dim()) throw std::invalid_argument("section_norm: dimension mismatch");
  const Eigen::VectorXd x = basis.columns * as_vector(u);
  NormEvaluation full = gradient(body, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
  const Eigen::VectorXd g = basis.columns.transpose() * as_vector(full.gradient);
  return {full.value, std::vector<double>(g.data(), g.data() + g.size())};
}

SphericityReport sphericity_ratio(const BodySpec& body, const SubspaceBasis& basis, const SphericityMethod& method,
                                  const SeedSpec& seed, const parallel::Execution& exec) {
  if (basis.n() != body.dim()) throw std::invalid_argument("sphericity_ratio: dimension mismatch");
  const std::size_t k = basis.k();
  SphericityReport out;
  out.n = basis.n();
  out.k = k;
  out.method = method;
  out.seed = seed;

  if (method.kind == SphericityMethod::Kind::MultiStart) {
    const std::size_t starts = std::max<std::size_t>(1, method.multi.starts);
    std::vector<Extrema> found(starts);
    parallel::for_each_index(starts, exec, [&](std::size_t s) {
      GaussianStream rng(split_seed(seed, s));
      const Eigen::VectorXd u = random_unit(rng, k);
      found[s].hi = sphere_search(body, basis, u, +1.0, method.multi.max_iters);
      found[s].lo = sphere_search(body, basis, u, -1.0, method.multi.max_iters);
    });
    Extrema all;
    for (const auto& e : found) {
      all.lo = std::min(all.lo, e.lo);
      all.hi = std::max(all.hi, e.hi);
    }
    out.r_min = all.lo;
    out.r_max = all.hi;
    out.ratio = out.ratio_lower = all.hi / all.lo;
    out.certified = false;
    return out;
  }

  if (k > 3) throw std::invalid_argument("sphericity_ratio: net method supports k <= 3");
  if (k == 1) {
    Eigen::VectorXd x;
    const double v = section_value(body, basis.columns, Eigen::VectorXd::Ones(1), x);
    out.r_min = out.r_max = v;
    out.ratio = out.ratio_lower = 1.0;
    out.certified = true;
    return out;
  }

  double resolution = method.net.resolution;
  if (resolution <= 0.0) resolution = k == 2 ? 1e-3 : 1e-2;
  double covering = 0.0;
  const auto net = sphere_net(k, resolution, covering);
  const auto chunks = parallel::partition(net.size());
  std::vector<Extrema> found(chunks.size());
  parallel::for_each_index(chunks.size(), exec, [&](std::size_t c) {
    Eigen::VectorXd x;
    for (std::size_t i = chunks[c].begin; i < chunks[c].end; ++i) {
      const double v = section_value(body, basis.columns, net[i], x);
      found[c].lo = std::min(found[c].lo, v);
      found[c].hi = std::max(found[c].hi, v);
    }
  });
  Extrema grid;
  for (const auto& e : found) {
    grid.lo = std::min(grid.lo, e.lo);
    grid.hi = std::max(grid.hi, e.hi);
  }
  // |N(u) - N(v)| <= N(u - v) <= (max of N on the sphere) |u - v|
  double lip = lipschitz_constant(body);
  if (covering < 1.0) lip = std::min(lip, grid.hi / (1.0 - covering));
  out.resolution = covering;
  out.lipschitz = lip;
  out.r_min = std::max(0.0, grid.lo - lip * covering);
  out.r_max = grid.hi + lip * covering;
  out.ratio = out.r_min > 0.0 ? out.r_max / out.r_min : std::numeric_limits<double>::infinity();
  out.ratio_lower = grid.hi / grid.lo;
  out.certified = true;
  return out;
}

std::string sphericity_csv_header() { return "seed,n,k,method,r_min,r_max,ratio,certified"; }

std::string sphericity_csv_row(const SphericityReport& r) {
  char method[64];
  if (r.method.kind == SphericityMethod::Kind::Net) {
    std::snprintf(method, sizeof method, "net(%.3g)", r.resolution);
  } else {
    std::snprintf(method, sizeof method, "multistart(%zu)", r.method.multi.starts);
  }
  char buf[512];
  std::snprintf(buf, sizeof buf, "%llu:%llu,%zu,%zu,%s,%.17g,%.17g,%.17g,%d",
                static_cast<unsigned long long>(r.seed.master), static_cast<unsigned long long>(r.seed.stream), r.n, r.k,
                method, r.r_min, r.r_max, r.ratio, r.certified ? 1 : 0);
  return buf;
}

double ellipse_intersection_distance(double a, double b) {
  if (!(a > 0.0 && a < 1.0 && b > 1.0 && std::isfinite(b))) {
    throw std::invalid_argument("ellipse_intersection_distance: need 0 < a < 1 < b");
  }
  const double a2 = a * a, b2 = b * b;
  return std::sqrt(1.0 + (b2 - 1.0) * (1.0 - a2) / (b2 - a2));
}

double bm_distance_disk_ellipse(double sx, double sy, std::size_t grid) {
  if (!(sx > 0.0 && sy > 0.0) || grid < 2) throw std::invalid_argument("bm_distance_disk_ellipse: bad parameters");
  // boundary net of F = disk ∩ ellipse, in angular order
  std::vector<Eigen::Vector2d> boundary(kBoundaryNet);
  for (std::size_t j = 0; j < kBoundaryNet; ++j) {
    const double th = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(kBoundaryNet);
    const double c = std::cos(th), s = std::sin(th);
    const double gauge = std::max(1.0, std::sqrt(c * c / (sx * sx) + s * s / (sy * sy)));
    boundary[j] = Eigen::Vector2d(c, s) / gauge;
  }
  // arc endpoints: where the max of x^2 + t^2 y^2 over the boundary is attained
  std::vector<Eigen::Vector2d> corners{{std::min(1.0, sx), 0.0}, {0.0, std::min(1.0, sy)}};
  const double denom = 1.0 / (sx * sx) - 1.0 / (sy * sy);
  if (denom != 0.0) {
    const double x2 = (1.0 - 1.0 / (sy * sy)) / denom;
    if (x2 >= 0.0 && x2 <= 1.0) corners.emplace_back(std::sqrt(x2), std::sqrt(1.0 - x2));
  }
  auto ratio_at = [&](double log_t) {
    const double t = std::exp(log_t);
    double r2 = 0.0;
    for (const auto& p : corners) r2 = std::max(r2, p.x() * p.x() + t * t * p.y() * p.y());
    double inner = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < kBoundaryNet; ++j) {
      const Eigen::Vector2d p(boundary[j].x(), t * boundary[j].y());
      const auto& nb = boundary[(j + 1) % kBoundaryNet];
      const Eigen::Vector2d q(nb.x(), t * nb.y());
      const double cross = std::abs(p.x() * q.y() - p.y() * q.x());
      inner = std::min(inner, cross / (q - p).norm());
    }
    return std::sqrt(r2) / inner;
  };
  const double span = std::log(16.0) + std::abs(std::log(sx)) + std::abs(std::log(sy));
  const double h = 2.0 * span / static_cast<double>(grid - 1);
  double best = std::numeric_limits<double>::infinity();
  double best_at = 0.0;
  for (std::size_t i = 0; i < grid; ++i) {
    const double lt = -span + h * static_cast<double>(i);
    const double r = ratio_at(lt);
    if (r < best) {
      best = r;
      best_at = lt;
    }
  }
  // golden-section refinement inside the neighbouring cells
  double lo = best_at - h, hi = best_at + h;
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
  double f1 = ratio_at(x1), f2 = ratio_at(x2);
  for (int it = 0; it < 60; ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - phi * (hi - lo);
      f1 = ratio_at(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + phi * (hi - lo);
      f2 = ratio_at(x2);
    }
  }
  return std::min({best, f1, f2});
}

double bm_distance_2d_bruteforce(double a, double b, std::size_t grid) {
  if (!(a > 0.0 && a < 1.0 && b > 1.0 && std::isfinite(b))) {
    throw std::invalid_argument("bm_distance_2d_bruteforce: need 0 < a < 1 < b");
  }
  if (grid < 100) throw std::invalid_argument("bm_distance_2d_bruteforce: grid must be at least 100");
  return bm_distance_disk_ellipse(a, b, grid);
}

CylinderSemiaxes cylinder_section_semiaxes(const BodySpec& body, const SubspaceBasis& basis) {
  if (body.family() != Family::CylinderJohn) throw std::invalid_argument("cylinder_section_semiaxes: body must be CylinderJohn");
  if (basis.n() != body.dim()) throw std::invalid_argument("cylinder_section_semiaxes: dimension mismatch");
  const auto n = static_cast<Eigen::Index>(body.dim());
  const auto m = static_cast<Eigen::Index>(body.m());
  const auto scale = body.inv_scale();
  Eigen::MatrixXd tail = basis.columns.bottomRows(m);
  for (Eigen::Index i = 0; i < m; ++i) tail.row(i) *= scale[static_cast<std::size_t>(n - m + i)];
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(tail);
  CylinderSemiaxes out;
  const auto sv = svd.singularValues();
  for (std::size_t j = 0; j < basis.k(); ++j) {
    const double s = static_cast<Eigen::Index>(j) < sv.size() ? sv(static_cast<Eigen::Index>(j)) : 0.0;
    out.singular_values.push_back(s);
    if (s > kZeroSingular) {
      out.semiaxes.emplace_back(1.0 / s);
    } else {
      out.semiaxes.emplace_back(std::nullopt);
    }
  }
  return out;
}

ExtremesReport gaussian_extremes_experiment(std::size_t m, std::size_t k, std::size_t trials, const SeedSpec& seed,
                                            std::vector<double> c_values, const parallel::Execution& exec) {
  if (k < 1 || k > m) throw std::invalid_argument("gaussian_extremes_experiment: need 1 <= k <= m");
  if (trials < 256) throw std::invalid_argument("gaussian_extremes_experiment: need at least 256 trials");
  std::vector<double> smax(trials), smin(trials);
  parallel::for_each_index(trials, exec, [&](std::size_t t) {
    GaussianStream rng(split_seed(seed, t));
    Eigen::MatrixXd a(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k));
    rng.fill(std::span<double>(a.data(), static_cast<std::size_t>(a.size())));
    if (k == 1) {
      smax[t] = smin[t] = a.norm();
      return;
    }
    const Eigen::MatrixXd gram = a.transpose() * a;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
    const auto& ev = eig.eigenvalues();
    smin[t] = std::sqrt(std::max(0.0, ev(0)));
    smax[t] = std::sqrt(std::max(0.0, ev(ev.size() - 1)));
  });
  ExtremesReport out;
  out.m = m;
  out.k = k;
  out.trials = trials;
  for (std::size_t t = 0; t < trials; ++t) {
    out.mean_smax += smax[t];
    out.mean_smin += smin[t];
  }
  out.mean_smax /= static_cast<double>(trials);
  out.mean_smin /= static_cast<double>(trials);
  const double rm = std::sqrt(static_cast<double>(m));
  const double rk = std::sqrt(static_cast<double>(k));
  for (double c : c_values) {
    ExtremeRow row;
    row.c = c;
    row.smax_threshold = rm + c * rk;
    row.smin_threshold = rm - c * rk;
    std::size_t below = 0, above = 0;
    for (std::size_t t = 0; t < trials; ++t) {
      if (smax[t] <= row.smax_threshold) ++below;
      if (smin[t] >= row.smin_threshold) ++above;
    }
    row.p_smax_below = static_cast<double>(below) / static_cast<double>(trials);
    row.p_smin_above = static_cast<double>(above) / static_cast<double>(trials);
    row.smax_band = wilson_interval(below, trials);
    row.smin_band = wilson_interval(above, trials);
    out.rows.push_back(row);
  }
  return out;
}

}  // namespace ellpos
