#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <boost/math/distributions/chi_squared.hpp>

#include "ellpos/sections.hpp"
#include "oracles.hpp"

namespace {

using ellpos::BodySpec;
using ellpos::SphericityMethod;
using ellpos::SubspaceBasis;

SubspaceBasis coordinate_basis(std::size_t n, std::vector<std::size_t> axes) {
  SubspaceBasis b{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(axes.size()))};
  for (std::size_t j = 0; j < axes.size(); ++j) b.columns(static_cast<Eigen::Index>(axes[j]), static_cast<Eigen::Index>(j)) = 1.0;
  return b;
}

TEST(SectionNorm, CoordinatePlane) {
  const auto e = ellpos::section_norm(BodySpec::cube(3), coordinate_basis(3, {0, 1}), std::vector<double>{0.6, 0.8});
  EXPECT_DOUBLE_EQ(e.value, 0.8);
  EXPECT_EQ(e.gradient, (std::vector<double>{0.0, 1.0}));
  EXPECT_THROW(ellpos::section_norm(BodySpec::cube(3), coordinate_basis(3, {0, 1}), std::vector<double>{1.0}),
               std::invalid_argument);
}

TEST(SectionNorm, PullbackGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  const std::vector<BodySpec> bodies{BodySpec::lp_ball(12, 3.0), BodySpec::lp_ball(12, 1.5), BodySpec::euclidean(12),
                                     BodySpec::cylinder_john(12, 4)};
  for (int trial = 0; trial < 100; ++trial) {
    const auto& body = bodies[trial % bodies.size()];
    const std::size_t k = 2 + trial % 3;
    const auto q = ellpos::haar_subspace({50, static_cast<std::uint64_t>(trial)}, 12, k);
    const auto u = oracle::normals(rng, k);
    const auto e = ellpos::section_norm(body, q, u);
    constexpr double h = 1e-6;
    for (std::size_t j = 0; j < k; ++j) {
      auto up = u, dn = u;
      up[j] += h;
      dn[j] -= h;
      const double fd = (ellpos::section_norm(body, q, up).value - ellpos::section_norm(body, q, dn).value) / (2 * h);
      EXPECT_NEAR(e.gradient[j], fd, 1e-5) << "trial " << trial;
    }
  }
}

TEST(Sphericity, SquareInThePlane) {
  const auto r = ellpos::sphericity_ratio(BodySpec::cube(2), coordinate_basis(2, {0, 1}), SphericityMethod::net_default(), {1, 0});
  EXPECT_TRUE(r.certified);
  EXPECT_LE(r.ratio_lower, std::sqrt(2.0));
  EXPECT_GE(r.ratio, std::sqrt(2.0));
  EXPECT_NEAR(r.ratio, std::sqrt(2.0), 2 * r.lipschitz * 1e-3 * 2);
  EXPECT_LE(r.r_min, 1 / std::sqrt(2.0));
  EXPECT_GE(r.r_max, 1.0);
}

TEST(Sphericity, EuclideanAnyBasis) {
  for (std::uint64_t t = 0; t < 50; ++t) {
    const std::size_t k = 2 + t % 2;
    const auto q = ellpos::haar_subspace({2, t}, 20, k);
    const auto r = ellpos::sphericity_ratio(BodySpec::euclidean(20), q, SphericityMethod::net_default(), {2, t});
    EXPECT_NEAR(r.ratio_lower, 1.0, 1e-12);
    EXPECT_LE(r.ratio, (1 + r.resolution) / (1 - r.resolution) + 1e-12);
  }
}

TEST(Sphericity, CylinderSections) {
  const auto body = BodySpec::cylinder_john(16, 4);
  // both axes in the Euclidean tail: a round disk
  const auto tail = ellpos::sphericity_ratio(body, coordinate_basis(16, {13, 15}), SphericityMethod::net_default(), {3, 0});
  EXPECT_NEAR(tail.ratio_lower, 1.0, 1e-12);
  // one head axis and one tail axis: norm is max(|u1|, |u2|), the square
  const auto mixed = ellpos::sphericity_ratio(body, coordinate_basis(16, {0, 15}), SphericityMethod::net_default(), {3, 1});
  EXPECT_GE(mixed.ratio, std::sqrt(2.0));
  EXPECT_LE(mixed.ratio_lower, std::sqrt(2.0) + 1e-12);
  EXPECT_NEAR(mixed.ratio_lower, std::sqrt(2.0), 2 * std::sqrt(2.0) * mixed.resolution);
}

TEST(Sphericity, NetAndMultiStartAgree) {
  for (std::uint64_t t = 0; t < 10; ++t) {
    const auto body = t % 2 ? BodySpec::cube(16) : BodySpec::lp_ball(16, 1.0);
    const auto q = ellpos::haar_subspace({4, t}, 16, 2);
    const auto net = ellpos::sphericity_ratio(body, q, SphericityMethod::net_default(), {4, t});
    const auto ms = ellpos::sphericity_ratio(body, q, SphericityMethod::multistart(), {4, t});
    EXPECT_FALSE(ms.certified);
    EXPECT_LE(ms.ratio_lower, net.ratio + 1e-12);
    // first-order width of the certificate on the ratio
    const double slack = net.ratio * net.lipschitz * net.resolution * (1 / net.r_min + 1 / net.r_max) * 2;
    EXPECT_LE(net.ratio, ms.ratio_lower + slack);
  }
}

TEST(Sphericity, ThreeDimensionalNetCertifies) {
  const auto q = ellpos::haar_subspace({5, 0}, 30, 3);
  const auto net = ellpos::sphericity_ratio(BodySpec::lp_ball(30, 4.0), q, SphericityMethod::net_default(), {5, 0});
  const auto ms = ellpos::sphericity_ratio(BodySpec::lp_ball(30, 4.0), q, SphericityMethod::multistart(), {5, 0});
  EXPECT_TRUE(net.certified);
  EXPECT_LE(net.r_min, ms.r_min + 1e-9);
  EXPECT_GE(net.r_max, ms.r_max - 1e-9);
}

TEST(Sphericity, Errors) {
  const auto q = ellpos::haar_subspace({6, 0}, 10, 4);
  EXPECT_THROW(ellpos::sphericity_ratio(BodySpec::cube(10), q, SphericityMethod::net_default(), {}), std::invalid_argument);
  EXPECT_NO_THROW(ellpos::sphericity_ratio(BodySpec::cube(10), q, SphericityMethod::multistart(8), {}));
  EXPECT_THROW(ellpos::sphericity_ratio(BodySpec::cube(11), q, SphericityMethod::multistart(8), {}), std::invalid_argument);
}

TEST(Sphericity, CsvRow) {
  const auto r = ellpos::sphericity_ratio(BodySpec::cube(2), coordinate_basis(2, {0, 1}), SphericityMethod::net_default(), {7, 3});
  EXPECT_EQ(ellpos::sphericity_csv_header(), "seed,n,k,method,r_min,r_max,ratio,certified");
  EXPECT_EQ(ellpos::sphericity_csv_row(r).rfind("7:3,2,2,net(", 0), 0u);
  EXPECT_EQ(ellpos::sphericity_csv_row(r).back(), '1');
}

TEST(EllipseDistance, ClosedForm) {
  EXPECT_NEAR(ellpos::ellipse_intersection_distance(1 - 1e-9, 2.0), 1.0, 1e-8);
  EXPECT_NEAR(ellpos::ellipse_intersection_distance(0.5, 2.0), std::sqrt(1.6), 1e-15);
  EXPECT_NEAR(ellpos::ellipse_intersection_distance(0.6, 2.0), std::sqrt(139.0 / 91.0), 1e-15);
  EXPECT_THROW(ellpos::ellipse_intersection_distance(1.0, 2.0), std::invalid_argument);
  EXPECT_THROW(ellpos::ellipse_intersection_distance(0.5, 1.0), std::invalid_argument);
}

TEST(EllipseDistance, BruteForceDominatesClosedForm) {
  const double b = ellpos::bm_distance_2d_bruteforce(0.5, 2.0, 200);
  EXPECT_GE(b, std::sqrt(1.6) - 1e-6);
  EXPECT_LE(b, 1.40);
  EXPECT_NEAR(ellpos::bm_distance_2d_bruteforce(1 - 1e-6, 2.0, 200), 1.0, 1e-4);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> ua(0.05, 0.95), ub(1.05, 6.0);
  for (int i = 0; i < 20; ++i) {
    const double a = ua(rng), bb = ub(rng);
    EXPECT_LE(ellpos::ellipse_intersection_distance(a, bb), ellpos::bm_distance_2d_bruteforce(a, bb, 200) + 1e-6)
        << a << " " << bb;
  }
  EXPECT_THROW(ellpos::bm_distance_2d_bruteforce(0.5, 2.0, 99), std::invalid_argument);
}

TEST(EllipseDistance, RotationSymmetry) {
  // rotating the figure by 90 degrees swaps the semi-axes
  EXPECT_NEAR(ellpos::bm_distance_disk_ellipse(0.5, 2.0, 200), ellpos::bm_distance_disk_ellipse(2.0, 0.5, 200), 1e-6);
  EXPECT_NEAR(ellpos::bm_distance_disk_ellipse(0.7, 3.0, 300), ellpos::bm_distance_disk_ellipse(3.0, 0.7, 300), 1e-6);
}

TEST(CylinderSemiaxes, Examples) {
  const auto body = BodySpec::cylinder_john(10, 3);
  const auto head = ellpos::cylinder_section_semiaxes(body, coordinate_basis(10, {0, 2}));
  for (const auto& s : head.semiaxes) EXPECT_FALSE(s.has_value());
  const auto tail = ellpos::cylinder_section_semiaxes(body, coordinate_basis(10, {7, 9}));
  for (const auto& s : tail.semiaxes) EXPECT_NEAR(s.value(), 1.0, 1e-15);
  // more section dimensions than tail rows: k - m infinite semi-axes
  const auto wide = ellpos::cylinder_section_semiaxes(body, ellpos::haar_subspace({9, 0}, 10, 5));
  ASSERT_EQ(wide.semiaxes.size(), 5u);
  EXPECT_TRUE(wide.semiaxes[2].has_value());
  EXPECT_FALSE(wide.semiaxes[3].has_value());
  EXPECT_FALSE(wide.semiaxes[4].has_value());
  EXPECT_THROW(ellpos::cylinder_section_semiaxes(BodySpec::cube(10), coordinate_basis(10, {0})), std::invalid_argument);
}

TEST(CylinderSemiaxes, LargestSingularValueByPowerIteration) {
  const auto body = BodySpec::cylinder_john(64, 8);
  const auto q = ellpos::haar_subspace({10, 0}, 64, 2);
  const auto r = ellpos::cylinder_section_semiaxes(body, q);
  const Eigen::MatrixXd a = q.columns.bottomRows(8);
  Eigen::VectorXd v = Eigen::VectorXd::Ones(2);
  for (int i = 0; i < 500; ++i) v = (a.transpose() * (a * v)).normalized();
  EXPECT_NEAR(r.singular_values[0], (a * v).norm(), 1e-10);
  // the section's tail constraint |A u| <= 1 has its longest axis 1/s_min
  EXPECT_NEAR(r.semiaxes[1].value(), 1.0 / r.singular_values[1], 1e-15);
  EXPECT_GE(r.singular_values[0], r.singular_values[1]);
}

TEST(GaussianExtremes, SingleColumnIsChi) {
  const std::size_t m = 50, trials = 4096;
  const double c = 0.25;
  const auto r = ellpos::gaussian_extremes_experiment(m, 1, trials, {11, 0}, {c});
  const boost::math::chi_squared_distribution<> chi2(m);
  const double t_hi = std::sqrt(double(m)) + c, t_lo = std::sqrt(double(m)) - c;
  const double p_below = boost::math::cdf(chi2, t_hi * t_hi);
  const double p_above = boost::math::cdf(boost::math::complement(chi2, t_lo * t_lo));
  const double se_b = std::sqrt(p_below * (1 - p_below) / trials), se_a = std::sqrt(p_above * (1 - p_above) / trials);
  EXPECT_NEAR(r.rows[0].p_smax_below, p_below, 4 * se_b);
  EXPECT_NEAR(r.rows[0].p_smin_above, p_above, 4 * se_a);
  EXPECT_EQ(r.mean_smax, r.mean_smin);
}

TEST(GaussianExtremes, SquareHardEdge) {
  const auto r = ellpos::gaussian_extremes_experiment(20, 20, 512, {12, 0}, {0.25, 0.5});
  EXPECT_EQ(r.rows[0].p_smin_above, 0.0);
  EXPECT_EQ(r.rows[1].p_smin_above, 0.0);
  EXPECT_LT(r.mean_smin, 1.0);
}

TEST(GaussianExtremes, Errors) {
  EXPECT_THROW(ellpos::gaussian_extremes_experiment(5, 6, 256, {}), std::invalid_argument);
  EXPECT_THROW(ellpos::gaussian_extremes_experiment(5, 0, 256, {}), std::invalid_argument);
  EXPECT_THROW(ellpos::gaussian_extremes_experiment(5, 2, 255, {}), std::invalid_argument);
}

}  // namespace
