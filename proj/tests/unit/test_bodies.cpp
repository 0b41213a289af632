#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "ellpos/bodies.hpp"
#include "ellpos/positions.hpp"
#include "oracles.hpp"

namespace {

using ellpos::BodySpec;
using ellpos::Family;
using Vec = std::vector<double>;

std::vector<BodySpec> suite(std::size_t n) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  Vec w(n), d(n);
  for (auto& v : w) v = u(rng);
  for (auto& v : d) v = u(rng);
  return {BodySpec::cube(n),
          BodySpec::lp_ball(n, 1.0),
          BodySpec::lp_ball(n, 1.5),
          BodySpec::lp_ball(n, 3.0),
          BodySpec::euclidean(n),
          BodySpec::weighted_lp(n, 2.0, w),
          BodySpec::weighted_lp(n, 4.0, w).with_diag(d),
          BodySpec::cylinder_john(n, n / 4),
          BodySpec::cube(n).with_diag(d),
          BodySpec::lp_ball(n, 1.0).with_diag(d)};
}

TEST(Norm, SpecExamples) {
  EXPECT_DOUBLE_EQ(ellpos::norm(BodySpec::cube(3), Vec{0.5, -2, 1}), 2.0);
  EXPECT_DOUBLE_EQ(ellpos::norm(BodySpec::lp_ball(2, 1.0).with_diag({2, 2}), Vec{2, 2}), 2.0);
  const auto cyl = BodySpec::cylinder_john(4, 2);
  const Vec x{0.5, 0.5, 0.6, 0.8};
  const double v = ellpos::norm(cyl, x);
  EXPECT_NEAR(v, 1.0, 1e-15);
  // membership: x / ||x|| lies on the boundary of B' ∩ B''
  Vec y = x;
  for (auto& c : y) c /= v;
  EXPECT_NEAR(oracle::cylinder(y, 2), 1.0, 1e-15);
}

TEST(Norm, MatchesIndependentFormulas) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 100; ++t) {
    const auto x = oracle::normals(rng, 12);
    EXPECT_NEAR(ellpos::norm(BodySpec::cube(12), x), oracle::linf(x), 1e-14);
    EXPECT_NEAR(ellpos::norm(BodySpec::lp_ball(12, 1.0), x), oracle::lp(x, 1.0), 1e-12);
    EXPECT_NEAR(ellpos::norm(BodySpec::lp_ball(12, 3.5), x), oracle::lp(x, 3.5), 1e-12);
    EXPECT_NEAR(ellpos::norm(BodySpec::cylinder_john(12, 5), x), oracle::cylinder(x, 5), 1e-14);
  }
}

TEST(Norm, WeightedLpFoldsWeightsIntoCoordinates) {
  const Vec w{1.0, 4.0, 9.0};
  const Vec x{1.0, -1.0, 2.0};
  // sum_i w_i |x_i|^p with p = 2
  EXPECT_NEAR(ellpos::norm(BodySpec::weighted_lp(3, 2.0, w), x), std::sqrt(1.0 + 4.0 + 36.0), 1e-14);
}

TEST(Norm, ZeroOnlyAtOrigin) {
  for (const auto& body : suite(8)) {
    EXPECT_EQ(ellpos::norm(body, Vec(8, 0.0)), 0.0);
    Vec e(8, 0.0);
    e[3] = 1e-300;
    EXPECT_GT(ellpos::norm(body, e), 0.0);
  }
}

TEST(Norm, ExtremeMagnitudesStayFinite) {
  const Vec big(4, 1e200), tiny(4, 1e-200);
  EXPECT_NEAR(ellpos::norm(BodySpec::euclidean(4), big) / 2e200, 1.0, 1e-14);
  EXPECT_NEAR(ellpos::norm(BodySpec::euclidean(4), tiny) / 2e-200, 1.0, 1e-14);
  EXPECT_NEAR(ellpos::norm(BodySpec::cylinder_john(4, 2), big) / (std::sqrt(2.0) * 1e200), 1.0, 1e-14);
}

TEST(Norm, Errors) {
  EXPECT_THROW(ellpos::norm(BodySpec::cube(3), Vec{1, 2}), std::invalid_argument);
  EXPECT_THROW(ellpos::norm(BodySpec::cube(2), Vec{1, std::numeric_limits<double>::quiet_NaN()}), std::invalid_argument);
  EXPECT_THROW(ellpos::norm(BodySpec::cube(2), Vec{1, std::numeric_limits<double>::infinity()}), std::invalid_argument);
  EXPECT_THROW(ellpos::gradient(BodySpec::cube(2), Vec{0, 0}), std::domain_error);
}

TEST(BodySpecValidation, RejectsInvalidBodies) {
  EXPECT_THROW(BodySpec::cube(1), std::invalid_argument);
  EXPECT_THROW(BodySpec::lp_ball(3, 0.5), std::invalid_argument);
  EXPECT_THROW(BodySpec::cylinder_john(4, 0), std::invalid_argument);
  EXPECT_THROW(BodySpec::cylinder_john(4, 4), std::invalid_argument);
  EXPECT_THROW(BodySpec::weighted_lp(3, 2.0, {1, 2}), std::invalid_argument);
  EXPECT_THROW(BodySpec::weighted_lp(3, 2.0, {1, -2, 1}), std::invalid_argument);
  EXPECT_THROW(BodySpec::cube(2).with_diag({1, 0}), std::invalid_argument);
  EXPECT_THROW(BodySpec::cube(2).with_diag({1, std::numeric_limits<double>::infinity()}), std::invalid_argument);
}

TEST(Gradient, SpecExamples) {
  auto g = ellpos::gradient(BodySpec::cube(3), Vec{0.5, -2, 1});
  EXPECT_DOUBLE_EQ(g.value, 2.0);
  EXPECT_EQ(g.gradient, (Vec{0, -1, 0}));
  g = ellpos::gradient(BodySpec::euclidean(2), Vec{3, 4});
  EXPECT_DOUBLE_EQ(g.value, 5.0);
  EXPECT_NEAR(g.gradient[0], 0.6, 1e-15);
  EXPECT_NEAR(g.gradient[1], 0.8, 1e-15);
  g = ellpos::gradient(BodySpec::lp_ball(2, 1.0), Vec{1, -2});
  EXPECT_DOUBLE_EQ(g.value, 3.0);
  EXPECT_EQ(g.gradient, (Vec{1, -1}));
}

TEST(Gradient, TiesSelectLowestIndex) {
  auto g = ellpos::gradient(BodySpec::cube(4), Vec{1, -3, 3, 3});
  EXPECT_EQ(g.gradient, (Vec{0, -1, 0, 0}));
  // cylinder head/tail tie goes to the head
  g = ellpos::gradient(BodySpec::cylinder_john(3, 2), Vec{1, 0.6, 0.8});
  EXPECT_EQ(g.gradient, (Vec{1, 0, 0}));
}

TEST(Gradient, Homogeneity) {
  std::mt19937_64 rng(8);
  for (const auto& body : suite(6)) {
    for (int t = 0; t < 20; ++t) {
      const auto x = oracle::normals(rng, 6);
      const auto g = ellpos::gradient(body, x).gradient;
      Vec sx = x, nx = x;
      for (auto& v : sx) v *= 3.7;
      for (auto& v : nx) v = -v;
      const auto gs = ellpos::gradient(body, sx).gradient;
      const auto gn = ellpos::gradient(body, nx).gradient;
      for (std::size_t i = 0; i < 6; ++i) {
        EXPECT_NEAR(gs[i], g[i], 1e-12 * (1 + std::abs(g[i])));
        EXPECT_NEAR(gn[i], -g[i], 1e-12 * (1 + std::abs(g[i])));
      }
    }
  }
}

TEST(Properties, HomogeneityAndTriangle) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> lam(0.01, 100.0);
  for (const auto& body : suite(10)) {
    for (int t = 0; t < 200; ++t) {
      const auto x = oracle::normals(rng, 10);
      const auto y = oracle::normals(rng, 10);
      const double l = lam(rng);
      Vec lx = x, s = x;
      for (std::size_t i = 0; i < 10; ++i) {
        lx[i] *= l;
        s[i] += y[i];
      }
      const double nx = ellpos::norm(body, x);
      EXPECT_NEAR(ellpos::norm(body, lx), l * nx, 1e-12 * l * nx);
      EXPECT_LE(ellpos::norm(body, s), nx + ellpos::norm(body, y) + 1e-12);
    }
  }
}

TEST(Properties, GradientIdentityAndDualBound) {
  std::mt19937_64 rng(2);
  for (const auto& body : suite(10)) {
    for (int t = 0; t < 200; ++t) {
      const auto x = oracle::normals(rng, 10);
      const auto y = oracle::normals(rng, 10);
      const auto gx = ellpos::gradient(body, x);
      const auto gy = ellpos::gradient(body, y);
      double self = 0.0, cross = 0.0;
      for (std::size_t i = 0; i < 10; ++i) {
        self += gx.gradient[i] * x[i];
        cross += gy.gradient[i] * x[i];
      }
      EXPECT_NEAR(self, gx.value, 1e-12 * gx.value);
      EXPECT_LE(cross, gx.value + 1e-12);
    }
  }
}

TEST(Properties, SignEquivariance) {
  std::mt19937_64 rng(3);
  std::bernoulli_distribution coin;
  for (const auto& body : suite(10)) {
    for (int t = 0; t < 100; ++t) {
      const auto x = oracle::normals(rng, 10);
      Vec sx = x, sigma(10);
      for (std::size_t i = 0; i < 10; ++i) {
        sigma[i] = coin(rng) ? 1.0 : -1.0;
        sx[i] *= sigma[i];
      }
      const auto g = ellpos::gradient(body, x);
      const auto gs = ellpos::gradient(body, sx);
      EXPECT_NEAR(gs.value, g.value, 1e-14 * g.value);
      for (std::size_t i = 0; i < 10; ++i) {
        EXPECT_NEAR(gs.gradient[i], sigma[i] * g.gradient[i], 1e-12);
        EXPECT_GE(g.gradient[i] * x[i], 0.0);
      }
    }
  }
}

TEST(Properties, CoordinateMonotonicity) {
  std::mt19937_64 rng(4);
  for (const auto& body : suite(8)) {
    for (int t = 0; t < 30; ++t) {
      auto x = oracle::normals(rng, 8);
      double prev = -1.0;
      for (int s = 1; s <= 40; ++s) {
        x[2] = 0.1 * s;
        const double gi = std::abs(ellpos::gradient(body, x).gradient[2]);
        EXPECT_GE(gi, prev - 1e-12);
        prev = gi;
      }
    }
  }
}

TEST(Properties, GradientBoundedByLipschitz) {
  std::mt19937_64 rng(6);
  for (const auto& body : suite(10)) {
    const double lip = ellpos::lipschitz_constant(body);
    for (int t = 0; t < 200; ++t) {
      const auto g = ellpos::gradient(body, oracle::normals(rng, 10)).gradient;
      double s = 0.0;
      for (double v : g) s += v * v;
      EXPECT_LE(std::sqrt(s), lip * (1 + 1e-12));
    }
  }
}

TEST(Properties, FiniteDifferencesAwayFromTies) {
  std::mt19937_64 rng(7);
  constexpr double h = 1e-6;
  for (const auto& body : suite(8)) {
    int accepted = 0;
    while (accepted < 40) {
      const auto x = oracle::normals(rng, 8);
      // reject points near the non-smooth set: small or nearly equal scaled coordinates
      Vec a(8);
      for (std::size_t i = 0; i < 8; ++i) a[i] = std::abs(body.inv_scale()[i] * x[i]);
      Vec sorted = a;
      std::sort(sorted.begin(), sorted.end());
      bool ok = sorted.front() > 1e-3;
      for (std::size_t i = 1; i < 8; ++i) ok = ok && sorted[i] - sorted[i - 1] > 1e-3;
      if (body.family() == Family::CylinderJohn) {
        Vec head(a.begin(), a.end() - static_cast<long>(body.m()));
        Vec tail(a.end() - static_cast<long>(body.m()), a.end());
        ok = ok && std::abs(oracle::linf(head) - oracle::lp(tail, 2.0)) > 1e-3;
      }
      if (!ok) continue;
      ++accepted;
      const auto g = ellpos::gradient(body, x).gradient;
      for (std::size_t i = 0; i < 8; ++i) {
        Vec up = x, down = x;
        up[i] += h;
        down[i] -= h;
        const double fd = (ellpos::norm(body, up) - ellpos::norm(body, down)) / (2 * h);
        EXPECT_NEAR(fd, g[i], 1e-5 * std::max(1.0, oracle::linf(g)));
      }
    }
  }
}

TEST(Lipschitz, ClosedForms) {
  EXPECT_DOUBLE_EQ(ellpos::lipschitz_constant(BodySpec::cube(7)), 1.0);
  EXPECT_NEAR(ellpos::lipschitz_constant(BodySpec::lp_ball(9, 1.0)), 3.0, 1e-14);
  EXPECT_NEAR(ellpos::lipschitz_constant(BodySpec::lp_ball(9, 3.0)), 1.0, 1e-14);
  EXPECT_NEAR(ellpos::lipschitz_constant(BodySpec::euclidean(9)), 1.0, 1e-14);
  EXPECT_NEAR(ellpos::lipschitz_constant(BodySpec::cylinder_john(9, 3)), 1.0, 1e-14);
  // l_p, p < 2: attained at u_i proportional to a_i^{q/p} ... ||a||_q with q = 2p/(2-p)
  EXPECT_NEAR(ellpos::lipschitz_constant(BodySpec::lp_ball(4, 1.5)), std::pow(4.0, 1.0 / 1.5 - 0.5), 1e-13);
}

TEST(Lipschitz, MultistartAgreesWithClosedForm) {
  for (const auto& body : suite(6)) {
    const double closed = ellpos::lipschitz_constant(body);
    const double found = ellpos::lipschitz_multistart(body, 64, {9, 0});
    EXPECT_LE(found, closed * (1 + 1e-12));
    EXPECT_GE(found, closed * (1 - 1e-3)) << ellpos::to_json(body).dump();
  }
}

TEST(ApplyDiagonal, SpecExamples) {
  const auto cube = BodySpec::cube(3);
  EXPECT_EQ(ellpos::apply_diagonal(cube, Vec{1, 1, 1}), cube);
  EXPECT_DOUBLE_EQ(ellpos::norm(ellpos::apply_diagonal(cube, Vec{2, 2, 2}), Vec{2, 0, 0}), 1.0);
  EXPECT_THROW(ellpos::apply_diagonal(cube, Vec{1, 0, 1}), std::invalid_argument);
  EXPECT_THROW(ellpos::apply_diagonal(cube, Vec{1, 1}), std::invalid_argument);

  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.1, 10.0);
  for (const auto& body : suite(5)) {
    Vec d(5), inv(5);
    for (std::size_t i = 0; i < 5; ++i) {
      d[i] = u(rng);
      inv[i] = 1.0 / d[i];
    }
    const auto once = ellpos::apply_diagonal(body, d);
    const auto back = ellpos::apply_diagonal(once, inv);
    for (int t = 0; t < 100; ++t) {
      const auto x = oracle::normals(rng, 5);
      Vec xd = x;
      for (std::size_t i = 0; i < 5; ++i) xd[i] /= d[i];
      EXPECT_NEAR(ellpos::norm(once, x), ellpos::norm(body, xd), 1e-14 * ellpos::norm(body, xd));
      EXPECT_NEAR(ellpos::norm(back, x), ellpos::norm(body, x), 1e-14 * ellpos::norm(body, x));
    }
  }
}

TEST(Json, FieldOrderAndRoundTrip) {
  const auto body = BodySpec::weighted_lp(3, 2.5, {1, 2, 3}).with_diag({1, 0.5, 2});
  const auto j = ellpos::to_json(body);
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"family", "dim", "p", "weights", "diag"}));
  EXPECT_EQ(ellpos::body_from_json(nlohmann::json::parse(j.dump())), body);

  const auto cyl = ellpos::to_json(BodySpec::cylinder_john(5, 2));
  keys.clear();
  for (const auto& [k, v] : cyl.items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"family", "dim", "m", "diag"}));
  EXPECT_EQ(ellpos::body_hash(BodySpec::cube(4)), ellpos::body_hash(BodySpec::cube(4)));
  EXPECT_NE(ellpos::body_hash(BodySpec::cube(4)), ellpos::body_hash(BodySpec::cube(5)));
}

TEST(Json, EuclideanAlias) {
  const auto b = ellpos::body_from_json(nlohmann::json{{"family", "Euclidean"}, {"dim", 3}});
  EXPECT_EQ(b, BodySpec::euclidean(3));
}

TEST(CylinderJohn, MedianOfMaxSquares) {
  // Monte Carlo median of max g_i^2 vs the exact quantile
  const double mc = ellpos::median_max_gaussian_square(1024, 20000, {0, 0});
  const double exact = oracle::median_max_square(1024);
  EXPECT_NEAR(mc, exact, 0.1);
}

TEST(CylinderJohn, ConstructionAndJohnPosition) {
  const auto body = ellpos::make_cylinder_john_body(4096, {0, 0});
  EXPECT_EQ(body.family(), Family::CylinderJohn);
  EXPECT_EQ(body.m(), static_cast<std::size_t>(std::floor(ellpos::median_max_gaussian_square(4096, 20000, {0, 0}))));
  // exact median is 14.15; the Monte Carlo floor lands on 14
  EXPECT_EQ(body.m(), 14u);
  const auto check = ellpos::verify_john_cylinder(body, {1, 0});
  EXPECT_TRUE(check.contains_ball);
  EXPECT_TRUE(check.contact_points_ok);
  EXPECT_THROW(ellpos::make_cylinder_john_body(32, {0, 0}), std::invalid_argument);
}

}  // namespace
