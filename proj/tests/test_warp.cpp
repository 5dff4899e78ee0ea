#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "regcp/golden.hpp"
#include "regcp/warp.hpp"

using namespace regcp;
using namespace testutil;

static long double warp_ld(long double beta, long double t) {
  if (beta == 0.0L) return t;
  return std::expm1(-beta * t) / std::expm1(-beta);
}

TEST_CASE("linear warp boundaries and identity limit") {
  for (double b : {-6.0, -1.0, 1e-9, 0.0, 2.5, 6.0}) {
    CHECK(warp_eval_linear(b, 0.0) == 0.0);
    CHECK(warp_eval_linear(b, 1.0) == doctest::Approx(1.0).epsilon(1e-15));
  }
  CHECK(std::abs(warp_eval_linear(5e-9, 0.3) - 0.3) < 1e-8);
  CHECK(std::abs(warp_eval_linear(-5e-9, 0.3) - 0.3) < 1e-8);
  CHECK(warp_eval_linear(1.0, 0.5) == doctest::Approx(0.622459).epsilon(1e-6));
}

TEST_CASE("linear warp agrees with long double evaluation") {
  for (double b = -6.0; b <= 6.0; b += 0.37)
    for (double t = 0.0; t <= 1.0; t += 0.05)
      CHECK(std::abs(warp_eval_linear(b, t) - static_cast<double>(warp_ld(b, t))) < 1e-10);
  // series branch vs. extended precision
  for (double b : {3e-7, -8e-7})
    for (double t : {0.1, 0.5, 0.9}) CHECK(std::abs(warp_eval_linear(b, t) - static_cast<double>(warp_ld(b, t))) < 1e-12);
}

TEST_CASE("linear warp inverse") {
  for (double t : {0.0, 0.25, 0.5, 0.75, 1.0}) CHECK(std::abs(warp_invert_linear(2.0, warp_eval_linear(2.0, t)) - t) < 1e-10);
  CHECK(warp_invert_linear(1.0, 0.622459) == doctest::Approx(0.5).epsilon(1e-5));
  CHECK(std::abs(warp_invert_linear(5e-9, 0.4) - 0.4) < 1e-8);
  for (double b : {-4e-7, 9e-7}) CHECK(std::abs(warp_eval_linear(b, warp_invert_linear(b, 0.37)) - 0.37) < 1e-13);
}

TEST_CASE("exponential-map warps") {
  Vector t(11);
  for (int i = 0; i < 11; ++i) t[i] = i / 10.0;
  SUBCASE("zero coefficients are the identity") {
    Vector g = warp_eval_expmap(WarpBasis::linear(), Vector::Zero(1), t);
    CHECK((g - t).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("linear basis reproduces the closed form") {
    for (double b : {-3.0, -1.0, 1.0, 3.0}) {
      Vector c(1);
      c << b;
      Vector g = warp_eval_expmap(WarpBasis::linear(), c, t);
      for (int i = 0; i < 11; ++i) CHECK(std::abs(g[i] - warp_eval_linear(b, t[i])) < 1e-6);
    }
  }
  SUBCASE("constant pieces with equal values cancel") {
    Vector c(2);
    c << 0.7, 0.7;
    Vector g = warp_eval_expmap(WarpBasis::constant(2), c, t);
    CHECK((g - t).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("adding a constant to phi leaves the warp unchanged") {
    auto basis = WarpBasis::bspline(3, {0.3, 0.6});
    std::mt19937_64 gen(7);
    Vector c = random_matrix(gen, static_cast<Eigen::Index>(basis.size()), 1, -1.0, 1.0);
    // B-splines form a partition of unity, so adding 0.9 to every coefficient shifts phi by 0.9.
    Vector shifted = c.array() + 0.9;
    Vector g1 = warp_eval_expmap(basis, c, t), g2 = warp_eval_expmap(basis, shifted, t);
    CHECK((g1 - g2).cwiseAbs().maxCoeff() < 1e-12);
    for (int i = 1; i < 11; ++i) CHECK(g1[i] > g1[i - 1]);
  }
}

TEST_CASE("B-spline basis is a partition of unity") {
  auto basis = WarpBasis::bspline(3, {0.2, 0.5, 0.8});
  CHECK(basis.size() == 7);
  for (double t = 0.0; t <= 1.0; t += 0.01) {
    Vector v = basis.evaluate(t);
    CHECK(v.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(v.minCoeff() >= 0.0);
  }
}

TEST_CASE("interpolation matrix") {
  SUBCASE("nodes give the identity") {
    auto g = SampleGrid::uniform(7);
    CHECK((interp_matrix(g, g.points()).dense() - Matrix::Identity(7, 7)).norm() == 0.0);
  }
  SUBCASE("affine functions are reproduced") {
    auto g = SampleGrid::uniform(9);
    Vector w = warp_linear_grid(1.7, g);
    Vector got = interp_matrix(g, w).apply(g.points());
    CHECK((got - w).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("brute-force piecewise-linear evaluation") {
    auto g = SampleGrid::uniform(5);
    std::mt19937_64 gen(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Vector f = random_matrix(gen, 5, 1);
    for (int rep = 0; rep < 20; ++rep) {
      Vector pts(5);
      for (int i = 0; i < 5; ++i) pts[i] = u(gen);
      Vector got = interpolate(g, f, pts);
      for (int i = 0; i < 5; ++i) {
        // locate the bracketing interval by scanning
        double expect = f[4];
        for (int n = 0; n < 4; ++n) {
          const double lo = n / 4.0, hi = (n + 1) / 4.0;
          if (pts[i] >= lo && pts[i] <= hi) {
            expect = f[n] + (pts[i] - lo) / (hi - lo) * (f[n + 1] - f[n]);
            break;
          }
        }
        CHECK(got[i] == doctest::Approx(expect).epsilon(1e-12));
      }
    }
  }
  SUBCASE("transpose is the adjoint") {
    auto g = SampleGrid::uniform(12);
    InterpMatrix P(g, warp_linear_grid(-2.0, g));
    std::mt19937_64 gen(10);
    Vector f = random_matrix(gen, 12, 1), y = random_matrix(gen, 12, 1);
    CHECK(y.dot(P.apply(f)) == doctest::Approx(f.dot(P.apply_transpose(y))).epsilon(1e-13));
    CHECK((P.dense() * f - P.apply(f)).norm() < 1e-13);
  }
}

TEST_CASE("golden section on a quadratic") {
  int calls = 0;
  auto r = golden_section_minimize([&](double x) { ++calls; return (x - 0.7) * (x - 0.7); }, 0.0, 2.0, 1e-7, 60);
  CHECK(std::abs(r.x - 0.7) < 1e-6);
  CHECK(r.iterations <= 60);
}

TEST_CASE("golden section returns an endpoint minimum") {
  auto r = golden_section_minimize([](double x) { return x; }, 0.0, 1.0, 1e-6);
  CHECK(r.x == 0.0);
}
