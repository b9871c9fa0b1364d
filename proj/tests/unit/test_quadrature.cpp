#include <cmath>

#include "bubbler/errors.hpp"
#include "bubbler/params.hpp"
#include "bubbler/quadrature.hpp"
#include "doctest.h"

using namespace bubbler;

namespace {

SchemeLayout single_p(double alpha, double s) {
  SchemeLayout l;
  l.alpha = alpha;
  l.t = 10.0;
  l.centers = {Point::Zero()};
  l.scales = {s};
  l.kappas = {1.0 + alpha};
  return l;
}

}  // namespace

TEST_CASE("Gauss-Legendre is exact to degree 2n-1") {
  std::vector<double> x, w;
  gauss_legendre(7, x, w);
  for (int deg = 0; deg <= 13; ++deg) {
    double s = 0.0;
    for (int i = 0; i < 7; ++i) s += w[i] * std::pow(x[i], deg);
    const double exact = deg % 2 ? 0.0 : 2.0 / (deg + 1);
    CHECK(s == doctest::Approx(exact).scale(1.0).epsilon(1e-14));
  }
  CHECK_THROWS_AS(gauss_legendre(0, x, w), ConfigurationError);
}

TEST_CASE("smooth integrands over the disk") {
  const QuadratureScheme sc = build_scheme(single_p(0.5, 1e-4), 1000000, 1);
  CHECK(integrate([](const Point&) { return 1.0; }, sc) == doctest::Approx(kPi).epsilon(1e-13));
  CHECK(integrate([](const Point& x) { return x.squaredNorm(); }, sc) == doctest::Approx(kPi / 2).epsilon(1e-13));
  CHECK(integrate([](const Point& x) { return x.x() * x.x() * x.y() * x.y(); }, sc) ==
        doctest::Approx(kPi / 24).epsilon(1e-12));
}

TEST_CASE("with free bubble patches the smooth moments still hold") {
  DiskDomain dom;
  const ProblemSpec s = ProblemSpec::make(0.5, 2, 40);
  const BubbleConfig c = build_config(s, {Point(0.2, 0.05), Point(-0.1, -0.17)}, dom);
  const QuadratureScheme sc = build_scheme(c, 2000000, 1);
  CHECK(sc.patches.size() == 3);
  CHECK(integrate([](const Point&) { return 1.0; }, sc) == doctest::Approx(kPi).epsilon(1e-11));
  CHECK(integrate([](const Point& x) { return std::exp(x.x()) * std::cos(x.y()); }, sc) ==
        doctest::Approx(kPi).epsilon(1e-11));  // harmonic, mean value at 0 is 1
  // anchored offsets reproduce the node positions
  for (std::size_t k = 1; k < 3; ++k)
    for (const QuadNode& n : sc.regions[k]) {
      REQUIRE(n.anchor == static_cast<int>(k));
      CHECK((c.xi[k - 1] + n.rel - n.x).norm() < 1e-15);
    }
}

TEST_CASE("singular bubble mass with its exterior tail") {
  for (double a : {-0.5, 0.5, 2.5}) {
    const double s = 1e-3;
    const QuadratureScheme sc = build_scheme(single_p(a, s), 2000000, 2);
    const double k = 1 + a;
    const double in = integrate(
        [&](const Point& x) {
          const double R2 = x.squaredNorm(), q = std::pow(R2, k);
          return 8 * k * k * s * s * std::pow(R2, a) / ((s * s + q) * (s * s + q));
        },
        sc);
    CHECK(in + exterior_mass_singular(s, a) == doctest::Approx(8 * kPi * k).epsilon(1e-10));
  }
}

TEST_CASE("planar exterior mass against a direct polar oracle") {
  const Point c(0.3, 0.2);
  const double s = 0.2;
  // integrate 8 s^2/(s^2+|x-c|^2)^2 over |x| > 1 in polar coordinates about 0
  std::vector<double> gx, gw;
  gauss_legendre(64, gx, gw);
  double oracle = 0.0;
  for (int panel = 0; panel < 200; ++panel) {
    // u in (0,1] maps to r = 1/u
    const double a = panel / 200.0, b = (panel + 1) / 200.0;
    for (int g = 0; g < 64; ++g) {
      const double u = a + 0.5 * (b - a) * (gx[g] + 1);
      const double r = 1.0 / u, jac = 1.0 / (u * u);
      for (int j = 0; j < 256; ++j) {
        const double th = 2 * kPi * j / 256;
        const double d2 = (Point(r * std::cos(th), r * std::sin(th)) - c).squaredNorm();
        oracle += 0.5 * (b - a) * gw[g] * jac * r * (2 * kPi / 256) * 8 * s * s / ((s * s + d2) * (s * s + d2));
      }
    }
  }
  CHECK(exterior_mass_planar(c, s) == doctest::Approx(oracle).epsilon(1e-9));
  CHECK(exterior_mass_singular(1.0, 0.0) == doctest::Approx(4 * kPi));
}

TEST_CASE("errors name the offending node and region") {
  const QuadratureScheme sc = build_scheme(single_p(0.0, 1e-2), 1000000, 1);
  try {
    integrate([](const Point& x) { return x.norm() > 0.95 ? NAN : 1.0; }, sc);
    FAIL("expected a quadrature error");
  } catch (const QuadratureError& e) {
    CHECK(e.patch() == -1);
  }
  CHECK_THROWS_AS(build_scheme(single_p(0.0, 1e-2), 10, 0), ConfigurationError);
  CHECK_THROWS_AS(refine_until([](const Point&) { return 1.0; }, sc, 1e-14, 1000000), ConfigurationError);
}

TEST_CASE("refinement converges and reports its tolerance") {
  const QuadratureScheme sc = build_scheme(single_p(0.0, 1e-2), 1000000, 0);
  const RefineResult r = refine_until([](const Point& x) { return std::exp(-10.0 * x.squaredNorm()); }, sc, 1e-10,
                                      4000000);
  CHECK(r.value == doctest::Approx(kPi / 10 * (1 - std::exp(-10.0))).epsilon(1e-10));
  CHECK(r.achieved_tol <= 1e-10);
  CHECK_FALSE(r.cap_hit);
}

TEST_CASE("close centers are merged, wide bubbles fall back to one patch") {
  SchemeLayout l = single_p(0.0, 1e-6);
  l.centers.push_back(Point(0.3, 0.0));
  l.centers.push_back(Point(0.3 + 1e-4, 0.0));
  l.scales = {1e-6, 1e-4, 1e-4};
  l.kappas = {1.0, 1.0, 1.0};
  const QuadratureScheme m = build_scheme(l, 4000000, 1);
  CHECK(m.patches.size() == 2);
  CHECK_FALSE(m.warnings.empty());
  SchemeLayout w = single_p(0.5, 0.3);
  w.centers.push_back(Point(0.4, 0.0));
  w.scales.push_back(0.3);
  w.kappas.push_back(1.0);
  const QuadratureScheme g = build_scheme(w, 4000000, 1);
  CHECK(g.patches.size() == 1);
  CHECK(integrate([](const Point&) { return 1.0; }, g) == doctest::Approx(kPi).epsilon(1e-12));
}

TEST_CASE("per-region totals add up") {
  const QuadratureScheme sc = build_scheme(single_p(0.0, 1e-2), 1000000, 1);
  const IntegrationResult r = integrate_regions([](const Point& x) { return 1.0 + x.x(); }, sc);
  CHECK(region_total(r.per_region) == doctest::Approx(r.value).epsilon(1e-15));
  CHECK(r.per_region.size() == sc.patches.size() + 1);
}
