#include <cmath>
#include <random>

#include "bubbler/bessel.hpp"
#include "bubbler/domain.hpp"
#include "bubbler/errors.hpp"
#include "doctest.h"

using namespace bubbler;

namespace {

Point random_point(std::mt19937_64& rng, double rmax) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const double r = rmax * std::sqrt(U(rng)), th = 2.0 * kPi * U(rng);
  return {r * std::cos(th), r * std::sin(th)};
}

template <class F>
double fd_laplacian(F f, const Point& x, double h) {
  return (f(x + Point(h, 0)) + f(x - Point(h, 0)) + f(x + Point(0, h)) + f(x - Point(0, h)) - 4.0 * f(x)) / (h * h);
}

}  // namespace

TEST_CASE("first zero of J0 and parity of J1") {
  CHECK(bessel::j0_first_zero() == doctest::Approx(2.404825557695773).epsilon(1e-14));
  CHECK(std::abs(bessel::j0(bessel::j0_first_zero())) < 1e-15);
  CHECK(bessel::j1(-0.7) == doctest::Approx(-bessel::j1(0.7)));
  CHECK(bessel::j0(-0.7) == doctest::Approx(bessel::j0(0.7)));
}

TEST_CASE("first eigenpair") {
  const EigenPair e = eigenpair();
  CHECK(e.lambda1 == doctest::Approx(5.783185962946784).epsilon(1e-13));
  CHECK(e.phi1(Point(0, 0)) == doctest::Approx(1.0));
  CHECK(std::abs(e.phi1(Point(1, 0))) < 1e-14);
  std::mt19937_64 rng(3);
  for (int k = 0; k < 20; ++k) {
    const Point x = random_point(rng, 0.9);
    const double lap = fd_laplacian([&](const Point& y) { return e.phi1(y); }, x, 1e-3);
    CHECK(-lap == doctest::Approx(e.lambda1 * e.phi1(x)).epsilon(1e-5));
    const double h = 1e-6;
    const Point g = e.grad_phi1(x);
    CHECK(g.x() == doctest::Approx((e.phi1(x + Point(h, 0)) - e.phi1(x - Point(h, 0))) / (2 * h)).epsilon(1e-7));
    CHECK(g.y() == doctest::Approx((e.phi1(x + Point(0, h)) - e.phi1(x - Point(0, h))) / (2 * h)).epsilon(1e-7));
  }
}

TEST_CASE("green function: method-of-images oracle, symmetry, boundary, harmonicity") {
  const DiskDomain dom;
  std::mt19937_64 rng(5);
  for (int k = 0; k < 30; ++k) {
    const Point x = random_point(rng, 0.95), y = random_point(rng, 0.95);
    // 4 log(|y| |x - y*| / |x - y|) with the reflected point y*
    const double ny = y.norm();
    const Point ystar = y / (ny * ny);
    const double oracle = 4.0 * std::log(ny * (x - ystar).norm() / (x - y).norm());
    CHECK(dom.green(x, y) == doctest::Approx(oracle).epsilon(1e-10));
    CHECK(dom.green(x, y) == doctest::Approx(dom.green(y, x)).epsilon(1e-13));
    CHECK(dom.green(x, y) == doctest::Approx(-4.0 * std::log((x - y).norm()) + dom.regular_part(x, y)).epsilon(1e-11));
    const double th = 2.0 * kPi * k / 30;
    CHECK(std::abs(dom.green(Point(std::cos(th), std::sin(th)), y)) < 1e-12);
    if ((x - y).norm() > 0.05) {
      const double lap = fd_laplacian([&](const Point& z) { return dom.regular_part(z, y); }, x, 1e-3);
      CHECK(std::abs(lap) < 1e-4 * (1.0 + std::abs(dom.regular_part(x, y))) / std::pow(1.0 - x.norm() + 1e-3, 2));
    }
  }
}

TEST_CASE("green gradients against central differences") {
  const DiskDomain dom;
  std::mt19937_64 rng(6);
  for (int k = 0; k < 20; ++k) {
    const Point x = random_point(rng, 0.9), y = random_point(rng, 0.9);
    if ((x - y).norm() < 0.05) continue;
    const double h = 1e-6;
    const Point g = dom.green_gradient_x(x, y);
    const Point gh = dom.regular_part_gradient_x(x, y);
    const double gx = (dom.green(x + Point(h, 0), y) - dom.green(x - Point(h, 0), y)) / (2 * h);
    const double hx = (dom.regular_part(x + Point(0, h), y) - dom.regular_part(x - Point(0, h), y)) / (2 * h);
    CHECK(g.x() == doctest::Approx(gx).epsilon(1e-6));
    CHECK(gh.y() == doctest::Approx(hx).epsilon(1e-6));
  }
}

TEST_CASE("green flux around the pole is -8 pi") {
  const DiskDomain dom;
  const Point y(0.4, -0.3);
  double flux = 0.0;
  const int n = 512;
  const double rad = 1e-3;
  for (int j = 0; j < n; ++j) {
    const double a = 2.0 * kPi * j / n;
    const Point nrm(std::cos(a), std::sin(a));
    flux += dom.green_gradient_x(y + rad * nrm, y).dot(nrm) * rad * 2.0 * kPi / n;
  }
  CHECK(flux == doctest::Approx(-8.0 * kPi).epsilon(1e-9));
}

TEST_CASE("domain errors") {
  const DiskDomain dom;
  CHECK_THROWS_AS(dom.green(Point(0.1, 0), Point(0.1, 0)), DomainError);
  CHECK_THROWS_AS(dom.green(Point(0.1, 0), Point(1.0, 0)), DomainError);
  CHECK_THROWS_AS(dom.green(Point(1.5, 0), Point(0.1, 0)), DomainError);
  CHECK_THROWS_AS(HSpec::kind_from_string("cubic"), ConfigurationError);
  CHECK(HSpec::kind_to_string(HSpec::kind_from_string("radial_poly")) == "radial_poly");
}

TEST_CASE("forcing lift solves the Poisson problem") {
  const PotentialData pd(HSpec::radial_poly({1.0, -2.0, 0.5}), 0.5);
  CHECK(std::abs(pd.rho(Point(0.6, 0.8))) < 1e-14);
  std::mt19937_64 rng(7);
  for (int k = 0; k < 10; ++k) {
    const Point x = random_point(rng, 0.9);
    const double lap = fd_laplacian([&](const Point& z) { return pd.rho(z); }, x, 1e-3);
    CHECK(-lap == doctest::Approx(pd.h(x)).epsilon(1e-5).scale(1.0));
    CHECK(pd.log_k(x) == doctest::Approx(std::log(pd.k(x))).epsilon(1e-14));
  }
  const DiskDomain zero;
  CHECK(zero.k(Point(0.3, 0.1)) == 1.0);
  const PotentialData c(HSpec::constant(4.0), 0.0);
  // constant h: rho = h (1 - r^2) / 4
  CHECK(c.rho(Point(0.5, 0)) == doctest::Approx(0.75));
}
