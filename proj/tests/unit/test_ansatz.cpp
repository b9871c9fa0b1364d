#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "bubbler/ansatz.hpp"
#include "bubbler/errors.hpp"
#include "doctest.h"

using namespace bubbler;

namespace {

template <class F>
double fd_laplacian(F f, const Point& x, double h) {
  return (f(x + Point(h, 0)) + f(x - Point(h, 0)) + f(x + Point(0, h)) + f(x - Point(0, h)) - 4.0 * f(x)) / (h * h);
}

// Richardson-extrapolated five-point Laplacian
template <class F>
double fd_laplacian_r(F f, const Point& x, double h) {
  return (4.0 * fd_laplacian(f, x, 0.5 * h) - fd_laplacian(f, x, h)) / 3.0;
}

struct Fixture {
  DiskDomain dom;
  ProblemSpec spec = ProblemSpec::make(0.5, 1, 12.0);
  BubbleConfig cfg = build_config(spec, {Point(0.3, 0.1)}, dom);
  Ansatz an{spec, cfg, dom, HMode::exact};
};

}  // namespace

TEST_CASE("Fourier extension reproduces harmonic polynomials") {
  const FourierExtension f([](double th) { return 1.0 + std::cos(3 * th) - 2.0 * std::sin(th); });
  const Point x(0.3, -0.4);
  const double r = x.norm(), th = std::atan2(x.y(), x.x());
  CHECK(f(x) == doctest::Approx(1.0 + r * r * r * std::cos(3 * th) - 2.0 * r * std::sin(th)).epsilon(1e-13));
  CHECK_FALSE(f.accuracy_warning());
  // a log singularity just outside the disk forces doubling
  const FourierExtension g([](double th) { return std::log((Point(std::cos(th), std::sin(th)) - Point(1.0001, 0)).norm()); });
  CHECK(g.nodes() > 512);
}

TEST_CASE("bubble profiles: Laplacian matches the density") {
  Fixture F;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-0.7, 0.7);
  for (int which = 0; which < 2; ++which)
    for (int k = 0; k < 10; ++k) {
      const Point x(U(rng), U(rng));
      if ((x - F.an.center(which)).norm() < 0.05) continue;
      const double h = 1e-3;
      const double lap = fd_laplacian_r([&](const Point& y) { return F.an.bubble_value(which, y); }, x, h);
      CHECK(-lap == doctest::Approx(F.an.bubble_density(which, x)).epsilon(2e-4).scale(1e-6));
      const double lh = fd_laplacian([&](const Point& y) { return F.an.harmonic_correction_exact(which, y); }, x, h);
      CHECK(std::abs(lh) < 1e-5);
    }
}

TEST_CASE("ansatz vanishes on the boundary with the exact correction") {
  Fixture F;
  double worst = 0.0;
  for (int j = 0; j < 360; ++j) {
    const double th = 2 * kPi * j / 360;
    worst = std::max(worst, std::abs(F.an.U(Point(std::cos(th), std::sin(th)))));
  }
  CHECK(worst < 1e-9);
  // the closed form leaves an O(eps^2 mu^2) trace
  double closed = 0.0;
  for (int j = 0; j < 36; ++j) {
    const double th = 2 * kPi * j / 36;
    closed = std::max(closed, std::abs(F.an.U(Point(std::cos(th), std::sin(th)), HMode::closed)));
  }
  CHECK(closed > worst);
}

TEST_CASE("field sample consistency and pictures") {
  Fixture F;
  const Point x(0.2, -0.25);
  const FieldSample s = F.an.sample(x);
  CHECK(s.W == doctest::Approx(F.an.W_hat(x)).epsilon(1e-14));
  CHECK(s.E == doctest::Approx(s.W - F.an.laplacian_U_negative(x)).epsilon(1e-14));
  CHECK(s.E == doctest::Approx(F.an.E_hat(x)).epsilon(1e-14));
  const Point y = F.an.to_y(x);
  const double e2 = F.cfg.eps0 * F.cfg.eps0;
  CHECK(F.an.W_y(y) == doctest::Approx(e2 * s.W).epsilon(1e-13));
  CHECK(F.an.V_y(y) == doctest::Approx(s.U - 2 * F.spec.t).epsilon(1e-13));
  CHECK(F.an.W_hat_at(F.an.center(1) + Point(1e-3, 0), 1, Point(1e-3, 0)) ==
        doctest::Approx(F.an.W_hat(F.an.center(1) + Point(1e-3, 0))).epsilon(1e-12));
  CHECK(F.an.laplacian_U_negative(x) > 0.0);
}

TEST_CASE("W_hat at p follows the sign of alpha") {
  DiskDomain dom;
  const ProblemSpec s = ProblemSpec::make(-0.5, 0, 10);
  const BubbleConfig c = build_config(s, {}, dom);
  const Ansatz a(s, c, dom, HMode::exact);
  CHECK_THROWS_AS(a.W_hat(Point::Zero()), DomainError);
  CHECK(std::isfinite(a.W_hat(Point(1e-9, 0))));
}

TEST_CASE("nonlinear remainder series and direct formula agree") {
  for (double phi : {-0.3, -0.09, -1e-4, 0.0, 1e-6, 0.05, 0.099, 0.2, 2.0}) {
    // long double Taylor sum as the oracle
    long double term = phi, sum = 0.0L;
    for (int k = 2; k < 60; ++k) {
      term *= static_cast<long double>(phi) / k;
      sum += term;
    }
    const double oracle = static_cast<double>(3.0L * sum);
    CHECK(nonlinear_N_value(3.0, phi) == doctest::Approx(oracle).epsilon(1e-13).scale(1e-300));
  }
  CHECK(nonlinear_N_value(2.0, 0.0) == 0.0);
}

TEST_CASE("kernels solve the linearized equations") {
  const double alpha = 0.5;
  const std::vector<Point> zs{Point(0.7, 0.2), Point(-1.3, 0.4), Point(2.0, -2.5)};
  for (const Point& z : zs) {
    const double h = 1e-3;
    const double w = 8.0 / std::pow(1.0 + z.squaredNorm(), 2);
    for (int j = 0; j <= 2; ++j) {
      auto f = [&](const Point& y) { return j == 0 ? calZ_0(y) : calZ_j(j, y); };
      CHECK(std::abs(fd_laplacian(f, z, h) + w * f(z)) < 1e-5);
    }
    const double q = std::pow(z.squaredNorm(), 1 + alpha);
    const double wp = 8 * (1 + alpha) * (1 + alpha) * std::pow(z.squaredNorm(), alpha) / ((1 + q) * (1 + q));
    auto fp = [&](const Point& y) { return calZ_p(y, alpha); };
    CHECK(std::abs(fd_laplacian(fp, z, h) + wp * fp(z)) < 1e-5);
  }
  CHECK_THROWS_AS(calZ_j(3, Point(1, 0)), DomainError);
}

TEST_CASE("cutoff is C2 across its transition") {
  const double R0 = 10.0;
  CHECK(cutoff(9.0, R0) == 1.0);
  CHECK(cutoff(11.5, R0) == 0.0);
  CHECK(cutoff(10.5, R0) == doctest::Approx(0.5));
  const double h = 1e-4;
  for (double r : {R0, R0 + 1.0}) {
    const double d1 = (cutoff(r + h, R0) - cutoff(r - h, R0)) / (2 * h);
    const double d2 = (cutoff(r + h, R0) - 2 * cutoff(r, R0) + cutoff(r - h, R0)) / (h * h);
    CHECK(std::abs(d1) < 1e-6);
    CHECK(std::abs(d2) < 1e-2);
  }
}

TEST_CASE("kernel set and star norm") {
  Fixture F;
  const KernelSet ks(F.an);
  const Point y = F.an.to_y(F.an.center(1));
  CHECK(ks.chi(1, y) == 1.0);
  CHECK(ks.Z(1, 1, y) == doctest::Approx(0.0).scale(1.0));
  CHECK(ks.gamma(0) == doctest::Approx(F.cfg.width0() / F.cfg.eps0));
  const Point x(0.1, 0.1);
  CHECK(star_weight_y(F.an, F.an.to_y(x)) == doctest::Approx(F.cfg.eps0 * F.cfg.eps0 * star_weight_x(F.an, x)));
  const auto n1 = star_norm_x(F.an, [&](const Point& z) { return star_weight_x(F.an, z); });
  CHECK(n1.value == doctest::Approx(1.0));
  const auto a = star_norm_samples(F.an, 3), b = star_norm_samples(F.an, 3);
  REQUIRE(a.size() == b.size());
  CHECK(a.back() == b.back());
}

TEST_CASE("field dump writes csv and sidecar") {
  Fixture F;
  const auto dir = std::filesystem::temp_directory_path() / "bubbler_unit_dump";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "f.csv").string();
  dump_fields(F.an, {Point(0.1, 0.2), Point(-0.3, 0.0)}, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "x1,x2,U,W_hat,E_hat");
  CHECK(std::filesystem::exists(dir / "f.json"));
}
