#include "bubbler/domain.hpp"

#include <cmath>

#include "bubbler/bessel.hpp"
#include "bubbler/errors.hpp"

namespace bubbler {
namespace {

constexpr double kBoundarySlack = 1e-12;

void require_interior_source(const Point& y) {
  if (!(y.squaredNorm() < 1.0)) throw DomainError("source point must lie in the open unit disk");
}

void require_closed_disk(const Point& x) {
  if (x.norm() > 1.0 + kBoundarySlack) throw DomainError("evaluation point outside the closed unit disk");
}

// |1 - x conj(y)|^2 = |x - y|^2 + (1 - |x|^2)(1 - |y|^2)
double image_distance_sq(const Point& x, const Point& y) {
  return (x - y).squaredNorm() + (1.0 - x.squaredNorm()) * (1.0 - y.squaredNorm());
}

}  // namespace

HSpec::Kind HSpec::kind_from_string(const std::string& s) {
  if (s == "zero") return Kind::zero;
  if (s == "constant") return Kind::constant;
  if (s == "radial_poly") return Kind::radial_poly;
  throw ConfigurationError("unsupported h_spec kind '" + s + "' (expected zero, constant or radial_poly)");
}

std::string HSpec::kind_to_string(Kind k) {
  switch (k) {
    case Kind::zero: return "zero";
    case Kind::constant: return "constant";
    case Kind::radial_poly: return "radial_poly";
  }
  return "zero";
}

double EigenPair::phi1(const Point& x) const { return bessel::j0(j01 * x.norm()); }

Point EigenPair::grad_phi1(const Point& x) const {
  const double r = x.norm();
  if (r == 0.0) return Point::Zero();
  return (-j01 * bessel::j1(j01 * r) / r) * x;
}

EigenPair eigenpair() {
  EigenPair e;
  e.j01 = bessel::j0_first_zero();
  e.lambda1 = e.j01 * e.j01;
  return e;
}

PotentialData::PotentialData(HSpec h, double alpha) : spec_(std::move(h)), alpha_(alpha) {
  switch (spec_.kind) {
    case HSpec::Kind::zero:
      if (!spec_.coeffs.empty()) throw ConfigurationError("h_spec 'zero' takes no coefficients");
      break;
    case HSpec::Kind::constant:
      if (spec_.coeffs.size() != 1) throw ConfigurationError("h_spec 'constant' takes exactly one coefficient");
      a_ = spec_.coeffs;
      break;
    case HSpec::Kind::radial_poly:
      if (spec_.coeffs.empty()) throw ConfigurationError("h_spec 'radial_poly' needs at least one coefficient");
      a_ = spec_.coeffs;
      break;
  }
  for (double c : a_)
    if (!std::isfinite(c)) throw ConfigurationError("h_spec coefficients must be finite");
}

double PotentialData::h(const Point& x) const {
  const double r2 = x.squaredNorm();
  double v = 0.0;
  for (auto it = a_.rbegin(); it != a_.rend(); ++it) v = v * r2 + *it;
  return v;
}

// -Delta (1 - r^{2i+2}) / (2i+2)^2 = r^{2i}, and the lift vanishes on r = 1.
double PotentialData::rho(const Point& x) const {
  const double r2 = x.squaredNorm();
  double v = 0.0;
  double r2i1 = r2;  // r^{2i+2}
  for (std::size_t i = 0; i < a_.size(); ++i) {
    const double q = 2.0 * static_cast<double>(i) + 2.0;
    v += a_[i] * (1.0 - r2i1) / (q * q);
    r2i1 *= r2;
  }
  return v;
}

// H(x, 0) = 2 log(|x|^2 + 1 - |x|^2) = 0 on the disk, so only rho survives for p = 0;
// the general expression is kept so the formula reads as stated.
double PotentialData::log_k(const Point& x) const {
  const double h_xp = 2.0 * std::log(image_distance_sq(x, Point::Zero()));
  return -rho(x) - 0.5 * alpha_ * h_xp;
}

double PotentialData::k(const Point& x) const { return std::exp(log_k(x)); }

PotentialData lift_h(const HSpec& h, double alpha) { return PotentialData(h, alpha); }

DiskDomain::DiskDomain(HSpec h, double alpha) : eig_(eigenpair()), pot_(std::move(h), alpha) {}

double DiskDomain::green(const Point& x, const Point& y) const {
  require_interior_source(y);
  require_closed_disk(x);
  const double d2 = (x - y).squaredNorm();
  if (d2 == 0.0) throw DomainError("green: coincident points");
  // 4 log(|1 - x conj(y)| / |x - y|); vanishes exactly when |x| = 1
  const double ratio = (1.0 - x.squaredNorm()) * (1.0 - y.squaredNorm()) / d2;
  return 2.0 * std::log1p(ratio);
}

Point DiskDomain::green_gradient_x(const Point& x, const Point& y) const {
  require_interior_source(y);
  const double d2 = (x - y).squaredNorm();
  if (d2 == 0.0) throw DomainError("green: coincident points");
  return regular_part_gradient_x(x, y) - (4.0 / d2) * (x - y);
}

double DiskDomain::regular_part(const Point& x, const Point& y) const {
  require_interior_source(y);
  require_closed_disk(x);
  return 2.0 * std::log(image_distance_sq(x, y));
}

Point DiskDomain::regular_part_gradient_x(const Point& x, const Point& y) const {
  require_interior_source(y);
  const double D = image_distance_sq(x, y);
  return (2.0 / D) * (2.0 * (x - y) - 2.0 * (1.0 - y.squaredNorm()) * x);
}

}  // namespace bubbler
