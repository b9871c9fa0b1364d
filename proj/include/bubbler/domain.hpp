#pragma once

#include <string>
#include <vector>

#include "bubbler/types.hpp"

namespace bubbler {

/// Forcing h of the original problem. Only families with an exact lift are supported.
struct HSpec {
  enum class Kind { zero, constant, radial_poly };
  Kind kind = Kind::zero;
  /// constant: {c}; radial_poly: h(x) = sum_i coeffs[i] |x|^{2i}.
  std::vector<double> coeffs;

  static HSpec zero() { return {}; }
  static HSpec constant(double c) { return {Kind::constant, {c}}; }
  static HSpec radial_poly(std::vector<double> a) { return {Kind::radial_poly, std::move(a)}; }

  static Kind kind_from_string(const std::string& s);
  static std::string kind_to_string(Kind k);
};

/// First Dirichlet eigenpair of the unit disk, normalized so phi1(0) = 1.
struct EigenPair {
  double j01 = 0.0;      ///< first zero of J0
  double lambda1 = 0.0;  ///< j01^2

  double phi1(const Point& x) const;
  Point grad_phi1(const Point& x) const;
  /// -Delta phi1 = lambda1 phi1, used by tests
  double laplacian_phi1(const Point& x) const { return -lambda1 * phi1(x); }
};

EigenPair eigenpair();

/// h, its zero-trace lift rho = (-Delta)^{-1} h, and the weight k = exp(-rho - alpha/2 H(., p)).
class PotentialData {
 public:
  PotentialData() = default;
  PotentialData(HSpec h, double alpha);

  double h(const Point& x) const;
  double rho(const Point& x) const;
  double k(const Point& x) const;
  double log_k(const Point& x) const;
  const HSpec& spec() const { return spec_; }
  double alpha() const { return alpha_; }

 private:
  HSpec spec_;
  double alpha_ = 0.0;
  std::vector<double> a_;  // radial polynomial coefficients of h
};

PotentialData lift_h(const HSpec& h, double alpha);

/// The unit disk with the singular point p at the origin (the unique maximum of phi1).
class DiskDomain {
 public:
  explicit DiskDomain(HSpec h = HSpec::zero(), double alpha = 0.0);

  static constexpr double radius() { return 1.0; }
  static Point p() { return Point::Zero(); }
  static bool contains(const Point& x) { return x.squaredNorm() < 1.0; }

  /// Dirichlet Green's function of -Delta with -Delta_x G(., y) = 8 pi delta_y.
  double green(const Point& x, const Point& y) const;
  Point green_gradient_x(const Point& x, const Point& y) const;
  /// H(x, y) = G(x, y) - 4 log(1/|x - y|), smooth in x including x = y.
  double regular_part(const Point& x, const Point& y) const;
  Point regular_part_gradient_x(const Point& x, const Point& y) const;

  const EigenPair& eigen() const { return eig_; }
  double phi1(const Point& x) const { return eig_.phi1(x); }
  Point grad_phi1(const Point& x) const { return eig_.grad_phi1(x); }
  double lambda1() const { return eig_.lambda1; }

  const PotentialData& potential() const { return pot_; }
  double k(const Point& x) const { return pot_.k(x); }
  double log_k(const Point& x) const { return pot_.log_k(x); }

 private:
  EigenPair eig_;
  PotentialData pot_;
};

}  // namespace bubbler
