#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bubbler/domain.hpp"
#include "bubbler/types.hpp"

namespace bubbler {

double beta_of(int m, double alpha);

/// Default alpha_hat: midpoint of (-1, min(alpha, -2/3)).
double default_alpha_hat(double alpha);

struct ProblemSpec {
  double alpha = 0.0;
  int m = 0;
  double t = 10.0;
  Point p = Point::Zero();
  double d = 0.3;
  double beta = 1.0;
  double alpha_hat = -5.0 / 6.0;
  double R0 = 10.0;

  /// Validates and fills beta and (unless given) alpha_hat.
  static ProblemSpec make(double alpha, int m, double t, std::optional<double> alpha_hat = std::nullopt,
                          double d = 0.3, double R0 = 10.0);
  void validate() const;
};

struct BubbleConfig {
  PointList xi;
  double mu0 = 0.0;
  std::vector<double> mu;
  double eps0 = 0.0;
  std::vector<double> eps;
  double rho0 = 0.0;
  double v0 = 0.0;
  std::vector<double> gamma;
  /// log mu0, log mu_i kept alongside: the scales underflow quickly in t.
  double log_mu0 = 0.0;
  std::vector<double> log_mu;

  double alpha = 0.0;
  double t = 0.0;

  int m() const { return static_cast<int>(xi.size()); }
  /// eps0 mu0, the scale of the p-bubble in its own variable |x|^{1+alpha}
  double s0() const { return eps0 * mu0; }
  /// eps_i mu_i, width of the i-th planar bubble
  double s(int i) const { return eps[i] * mu[i]; }
  /// (eps0 mu0)^{1/(1+alpha)} = rho0 v0, width of the p-bubble in x
  double width0() const { return rho0 * v0; }
  double narrowest_width() const;
};

struct ConcentrationParams {
  double log_mu0 = 0.0;
  std::vector<double> log_mu;
  double mu0() const;
  std::vector<double> mu() const;
};

ConcentrationParams concentration_params(const ProblemSpec& spec, const PointList& xi, const DiskDomain& dom);
BubbleConfig build_config(const ProblemSpec& spec, const PointList& xi, const DiskDomain& dom);

struct ConstraintViolation {
  std::string constraint;
  int index = -1;
  int other = -1;
  double slack = 0.0;  ///< negative when violated
};

struct ConfigSpaceReport {
  bool inside = true;
  bool on_boundary = false;
  std::vector<ConstraintViolation> violations;
  /// smallest slack among all constraints (scaled to their natural size)
  double min_slack = 0.0;
};

/// Membership in the closure of O_t. Equalities within a relative 1e-12 count as boundary, not violation.
ConfigSpaceReport in_configuration_space(const ProblemSpec& spec, const PointList& xi, const DiskDomain& dom);

struct BoundsReport {
  double mu0_ratio = 0.0;               ///< mu0 / t^{2 m beta}
  std::vector<double> mu_ratio;         ///< mu_i / t^{(2m+alpha) beta}
  double mu_min = 0.0;
  double log_mu0_ratio = 0.0;
  std::vector<double> log_mu_ratio;
};

BoundsReport theorem_bounds_check(const BubbleConfig& cfg, const ProblemSpec& spec);

}  // namespace bubbler
