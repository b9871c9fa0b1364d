#include "bubbler/params.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "bubbler/errors.hpp"

namespace bubbler {

double beta_of(int m, double alpha) { return 0.5 * (m + 1.0) * (m + 1.0 + alpha); }

double default_alpha_hat(double alpha) { return 0.5 * (-1.0 + std::min(alpha, -2.0 / 3.0)); }

ProblemSpec ProblemSpec::make(double alpha, int m, double t, std::optional<double> alpha_hat, double d, double R0) {
  ProblemSpec s;
  s.alpha = alpha;
  s.m = m;
  s.t = t;
  s.d = d;
  s.R0 = R0;
  s.beta = beta_of(m, alpha);
  s.alpha_hat = alpha_hat ? *alpha_hat : default_alpha_hat(alpha);
  s.validate();
  return s;
}

void ProblemSpec::validate() const {
  if (!std::isfinite(alpha) || alpha <= -1.0)
    throw ConfigurationError("alpha must be a finite number greater than -1");
  const double nearest = std::round(alpha);
  if (nearest >= 1.0 && std::abs(alpha - nearest) < 1e-9) {
    std::ostringstream os;
    os << "alpha = " << alpha << " rejected: alpha in (-1, inf) minus the positive integers is required "
       << "(integer alpha changes the kernel of the linearized problem)";
    throw ConfigurationError(os.str());
  }
  if (m < 0) throw ConfigurationError("m must be a nonnegative integer");
  if (!std::isfinite(t) || t <= 0.0) throw ConfigurationError("t must be positive");
  if (p.norm() != 0.0) throw ConfigurationError("the singular point p must be the origin on the unit disk");
  if (!(d > 0.0 && d < 1.0)) throw ConfigurationError("d must lie in (0, 1)");
  if (!(R0 > 0.0)) throw ConfigurationError("R0 must be positive");
  const double hi = std::min(alpha, -2.0 / 3.0);
  if (!(alpha_hat > -1.0 && alpha_hat < hi))
    throw ConfigurationError("alpha_hat must satisfy -1 < alpha_hat < min(alpha, -2/3)");
  if (beta != beta_of(m, alpha)) throw ConfigurationError("beta is inconsistent with (m, alpha)");
}

double BubbleConfig::narrowest_width() const {
  double w = width0();
  for (int i = 0; i < m(); ++i) w = std::min(w, s(i));
  return w;
}

double ConcentrationParams::mu0() const { return std::exp(log_mu0); }

std::vector<double> ConcentrationParams::mu() const {
  std::vector<double> out;
  out.reserve(log_mu.size());
  for (double l : log_mu) out.push_back(std::exp(l));
  return out;
}

ConcentrationParams concentration_params(const ProblemSpec& spec, const PointList& xi, const DiskDomain& dom) {
  const double a = spec.alpha;
  const Point p = spec.p;
  const int m = static_cast<int>(xi.size());
  for (int i = 0; i < m; ++i) {
    if (!DiskDomain::contains(xi[i])) throw ConfigurationError("bubble center outside the open unit disk");
    if ((xi[i] - p).norm() == 0.0) throw ConfigurationError("bubble center coincides with p");
    for (int j = 0; j < i; ++j)
      if ((xi[i] - xi[j]).norm() == 0.0) throw ConfigurationError("coincident bubble centers");
  }

  ConcentrationParams out;
  double rhs0 = (1.0 + a) * dom.regular_part(p, p);
  for (int j = 0; j < m; ++j) rhs0 += dom.green(p, xi[j]);
  out.log_mu0 = 0.5 * (dom.log_k(p) - std::log(8.0 * (1.0 + a) * (1.0 + a)) + rhs0);

  out.log_mu.resize(m);
  for (int i = 0; i < m; ++i) {
    double rhs = dom.regular_part(xi[i], xi[i]) + (1.0 + a) * dom.green(xi[i], p);
    for (int j = 0; j < m; ++j)
      if (j != i) rhs += dom.green(xi[i], xi[j]);
    const double log_weight = dom.log_k(xi[i]) + 2.0 * a * std::log((xi[i] - p).norm());
    out.log_mu[i] = 0.5 * (log_weight - std::log(8.0) + rhs);
  }
  return out;
}

BubbleConfig build_config(const ProblemSpec& spec, const PointList& xi, const DiskDomain& dom) {
  if (static_cast<int>(xi.size()) != spec.m) throw ConfigurationError("number of centers differs from m");
  const ConcentrationParams cp = concentration_params(spec, xi, dom);
  BubbleConfig c;
  c.xi = xi;
  c.alpha = spec.alpha;
  c.t = spec.t;
  c.log_mu0 = cp.log_mu0;
  c.log_mu = cp.log_mu;
  c.mu0 = cp.mu0();
  c.mu = cp.mu();
  c.eps0 = std::exp(-0.5 * spec.t);
  c.rho0 = std::exp(-0.5 * spec.t / (1.0 + spec.alpha));
  c.v0 = std::exp(cp.log_mu0 / (1.0 + spec.alpha));
  for (int i = 0; i < spec.m; ++i) {
    const double f = dom.phi1(xi[i]);
    c.eps.push_back(std::exp(-0.5 * spec.t * f));
    c.gamma.push_back(std::exp(-0.5 * spec.t * f + cp.log_mu[i] + 0.5 * spec.t));
  }
  return c;
}

ConfigSpaceReport in_configuration_space(const ProblemSpec& spec, const PointList& xi, const DiskDomain& dom) {
  ConfigSpaceReport r;
  r.min_slack = std::numeric_limits<double>::infinity();
  const double sep = std::pow(spec.t, -spec.beta);
  const double level = 1.0 / std::sqrt(spec.t);
  auto check = [&](const char* name, int i, int j, double lhs, double bound, bool upper) {
    // upper: lhs <= bound; otherwise lhs >= bound
    const double slack = upper ? bound - lhs : lhs - bound;
    const double scale = std::max(std::abs(bound), 1e-300);
    const double rel = slack / scale;
    r.min_slack = std::min(r.min_slack, rel);
    if (std::abs(rel) <= 1e-12) {
      r.on_boundary = true;
    } else if (rel < 0.0) {
      r.inside = false;
      r.violations.push_back({name, i, j, slack});
    }
  };
  const int m = static_cast<int>(xi.size());
  for (int i = 0; i < m; ++i) {
    const double dist = (xi[i] - spec.p).norm();
    check("|xi_i - p| <= d", i, -1, dist, spec.d, true);
    check("|xi_i - p| >= t^-beta", i, -1, dist, sep, false);
    for (int j = i + 1; j < m; ++j) check("|xi_i - xi_j| >= t^-beta", i, j, (xi[i] - xi[j]).norm(), sep, false);
    check("1 - phi1(xi_i) <= 1/sqrt(t)", i, -1, 1.0 - dom.phi1(xi[i]), level, true);
  }
  if (m == 0) r.min_slack = 0.0;
  return r;
}

BoundsReport theorem_bounds_check(const BubbleConfig& cfg, const ProblemSpec& spec) {
  BoundsReport b;
  const double lt = std::log(spec.t);
  const int m = cfg.m();
  b.log_mu0_ratio = cfg.log_mu0 - 2.0 * m * spec.beta * lt;
  b.mu0_ratio = std::exp(b.log_mu0_ratio);
  b.mu_min = cfg.mu0;
  for (int i = 0; i < m; ++i) {
    const double lr = cfg.log_mu[i] - (2.0 * m + spec.alpha) * spec.beta * lt;
    b.log_mu_ratio.push_back(lr);
    b.mu_ratio.push_back(std::exp(lr));
    b.mu_min = std::min(b.mu_min, cfg.mu[i]);
  }
  return b;
}

}  // namespace bubbler
