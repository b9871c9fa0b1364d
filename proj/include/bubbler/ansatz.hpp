#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "bubbler/domain.hpp"
#include "bubbler/params.hpp"
#include "bubbler/types.hpp"

namespace bubbler {

enum class HMode { exact, closed };

/// Harmonic extension of boundary data given by a trapezoid Fourier series on the unit circle.
class FourierExtension {
 public:
  FourierExtension() = default;
  /// Samples g on n_b equispaced nodes, doubling n_b (up to cap) until the tail is below tol.
  FourierExtension(const std::function<double(double)>& g_of_theta, int n_b = 512, int cap = 8192,
                   double tol = 1e-15);
  double operator()(const Point& x) const;
  int nodes() const { return n_b_; }
  int terms() const { return static_cast<int>(c_.size()); }
  bool accuracy_warning() const { return warning_; }
  /// max |c_n| over the upper quarter of the spectrum, relative to the data scale
  double tail() const { return tail_; }

 private:
  std::vector<std::complex<double>> c_;  // c_0 = a_0, c_n = a_n - i b_n
  int n_b_ = 0;
  bool warning_ = false;
  double tail_ = 0.0;
};

/// Pointwise values of the ansatz at one x.
struct FieldSample {
  double U = 0.0;
  double W = 0.0;        ///< density W_hat
  double E = 0.0;        ///< residual E_hat = Delta U + W_hat
  double bubble_sum = 0.0;  ///< -Delta U = sum of bubble densities
};

/// Bubble profiles, harmonic corrections, the ansatz and its density and residual, all in x.
/// Index 0 is the singular bubble at p, indices 1..m the planar bubbles at xi_1..xi_m.
class Ansatz {
 public:
  Ansatz(const ProblemSpec& spec, const BubbleConfig& cfg, const DiskDomain& dom, HMode mode = HMode::exact,
         int n_b = 512);

  int count() const { return m_ + 1; }
  const BubbleConfig& config() const { return cfg_; }
  const ProblemSpec& spec() const { return spec_; }
  const DiskDomain& domain() const { return dom_; }
  HMode mode() const { return mode_; }
  Point center(int which) const { return which == 0 ? spec_.p : cfg_.xi[which - 1]; }
  /// bubble scale in its own radial variable: eps0 mu0 for 0, eps_i mu_i otherwise
  double scale(int which) const { return which == 0 ? cfg_.s0() : cfg_.s(which - 1); }
  /// spatial width in x: rho0 v0 for 0, eps_i mu_i otherwise
  double width(int which) const { return which == 0 ? cfg_.width0() : cfg_.s(which - 1); }

  double bubble_value(int which, const Point& x) const;
  double bubble_value_r(int which, double R) const;
  /// -Delta u_which, explicit
  double bubble_density(int which, const Point& x) const;
  double bubble_density_r(int which, double R) const;
  /// |x - center(which)|, taken from rel when x was laid out around that center
  double distance(int which, const Point& x, int anchor, const Point& rel) const {
    return anchor == which ? rel.norm() : (x - center(which)).norm();
  }
  /// log(8 mu^2 ... / k ...), the constant in u_which
  double profile_constant(int which) const { return logc_[which]; }

  double harmonic_correction_exact(int which, const Point& x) const;
  double harmonic_correction_closed(int which, const Point& x) const;
  double harmonic_correction(int which, const Point& x) const;
  const FourierExtension& extension(int which) const { return ext_[which]; }
  bool accuracy_warning() const;

  double U_i(int which, const Point& x) const { return bubble_value(which, x) + harmonic_correction(which, x); }
  double U(const Point& x) const;
  double U(const Point& x, HMode mode) const;
  double W_hat(const Point& x) const;
  /// W_hat with the anchored distance used for the anchor's own bubble
  double W_hat_at(const Point& x, int anchor, const Point& rel) const;
  double E_hat(const Point& x) const;
  /// -Delta U, i.e. the sum of the bubble densities
  double laplacian_U_negative(const Point& x) const;
  FieldSample sample(const Point& x) const;
  /// W_hat (e^phi - 1 - phi)
  double nonlinear_N(const Point& x, double phi) const;

  /// y-picture: W(y) = eps0^2 W_hat(eps0 y), E(y) = eps0^2 E_hat(eps0 y), V(y) = U(eps0 y) - 2t.
  double W_y(const Point& y) const;
  double E_y(const Point& y) const;
  double V_y(const Point& y) const;
  Point to_x(const Point& y) const { return cfg_.eps0 * y; }
  Point to_y(const Point& x) const { return x / cfg_.eps0; }

 private:
  ProblemSpec spec_;
  BubbleConfig cfg_;
  DiskDomain dom_;
  HMode mode_;
  int m_;
  std::vector<double> logc_;   // profile constants
  std::vector<double> logs2_;  // 2 log(scale)
  std::vector<double> s2_;
  std::vector<FourierExtension> ext_;
};

/// W_hat (e^phi - 1 - phi), series for small |phi|.
double nonlinear_N_value(double W, double phi);
/// d/dphi of nonlinear_N_value divided by W: e^phi - 1
double expm1_safe(double phi);

// ---- kernels and cutoffs ----

double calZ_p(const Point& z, double alpha);
double calZ_0(const Point& z);
/// j = 1, 2
double calZ_j(int j, const Point& z);

/// radial cutoff: 1 on [0, R0], 0 beyond R0 + 1, C^2 quintic ramp in between
double cutoff(double r, double R0);

class KernelSet {
 public:
  explicit KernelSet(const Ansatz& a);

  /// y-picture kernels
  double Z_p(const Point& y) const;
  /// i in 1..m, j in 0..2
  double Z(int i, int j, const Point& y) const;
  double chi_p(const Point& y) const;
  double chi(int i, const Point& y) const;

  /// x-picture: z variable around center i (0 = p uses rho0 v0)
  Point z_of_x(int i, const Point& x) const;
  double Z_x(int i, int j, const Point& x) const;  ///< Z_ij(x / eps0)
  double chi_x(int i, const Point& x) const;
  double gamma(int i) const;

 private:
  const Ansatz& a_;
};

// ---- weighted sup norm ----

struct StarNormResult {
  double value = 0.0;
  Point argmax = Point::Zero();
  std::size_t samples = 0;
};

/// Structured sample set: 64 angles x 80 log-radial shells per center plus far_points seeded points.
PointList star_norm_samples(const Ansatz& a, std::uint64_t seed = 0, int far_points = 2048);

/// x-picture weight, equal to the y-picture bracket divided by eps0^2.
double star_weight_x(const Ansatz& a, const Point& x);
double star_weight_y(const Ansatz& a, const Point& y);

/// sup |f|/weight for f given in x with the x-picture convention h(y) = eps0^2 f(x)
StarNormResult star_norm_x(const Ansatz& a, const std::function<double(const Point&)>& f, std::uint64_t seed = 0);
/// same sup for f given in the y-picture
StarNormResult star_norm_y(const Ansatz& a, const std::function<double(const Point&)>& f, std::uint64_t seed = 0);

/// CSV x1,x2,U,W_hat,E_hat plus a JSON sidecar with the configuration.
void dump_fields(const Ansatz& a, const PointList& pts, const std::string& csv_path);

}  // namespace bubbler
