#include "bubbler/ansatz.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

#include "bubbler/errors.hpp"
#include "bubbler/json_io.hpp"

namespace bubbler {
namespace {

double logaddexp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double hi = std::max(a, b), lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

// ---------------------------------------------------------------- FourierExtension

FourierExtension::FourierExtension(const std::function<double(double)>& g, int n_b, int cap, double tol) {
  if (n_b < 8 || n_b % 2 != 0) throw ConfigurationError("boundary node count must be even and >= 8");
  for (int n = n_b;; n *= 2) {
    std::vector<double> samples(n);
    double scale = 0.0;
    for (int k = 0; k < n; ++k) {
      samples[k] = g(2.0 * kPi * k / n);
      if (!std::isfinite(samples[k])) throw DomainError("non-finite boundary trace");
      scale = std::max(scale, std::abs(samples[k]));
    }
    std::vector<double> cs(n), sn(n);
    for (int k = 0; k < n; ++k) {
      cs[k] = std::cos(2.0 * kPi * k / n);
      sn[k] = std::sin(2.0 * kPi * k / n);
    }
    const int top = n / 2;  // Nyquist excluded
    std::vector<std::complex<double>> c(top);
    for (int j = 0; j < top; ++j) {
      double a = 0.0, b = 0.0, ca = 0.0, cb = 0.0;  // Kahan
      for (int k = 0; k < n; ++k) {
        const int idx = static_cast<int>((static_cast<long long>(j) * k) % n);
        double ya = samples[k] * cs[idx] - ca;
        double ta = a + ya;
        ca = (ta - a) - ya;
        a = ta;
        double yb = samples[k] * sn[idx] - cb;
        double tb = b + yb;
        cb = (tb - b) - yb;
        b = tb;
      }
      if (j == 0)
        c[j] = {a / n, 0.0};
      else
        c[j] = {2.0 * a / n, -2.0 * b / n};
    }
    scale = std::max(scale, 1.0);
    double tail = 0.0;
    for (int j = top / 2; j < top; ++j) tail = std::max(tail, std::abs(c[j]));
    tail_ = tail / scale;
    n_b_ = n;
    int last = top - 1;
    while (last > 0 && std::abs(c[last]) <= 1e-18 * scale) --last;
    c.resize(last + 1);
    c_ = std::move(c);
    if (tail_ <= tol) break;
    if (2 * n > cap) {
      warning_ = true;
      break;
    }
  }
}

double FourierExtension::operator()(const Point& x) const {
  if (c_.empty()) return 0.0;
  const std::complex<double> z(x.x(), x.y());
  std::complex<double> acc = c_.back();
  for (int n = static_cast<int>(c_.size()) - 2; n >= 0; --n) acc = acc * z + c_[n];
  return acc.real();
}

// ---------------------------------------------------------------- Ansatz

Ansatz::Ansatz(const ProblemSpec& spec, const BubbleConfig& cfg, const DiskDomain& dom, HMode mode, int n_b)
    : spec_(spec), cfg_(cfg), dom_(dom), mode_(mode), m_(cfg.m()) {
  const double a = spec.alpha;
  logc_.resize(m_ + 1);
  logs2_.resize(m_ + 1);
  s2_.resize(m_ + 1);
  logc_[0] = std::log(8.0 * (1.0 + a) * (1.0 + a)) + 2.0 * cfg.log_mu0 - dom.log_k(spec.p);
  logs2_[0] = -spec.t + 2.0 * cfg.log_mu0;
  for (int i = 1; i <= m_; ++i) {
    const Point& xi = cfg.xi[i - 1];
    logc_[i] = std::log(8.0) + 2.0 * cfg.log_mu[i - 1] - dom.log_k(xi) - 2.0 * a * std::log((xi - spec.p).norm());
    logs2_[i] = -spec.t * dom.phi1(xi) + 2.0 * cfg.log_mu[i - 1];
  }
  for (int i = 0; i <= m_; ++i) s2_[i] = std::exp(logs2_[i]);

  ext_.reserve(m_ + 1);
  for (int i = 0; i <= m_; ++i) {
    ext_.emplace_back([this, i](double th) { return -bubble_value(i, Point(std::cos(th), std::sin(th))); }, n_b);
  }
}

double Ansatz::bubble_value(int which, const Point& x) const { return bubble_value_r(which, (x - center(which)).norm()); }

double Ansatz::bubble_value_r(int which, double R) const {
  const double kappa = which == 0 ? 2.0 + 2.0 * spec_.alpha : 2.0;
  const double logR = R > 0.0 ? kappa * std::log(R) : -std::numeric_limits<double>::infinity();
  return logc_[which] - 2.0 * logaddexp(logs2_[which], logR);
}

double Ansatz::bubble_density(int which, const Point& x) const {
  return bubble_density_r(which, (x - center(which)).norm());
}

double Ansatz::bubble_density_r(int which, double R) const {
  const double s2 = s2_[which];
  if (which == 0) {
    const double a = spec_.alpha;
    const double c = 8.0 * (1.0 + a) * (1.0 + a);
    if (R == 0.0) {
      if (a > 0.0) return 0.0;
      if (a == 0.0) return c / s2;
      throw DomainError("singular density evaluated at p with alpha < 0");
    }
    const double q = std::pow(R, 2.0 + 2.0 * a) / s2;
    return c * std::pow(R, 2.0 * a) / (s2 * (1.0 + q) * (1.0 + q));
  }
  const double q = R * R / s2;
  return 8.0 / (s2 * (1.0 + q) * (1.0 + q));
}

double Ansatz::harmonic_correction_exact(int which, const Point& x) const { return ext_[which](x); }

double Ansatz::harmonic_correction_closed(int which, const Point& x) const {
  if (which == 0) return (1.0 + spec_.alpha) * dom_.regular_part(x, spec_.p) - logc_[0];
  return dom_.regular_part(x, cfg_.xi[which - 1]) - logc_[which];
}

double Ansatz::harmonic_correction(int which, const Point& x) const {
  return mode_ == HMode::exact ? harmonic_correction_exact(which, x) : harmonic_correction_closed(which, x);
}

bool Ansatz::accuracy_warning() const {
  return std::any_of(ext_.begin(), ext_.end(), [](const FourierExtension& e) { return e.accuracy_warning(); });
}

double Ansatz::U(const Point& x) const { return U(x, mode_); }

double Ansatz::U(const Point& x, HMode mode) const {
  double u = 0.0;
  for (int i = 0; i <= m_; ++i)
    u += bubble_value(i, x) +
         (mode == HMode::exact ? harmonic_correction_exact(i, x) : harmonic_correction_closed(i, x));
  return u;
}

double Ansatz::laplacian_U_negative(const Point& x) const {
  double s = 0.0;
  for (int i = 0; i <= m_; ++i) s += bubble_density(i, x);
  return s;
}

double Ansatz::W_hat(const Point& x) const {
  const double r = (x - spec_.p).norm();
  const double a = spec_.alpha;
  if (r == 0.0 && a < 0.0) throw DomainError("W_hat evaluated at p with alpha < 0");
  const double log_sing = r == 0.0 ? (a == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity())
                                   : 2.0 * a * std::log(r);
  return std::exp(log_sing + dom_.log_k(x) - spec_.t * dom_.phi1(x) + U(x));
}

double Ansatz::W_hat_at(const Point& x, int anchor, const Point& rel) const {
  const double r = anchor == 0 ? rel.norm() : (x - spec_.p).norm();
  const double a = spec_.alpha;
  if (r == 0.0 && a < 0.0) throw DomainError("W_hat evaluated at p with alpha < 0");
  const double log_sing = r == 0.0 ? (a == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity())
                                   : 2.0 * a * std::log(r);
  double u = 0.0;
  for (int i = 0; i <= m_; ++i) u += bubble_value_r(i, distance(i, x, anchor, rel)) + harmonic_correction(i, x);
  return std::exp(log_sing + dom_.log_k(x) - spec_.t * dom_.phi1(x) + u);
}

double Ansatz::E_hat(const Point& x) const { return W_hat(x) - laplacian_U_negative(x); }

FieldSample Ansatz::sample(const Point& x) const {
  FieldSample f;
  f.U = U(x);
  const double r = (x - spec_.p).norm();
  const double a = spec_.alpha;
  if (r == 0.0 && a < 0.0) throw DomainError("W_hat evaluated at p with alpha < 0");
  const double log_sing = r == 0.0 ? (a == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity())
                                   : 2.0 * a * std::log(r);
  f.W = std::exp(log_sing + dom_.log_k(x) - spec_.t * dom_.phi1(x) + f.U);
  f.bubble_sum = laplacian_U_negative(x);
  f.E = f.W - f.bubble_sum;
  return f;
}

double Ansatz::nonlinear_N(const Point& x, double phi) const { return nonlinear_N_value(W_hat(x), phi); }

double Ansatz::W_y(const Point& y) const { return cfg_.eps0 * cfg_.eps0 * W_hat(to_x(y)); }
double Ansatz::E_y(const Point& y) const { return cfg_.eps0 * cfg_.eps0 * E_hat(to_x(y)); }
double Ansatz::V_y(const Point& y) const { return U(to_x(y)) - 2.0 * spec_.t; }

double nonlinear_N_value(double W, double phi) {
  double g;
  if (std::abs(phi) < 0.1) {
    // sum_{k>=2} phi^k / k!
    double term = 0.5 * phi * phi;
    g = 0.0;
    for (int k = 3; k < 20 && term != 0.0; ++k) {
      g += term;
      term *= phi / k;
    }
  } else {
    g = std::expm1(phi) - phi;
  }
  return W * g;
}

double expm1_safe(double phi) { return std::expm1(phi); }

// ---------------------------------------------------------------- kernels

double calZ_p(const Point& z, double alpha) {
  const double r2 = z.squaredNorm();
  if (r2 == 0.0) return -1.0;
  const double q = std::pow(r2, 1.0 + alpha);
  if (std::isinf(q)) return 1.0;
  return (q - 1.0) / (q + 1.0);
}

double calZ_0(const Point& z) {
  const double r2 = z.squaredNorm();
  return (r2 - 1.0) / (r2 + 1.0);
}

double calZ_j(int j, const Point& z) {
  if (j != 1 && j != 2) throw DomainError("kernel index j must be 1 or 2");
  return 4.0 * z[j - 1] / (z.squaredNorm() + 1.0);
}

double cutoff(double r, double R0) {
  if (r <= R0) return 1.0;
  if (r >= R0 + 1.0) return 0.0;
  const double s = r - R0;
  return 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
}

KernelSet::KernelSet(const Ansatz& a) : a_(a) {}

double KernelSet::gamma(int i) const {
  if (i == 0) return a_.config().width0() / a_.config().eps0;
  return a_.config().gamma[i - 1];
}

Point KernelSet::z_of_x(int i, const Point& x) const { return (x - a_.center(i)) / a_.width(i); }

double KernelSet::Z_p(const Point& y) const {
  const Point x = a_.to_x(y);
  return calZ_p(z_of_x(0, x), a_.spec().alpha) / gamma(0);
}

double KernelSet::Z(int i, int j, const Point& y) const { return Z_x(i, j, a_.to_x(y)); }

double KernelSet::Z_x(int i, int j, const Point& x) const {
  const Point z = z_of_x(i, x);
  const double v = j == 0 ? calZ_0(z) : calZ_j(j, z);
  return v / gamma(i);
}

double KernelSet::chi_p(const Point& y) const { return chi_x(0, a_.to_x(y)); }
double KernelSet::chi(int i, const Point& y) const { return chi_x(i, a_.to_x(y)); }
double KernelSet::chi_x(int i, const Point& x) const { return cutoff(z_of_x(i, x).norm(), a_.spec().R0); }

// ---------------------------------------------------------------- star norm

PointList star_norm_samples(const Ansatz& a, std::uint64_t seed, int far_points) {
  constexpr int kAngles = 64;
  constexpr int kShells = 80;
  PointList pts;
  pts.reserve((a.count()) * kAngles * kShells + far_points);
  for (int c = 0; c < a.count(); ++c) {
    const Point ctr = a.center(c);
    const double r_lo = 1e-3 * a.width(c);
    const double r_hi = 2.0;
    const double ratio = std::pow(r_hi / r_lo, 1.0 / (kShells - 1));
    double r = r_lo;
    for (int k = 0; k < kShells; ++k, r *= ratio) {
      for (int j = 0; j < kAngles; ++j) {
        const double th = 2.0 * kPi * (j + 0.5) / kAngles;
        const Point x = ctr + r * Point(std::cos(th), std::sin(th));
        if (x.squaredNorm() < 1.0) pts.push_back(x);
      }
    }
  }
  std::mt19937_64 rng(seed);
  for (int k = 0; k < far_points; ++k) {
    const double r = std::sqrt(unit_uniform(rng));
    const double th = 2.0 * kPi * unit_uniform(rng);
    const Point x(r * std::cos(th), r * std::sin(th));
    if (x.squaredNorm() < 1.0 && x.norm() > 0.0) pts.push_back(x);
  }
  return pts;
}

double star_weight_x(const Ansatz& a, const Point& x) {
  const BubbleConfig& c = a.config();
  const double ah = a.spec().alpha_hat;
  const double al = a.spec().alpha;
  const double w0 = c.width0();
  const double zp = (x - a.spec().p).norm() / w0;
  double w = 1.0;
  w += std::pow(zp, 2.0 * al) / (w0 * w0 * std::pow(1.0 + zp, 4.0 + 2.0 * ah + 2.0 * al));
  for (int i = 1; i < a.count(); ++i) {
    const double si = c.s(i - 1);
    const double zi = (x - c.xi[i - 1]).norm() / si;
    w += 1.0 / (si * si * std::pow(1.0 + zi, 4.0 + 2.0 * ah));
  }
  return w;
}

double star_weight_y(const Ansatz& a, const Point& y) {
  const double e = a.config().eps0;
  return e * e * star_weight_x(a, a.to_x(y));
}

namespace {

StarNormResult star_sup(const PointList& pts, const std::function<double(const Point&)>& ratio) {
  StarNormResult r;
  r.samples = pts.size();
  for (const Point& x : pts) {
    const double v = ratio(x);
    if (!std::isfinite(v)) {
      std::ostringstream os;
      os << std::setprecision(17) << "non-finite weighted sample at x = (" << x.x() << ", " << x.y() << ")";
      throw DomainError(os.str());
    }
    if (v > r.value) {
      r.value = v;
      r.argmax = x;
    }
  }
  return r;
}

}  // namespace

StarNormResult star_norm_x(const Ansatz& a, const std::function<double(const Point&)>& f, std::uint64_t seed) {
  const PointList pts = star_norm_samples(a, seed);
  return star_sup(pts, [&](const Point& x) { return std::abs(f(x)) / star_weight_x(a, x); });
}

StarNormResult star_norm_y(const Ansatz& a, const std::function<double(const Point&)>& f, std::uint64_t seed) {
  const PointList pts = star_norm_samples(a, seed);
  StarNormResult r = star_sup(pts, [&](const Point& x) {
    const Point y = a.to_y(x);
    return std::abs(f(y)) / star_weight_y(a, y);
  });
  return r;
}

// ---------------------------------------------------------------- dumps

void dump_fields(const Ansatz& a, const PointList& pts, const std::string& csv_path) {
  namespace fs = std::filesystem;
  std::ofstream out(csv_path);
  if (!out) throw std::runtime_error("cannot open " + csv_path + " for writing");
  out << "x1,x2,U,W_hat,E_hat\n" << std::setprecision(17);
  for (const Point& x : pts) {
    const FieldSample f = a.sample(x);
    out << x.x() << ',' << x.y() << ',' << f.U << ',' << f.W << ',' << f.E << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + csv_path);
  nlohmann::ordered_json side;
  side["fields"] = csv_path.substr(csv_path.find_last_of('/') + 1);
  side["spec"] = to_json(a.spec());
  side["config"] = to_json(a.config());
  side["h_mode"] = a.mode() == HMode::exact ? "exact" : "closed";
  side["points"] = pts.size();
  std::ofstream js(fs::path(csv_path).replace_extension(".json"));
  js << side.dump(2) << '\n';
  if (!js) throw std::runtime_error("write failed for sidecar of " + csv_path);
}

}  // namespace bubbler
