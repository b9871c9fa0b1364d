#include "bubbler/energy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Dense>

#include "bubbler/errors.hpp"
#include "bubbler/parallel.hpp"

namespace bubbler {
namespace {

constexpr double k8Pi = 8.0 * kPi;

double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

Eigen::VectorXd flatten(const PointList& xi) {
  Eigen::VectorXd v(2 * xi.size());
  for (std::size_t i = 0; i < xi.size(); ++i) v.segment<2>(2 * i) = xi[i];
  return v;
}

PointList unflatten(const Eigen::VectorXd& v) {
  PointList xi(v.size() / 2);
  for (std::size_t i = 0; i < xi.size(); ++i) xi[i] = v.segment<2>(2 * i);
  return xi;
}

struct Constraint {
  std::string name;
  int i = -1, j = -1;
  double slack = 0.0;  // > 0 strictly feasible
  double scale = 1.0;
  Eigen::VectorXd grad;
};

std::vector<Constraint> constraints(const ProblemSpec& spec, const DiskDomain& dom, const Eigen::VectorXd& v) {
  const int m = static_cast<int>(v.size() / 2);
  const double sep = std::pow(spec.t, -spec.beta);
  const double lvl = 1.0 / std::sqrt(spec.t);
  std::vector<Constraint> cs;
  for (int i = 0; i < m; ++i) {
    const Point x = v.segment<2>(2 * i);
    const double r = x.norm();
    const Point u = r > 0 ? Point(x / r) : Point(1.0, 0.0);
    Constraint c;
    c.grad = Eigen::VectorXd::Zero(v.size());
    c.name = "|xi_i - p| <= d";
    c.i = i;
    c.slack = spec.d - r;
    c.scale = spec.d;
    c.grad.segment<2>(2 * i) = -u;
    cs.push_back(c);
    c.name = "|xi_i - p| >= t^-beta";
    c.slack = r - sep;
    c.scale = sep;
    c.grad.segment<2>(2 * i) = u;
    cs.push_back(c);
    c.name = "1 - phi1(xi_i) <= 1/sqrt(t)";
    c.slack = lvl - (1.0 - dom.phi1(x));
    c.scale = lvl;
    c.grad.segment<2>(2 * i) = dom.grad_phi1(x);
    cs.push_back(c);
    for (int j = i + 1; j < m; ++j) {
      const Point d = x - Point(v.segment<2>(2 * j));
      const double dn = d.norm();
      Constraint e;
      e.name = "|xi_i - xi_j| >= t^-beta";
      e.i = i;
      e.j = j;
      e.slack = dn - sep;
      e.scale = sep;
      e.grad = Eigen::VectorXd::Zero(v.size());
      if (dn > 0) {
        e.grad.segment<2>(2 * i) = d / dn;
        e.grad.segment<2>(2 * j) = -d / dn;
      }
      cs.push_back(e);
    }
  }
  return cs;
}

bool strictly_feasible(const ProblemSpec& spec, const DiskDomain& dom, const Eigen::VectorXd& v) {
  for (const auto& c : constraints(spec, dom, v))
    if (!(c.slack > 0.0)) return false;
  return true;
}

struct PhaseObjective {
  const ProblemSpec& spec;
  const DiskDomain& dom;
  double w;
  // value of S + w 8pi sum log(slack) and its gradient; -inf outside the open set
  double operator()(const Eigen::VectorXd& v, Eigen::VectorXd* g, double* s_only = nullptr) const {
    const PointList xi = unflatten(v);
    const SurrogateValue sv = surrogate(spec, xi, dom);
    if (s_only) *s_only = sv.value;
    if (sv.coincident) return -std::numeric_limits<double>::infinity();
    double val = sv.value;
    if (g) *g = flatten(sv.gradient);
    const auto cs = constraints(spec, dom, v);
    for (const auto& c : cs) {
      if (!(c.slack > 0.0)) return -std::numeric_limits<double>::infinity();
      if (w > 0.0) {
        val += w * k8Pi * std::log(c.slack / c.scale);
        if (g) *g += (w * k8Pi / c.slack) * c.grad;
      }
    }
    return val;
  }
};

struct RunOutcome {
  Eigen::VectorXd x;
  bool stalled = false;
};

// BFGS ascent with Armijo backtracking that refuses infeasible trial points.
RunOutcome bfgs_ascent(const PhaseObjective& F, Eigen::VectorXd x, double gtol, int max_iter, int start, int phase,
                       std::vector<TraceEntry>* trace) {
  const int n = static_cast<int>(x.size());
  Eigen::VectorXd g;
  double s_val = 0.0;
  double f = F(x, &g, &s_val);
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n) * (0.01 / std::max(g.norm(), 1e-300));
  RunOutcome out;
  if (trace) trace->push_back({start, phase, F.w, 0, f, s_val});
  for (int it = 1; it <= max_iter; ++it) {
    if (g.norm() <= gtol) break;
    Eigen::VectorXd d = H * g;
    if (g.dot(d) <= 0.0) {
      H = Eigen::MatrixXd::Identity(n, n) * (0.01 / g.norm());
      d = H * g;
    }
    double step = 1.0;
    Eigen::VectorXd xn, gn;
    double fn = -std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int ls = 0; ls < 80; ++ls) {
      xn = x + step * d;
      fn = F(xn, &gn, &s_val);
      if (std::isfinite(fn) && fn >= f + 1e-4 * step * g.dot(d)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // Armijo cannot be met at double precision; accept only an exact non-decrease
      if (std::isfinite(fn) && fn >= f && (xn - x).norm() > 0.0) {
        accepted = true;
      } else {
        out.stalled = g.norm() > gtol;
        break;
      }
    }
    const Eigen::VectorXd s = xn - x;
    const Eigen::VectorXd y = g - gn;  // gradient of -F changes by -(gn - g)
    x = xn;
    f = fn;
    g = gn;
    if (trace) trace->push_back({start, phase, F.w, it, f, s_val});
    const double sy = s.dot(y);
    if (sy > 1e-300) {
      if (it == 1) H = Eigen::MatrixXd::Identity(n, n) * (sy / y.squaredNorm());
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
      H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) + rho * s * s.transpose();
    }
    if (s.norm() <= 1e-16 * std::max(1.0, x.norm())) break;
  }
  out.x = x;
  return out;
}

Eigen::VectorXd nelder_mead(const PhaseObjective& F, const Eigen::VectorXd& x0, double scale, int max_iter, int start,
                            int phase, std::vector<TraceEntry>* trace) {
  const int n = static_cast<int>(x0.size());
  std::vector<Eigen::VectorXd> p(n + 1, x0);
  std::vector<double> fv(n + 1);
  for (int i = 0; i < n; ++i) p[i + 1][i] += scale;
  auto val = [&](const Eigen::VectorXd& x) { return -F(x, nullptr); };  // minimize
  for (int i = 0; i <= n; ++i) fv[i] = val(p[i]);
  for (int it = 0; it < max_iter; ++it) {
    std::vector<int> idx(n + 1);
    for (int i = 0; i <= n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return fv[a] < fv[b]; });
    std::vector<Eigen::VectorXd> q;
    std::vector<double> qf;
    for (int i : idx) {
      q.push_back(p[i]);
      qf.push_back(fv[i]);
    }
    p = q;
    fv = qf;
    if (trace && std::isfinite(fv[0])) trace->push_back({start, phase, F.w, it, -fv[0], -fv[0]});
    if (std::abs(fv[n] - fv[0]) <= 1e-15 * (1.0 + std::abs(fv[0]))) break;
    Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) c += p[i];
    c /= n;
    const Eigen::VectorXd xr = c + (c - p[n]);
    const double fr = val(xr);
    if (fr < fv[0]) {
      const Eigen::VectorXd xe = c + 2.0 * (c - p[n]);
      const double fe = val(xe);
      if (fe < fr) {
        p[n] = xe;
        fv[n] = fe;
      } else {
        p[n] = xr;
        fv[n] = fr;
      }
    } else if (fr < fv[n - 1]) {
      p[n] = xr;
      fv[n] = fr;
    } else {
      const Eigen::VectorXd xc = c + 0.5 * (p[n] - c);
      const double fc = val(xc);
      if (fc < fv[n]) {
        p[n] = xc;
        fv[n] = fc;
      } else {
        for (int i = 1; i <= n; ++i) {
          p[i] = p[0] + 0.5 * (p[i] - p[0]);
          fv[i] = val(p[i]);
        }
      }
    }
  }
  int best = 0;
  for (int i = 1; i <= n; ++i)
    if (fv[i] < fv[best]) best = i;
  return p[best];
}

std::vector<double> sorted_angles(const PointList& xi) {
  std::vector<double> a;
  for (const Point& x : xi) {
    double th = std::atan2(x.y(), x.x());
    if (th < 0) th += 2.0 * kPi;
    if (th >= 2.0 * kPi) th -= 2.0 * kPi;
    a.push_back(th);
  }
  std::sort(a.begin(), a.end());
  return a;
}

bool lex_less(const std::vector<double>& a, const std::vector<double>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < b[i] - 1e-12) return true;
    if (a[i] > b[i] + 1e-12) return false;
  }
  return false;
}

PointList random_admissible(const ProblemSpec& spec, const DiskDomain& dom, std::mt19937_64& rng) {
  // radius where 1 - phi1 = 1/sqrt(t), found by bisection
  double lo = 0.0, hi = 1.0;
  for (int k = 0; k < 100; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (1.0 - dom.phi1(Point(mid, 0.0)) < 1.0 / std::sqrt(spec.t)) lo = mid;
    else hi = mid;
  }
  const double rmax = std::min(spec.d, lo);
  for (int attempt = 0; attempt < 10000; ++attempt) {
    PointList xi;
    for (int i = 0; i < spec.m; ++i) {
      const double r = rmax * std::sqrt(unit_uniform(rng));
      const double th = 2.0 * kPi * unit_uniform(rng);
      xi.emplace_back(r * std::cos(th), r * std::sin(th));
    }
    if (strictly_feasible(spec, dom, flatten(xi))) return xi;
  }
  return {};
}

}  // namespace

SurrogateValue surrogate(const ProblemSpec& spec, const PointList& xi, const DiskDomain& dom) {
  SurrogateValue out;
  const int m = static_cast<int>(xi.size());
  const double t = spec.t, a = spec.alpha;
  out.terms.base = k8Pi * (1.0 + a) * t;
  out.gradient.assign(m, Point::Zero());
  for (int i = 0; i < m; ++i) {
    const Point d = xi[i] - spec.p;
    const double r2 = d.squaredNorm();
    if (r2 == 0.0) out.coincident = true;
    out.terms.eigen += k8Pi * t * dom.phi1(xi[i]);
    out.gradient[i] += k8Pi * t * dom.grad_phi1(xi[i]);
    if (r2 > 0.0) {
      out.terms.singular_interaction += 16.0 * kPi * (2.0 + a) * 0.5 * std::log(r2);
      out.gradient[i] += (16.0 * kPi * (2.0 + a) / r2) * d;
    }
    for (int j = 0; j < m; ++j) {
      if (j == i) continue;
      const Point e = xi[i] - xi[j];
      const double e2 = e.squaredNorm();
      if (e2 == 0.0) {
        out.coincident = true;
        continue;
      }
      out.terms.mutual += 16.0 * kPi * 0.5 * std::log(e2);
      // each unordered pair appears twice in the ordered sum
      out.gradient[i] += (32.0 * kPi / e2) * e;
    }
  }
  out.value = out.coincident ? -std::numeric_limits<double>::infinity() : out.terms.total();
  return out;
}

double predicted_energy_leading(const ProblemSpec& spec, const BubbleConfig& cfg, const DiskDomain& dom,
                                Eigen::MatrixXd* Aout) {
  const int m = cfg.m();
  const double a = spec.alpha;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m + 1, m + 1);
  const double log_s0 = -0.5 * spec.t + cfg.log_mu0;
  A(0, 0) = k8Pi * (1.0 + a) * ((1.0 + a) * dom.regular_part(spec.p, spec.p) - 2.0 - 4.0 * log_s0);
  for (int j = 1; j <= m; ++j) {
    A(0, j) = A(j, 0) = k8Pi * (1.0 + a) * dom.green(spec.p, cfg.xi[j - 1]);
  }
  for (int i = 1; i <= m; ++i) {
    const Point& x = cfg.xi[i - 1];
    const double log_s = -0.5 * spec.t * dom.phi1(x) + cfg.log_mu[i - 1];
    A(i, i) = k8Pi * (dom.regular_part(x, x) - 2.0 - 4.0 * log_s);
    for (int j = 1; j <= m; ++j)
      if (j != i) A(i, j) = k8Pi * dom.green(x, cfg.xi[j - 1]);
  }
  if (Aout) *Aout = A;
  return 0.5 * A.sum() - k8Pi * (m + 1.0 + a);
}

Json EnergyReport::to_json() const {
  Json j;
  j["J_quadrature"] = J_quadrature;
  j["terms"] = {{"base", surrogate_terms.base},
                {"eigen", surrogate_terms.eigen},
                {"singular_interaction", surrogate_terms.singular_interaction},
                {"mutual", surrogate_terms.mutual}};
  j["surrogate"] = surrogate;
  j["remainder"] = remainder;
  j["quadrature_tol"] = quadrature_tol;
  j["dirichlet"] = dirichlet;
  j["mass"] = mass;
  Json d = Json::array();
  for (int r = 0; r < D.rows(); ++r) {
    Json row = Json::array();
    for (int c = 0; c < D.cols(); ++c) row.push_back(D(r, c));
    d.push_back(row);
  }
  j["D"] = d;
  j["predicted_leading"] = predicted_leading;
  j["predicted_remainder"] = predicted_remainder;
  j["nodes"] = nodes;
  j["level"] = level;
  return j;
}

namespace {

struct EnergyPieces {
  Eigen::MatrixXd D;
  double mass = 0.0;
};

EnergyPieces energy_pieces(const Ansatz& an, const QuadratureScheme& scheme) {
  const int nb = an.count();
  const int dim = nb * nb + 1;
  auto f = [&](const QuadNode& n, double* out) {
    double Uj[64];
    double rho[64];
    for (int j = 0; j < nb; ++j) {
      const double R = an.distance(j, n.x, n.anchor, n.rel);
      Uj[j] = an.bubble_value_r(j, R) + an.harmonic_correction(j, n.x);
      rho[j] = an.bubble_density_r(j, R);
    }
    for (int i = 0; i < nb; ++i)
      for (int j = 0; j < nb; ++j) out[i * nb + j] = Uj[j] * rho[i];
    out[nb * nb] = an.W_hat_at(n.x, n.anchor, n.rel);
  };
  if (nb > 64) throw ConfigurationError("too many bubbles");
  const auto comps = integrate_nodes(f, dim, scheme);
  EnergyPieces p;
  p.D.resize(nb, nb);
  for (int i = 0; i < nb; ++i)
    for (int j = 0; j < nb; ++j) p.D(i, j) = region_total(comps[i * nb + j]);
  p.mass = region_total(comps[nb * nb]);
  return p;
}

}  // namespace

EnergyReport energy_quadrature(const ProblemSpec& spec, const BubbleConfig& cfg, const QuadratureScheme& scheme,
                               const DiskDomain& dom, bool estimate_error) {
  const Ansatz an(spec, cfg, dom, HMode::exact);
  EnergyPieces pc = energy_pieces(an, scheme);
  double J = 0.5 * pc.D.sum() - pc.mass;
  EnergyReport r;
  r.level = scheme.level;
  r.nodes = scheme.node_count();
  if (estimate_error) {
    const QuadratureScheme fine = build_scheme(scheme.layout, std::numeric_limits<std::size_t>::max(), scheme.level + 1);
    EnergyPieces pf = energy_pieces(an, fine);
    const double Jf = 0.5 * pf.D.sum() - pf.mass;
    r.quadrature_tol = std::abs(Jf - J);
    J = Jf;
    pc = std::move(pf);
    r.level = fine.level;
    r.nodes = fine.node_count();
  }
  r.D = pc.D;
  r.mass = pc.mass;
  r.dirichlet = 0.5 * pc.D.sum();
  r.J_quadrature = J;
  const SurrogateValue sv = surrogate(spec, cfg.xi, dom);
  r.surrogate_terms = sv.terms;
  r.surrogate = sv.value;
  r.remainder = J - sv.value;
  r.predicted_leading = predicted_energy_leading(spec, cfg, dom);
  r.predicted_remainder = r.predicted_leading - sv.value;
  return r;
}

PointList canonical_rotation(const PointList& xi) {
  if (xi.empty()) return xi;
  PointList best;
  std::vector<double> best_key;
  for (const Point& ref : xi) {
    const double th = std::atan2(ref.y(), ref.x());
    const double c = std::cos(-th), s = std::sin(-th);
    PointList rot;
    for (const Point& x : xi) rot.emplace_back(c * x.x() - s * x.y(), s * x.x() + c * x.y());
    // the reference lands on angle 0 exactly
    for (std::size_t k = 0; k < xi.size(); ++k)
      if (&xi[k] == &ref) rot[k] = Point(ref.norm(), 0.0);
    std::vector<double> key = sorted_angles(rot);
    if (best.empty() || lex_less(key, best_key)) {
      best = rot;
      best_key = key;
    }
  }
  std::sort(best.begin(), best.end(), [](const Point& a, const Point& b) {
    double ta = std::atan2(a.y(), a.x()), tb = std::atan2(b.y(), b.x());
    if (ta < 0) ta += 2.0 * kPi;
    if (tb < 0) tb += 2.0 * kPi;
    if (std::abs(ta - tb) > 1e-12) return ta < tb;
    return a.norm() < b.norm();
  });
  return best;
}

PointList polygon_config(const ProblemSpec& spec, const DiskDomain&) {
  if (spec.m < 1) throw ConfigurationError("polygon configuration needs m >= 1");
  PointList xi;
  const double r = 1.0 / std::sqrt(spec.t);
  for (int i = 0; i < spec.m; ++i) {
    const double th = 2.0 * kPi * i / spec.m;
    xi.push_back(spec.p + r * Point(std::cos(th), std::sin(th)));
  }
  return xi;
}

Json MaximizerResult::to_json() const {
  Json j;
  j["xi_star"] = bubbler::to_json(xi_star);
  j["surrogate_value"] = surrogate_value;
  j["interior_flag"] = interior_flag;
  j["active_constraints"] = active_constraints;
  j["seed_gradient_norm"] = seed_gradient_norm;
  j["projected_gradient_norm"] = projected_gradient_norm;
  j["best_start"] = best_start;
  j["starts"] = starts;
  j["used_nelder_mead"] = used_nelder_mead;
  j["trace_length"] = optimizer_trace.size();
  return j;
}

MaximizerResult maximize_reduced(const ProblemSpec& spec, const DiskDomain& dom, const MaximizeOptions& opt) {
  if (spec.m < 1) throw ConfigurationError("maximization needs m >= 1");
  std::vector<PointList> seeds;
  {
    const PointList poly = polygon_config(spec, dom);
    if (strictly_feasible(spec, dom, flatten(poly))) seeds.push_back(poly);
  }
  for (int k = 0; k < opt.random_starts; ++k) {
    std::mt19937_64 rng(opt.seed * 1000003ULL + static_cast<std::uint64_t>(k));
    PointList s = random_admissible(spec, dom, rng);
    if (!s.empty()) seeds.push_back(s);
  }
  if (seeds.empty()) throw ConfigurationError("no admissible starting configuration in O_t");

  struct StartResult {
    Eigen::VectorXd x;
    double value = -std::numeric_limits<double>::infinity();
    std::vector<TraceEntry> trace;
    double g0 = 0.0;
    bool nm = false;
  };
  std::vector<StartResult> results(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t k) {
    StartResult& R = results[k];
    Eigen::VectorXd x = flatten(seeds[k]);
    {
      const SurrogateValue s0 = surrogate(spec, seeds[k], dom);
      R.g0 = flatten(s0.gradient).norm();
    }
    std::vector<TraceEntry>* tr = opt.keep_trace ? &R.trace : nullptr;
    for (std::size_t ph = 0; ph < opt.barrier_schedule.size(); ++ph) {
      const PhaseObjective F{spec, dom, opt.barrier_schedule[ph]};
      Eigen::VectorXd g;
      F(x, &g);
      const bool last = ph + 1 == opt.barrier_schedule.size();
      const double gtol = last ? 1e-12 * std::max(R.g0, 1.0) : 1e-7 * std::max(g.norm(), 1e-300);
      RunOutcome o = bfgs_ascent(F, x, gtol, opt.max_iterations, static_cast<int>(k), static_cast<int>(ph), tr);
      x = o.x;
      if (o.stalled) {
        Eigen::VectorXd g2;
        F(x, &g2);
        if (g2.norm() > 1e-6 * std::max(R.g0, 1.0)) {
          const Eigen::VectorXd y = nelder_mead(F, x, 1e-3, 2000, static_cast<int>(k), static_cast<int>(ph), tr);
          if (F(y, nullptr) >= F(x, nullptr)) x = y;
          R.nm = true;
        }
      }
    }
    R.x = x;
    R.value = surrogate(spec, unflatten(x), dom).value;
  });

  int best = 0;
  std::vector<std::vector<double>> keys;
  for (auto& r : results) keys.push_back(sorted_angles(canonical_rotation(unflatten(r.x))));
  for (std::size_t k = 1; k < results.size(); ++k) {
    const double vb = results[best].value, vk = results[k].value;
    const double tol = 1e-9 * std::max(1.0, std::abs(vb));
    if (vk > vb + tol || (std::abs(vk - vb) <= tol && lex_less(keys[k], keys[best]))) best = static_cast<int>(k);
  }

  MaximizerResult out;
  out.starts = static_cast<int>(seeds.size());
  out.best_start = best;
  out.xi_star = canonical_rotation(unflatten(results[best].x));
  out.seed_gradient_norm = results[best].g0;
  out.used_nelder_mead = results[best].nm;
  for (auto& r : results) out.optimizer_trace.insert(out.optimizer_trace.end(), r.trace.begin(), r.trace.end());
  const SurrogateValue sv = surrogate(spec, out.xi_star, dom);
  out.surrogate_value = sv.value;

  const Eigen::VectorXd xs = flatten(out.xi_star);
  Eigen::VectorXd g = flatten(sv.gradient);
  out.interior_flag = true;
  std::vector<Eigen::VectorXd> normals;
  for (const auto& c : constraints(spec, dom, xs)) {
    const double rel = c.slack / c.scale;
    if (rel <= 1e-9) {
      out.interior_flag = false;
      out.active_constraints.push_back(c.name + " [" + std::to_string(c.i) + (c.j >= 0 ? "," + std::to_string(c.j) : "") + "]");
      // the gradient may push outward through an active constraint
      if (g.dot(c.grad) < 0.0 && c.grad.norm() > 0.0) normals.push_back(c.grad.normalized());
    }
  }
  for (std::size_t a = 0; a < normals.size(); ++a) {
    for (std::size_t b = 0; b < a; ++b) normals[a] -= normals[a].dot(normals[b]) * normals[b];
    if (normals[a].norm() > 1e-12) {
      normals[a].normalize();
      g -= g.dot(normals[a]) * normals[a];
    }
  }
  out.projected_gradient_norm = g.norm();
  return out;
}

std::vector<GapRow> expansion_gap(const ProblemSpec& base, const LadderPath& path, const std::vector<double>& ladder,
                                  const DiskDomain& dom, std::size_t budget, int level) {
  std::vector<GapRow> rows(ladder.size());
  for (std::size_t k = 0; k < ladder.size(); ++k) {
    const ProblemSpec spec = ProblemSpec::make(base.alpha, base.m, ladder[k], base.alpha_hat, base.d, base.R0);
    const PointList xi = base.m > 0 ? path(spec) : PointList{};
    const BubbleConfig cfg = build_config(spec, xi, dom);
    const QuadratureScheme scheme = build_scheme(cfg, budget, level);
    const EnergyReport er = energy_quadrature(spec, cfg, scheme, dom, true);
    GapRow& r = rows[k];
    r.t = ladder[k];
    r.J_quadrature = er.J_quadrature;
    r.surrogate = er.surrogate;
    r.remainder = er.remainder;
    r.remainder_over_t = er.remainder / ladder[k];
    r.quadrature_tol = er.quadrature_tol;
    r.mass = er.mass;
    r.predicted_remainder = er.predicted_remainder;
  }
  for (std::size_t k = 1; k < rows.size(); ++k) rows[k].first_difference = rows[k].remainder - rows[k - 1].remainder;
  return rows;
}

double fitted_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) return 0.0;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxx > 0 ? sxy / sxx : 0.0;
}

}  // namespace bubbler
