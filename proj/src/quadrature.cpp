#include "bubbler/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>

#include "bubbler/errors.hpp"
#include "bubbler/parallel.hpp"

namespace bubbler {
namespace {

/// Neumaier's variant of Kahan summation.
struct CompensatedSum {
  double sum = 0.0;
  double c = 0.0;
  void add(double v) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v))
      c += (sum - t) + v;
    else
      c += (v - t) + sum;
    sum = t;
  }
  double value() const { return sum + c; }
};

struct GLRule {
  std::vector<double> x, w;
};

const GLRule& gl_rule(int n) {
  static std::mutex mu;
  static std::map<int, GLRule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  GLRule r;
  gauss_legendre(n, r.x, r.w);
  return cache.emplace(n, std::move(r)).first->second;
}

enum class Map { linear, sing_left, sing_right, sing_both };

// Maps u in [0,1] to r in [a,b]; returns (r, dr/du).
std::pair<double, double> panel_map(Map m, double a, double b, double u) {
  const double L = b - a;
  switch (m) {
    case Map::linear: return {a + L * u, L};
    case Map::sing_left: return {a + L * u * u, 2.0 * L * u};
    case Map::sing_right: return {b - L * (1.0 - u) * (1.0 - u), 2.0 * L * (1.0 - u)};
    case Map::sing_both:
      return {a + L * 0.5 * (1.0 - std::cos(kPi * u)), L * 0.5 * kPi * std::sin(kPi * u)};
  }
  return {a, 0.0};
}

bool is_tangency(double r, const std::vector<double>& tang) {
  for (double v : tang)
    if (std::abs(v - r) <= 1e-15 * std::max(1.0, std::abs(r))) return true;
  return false;
}

void patch_nodes(const Patch& p, int anchor, int q, int n_theta, std::vector<QuadNode>& out) {
  const GLRule& gl = gl_rule(q);
  const double kap = p.kappa;
  const double smax = std::pow(p.radius, kap);
  const double slo = std::min(1e-3 * p.scale, std::pow(1e-6 * p.radius, kap));
  std::vector<double> br{0.0};
  if (slo < 0.5 * smax) {
    double s = slo;
    while (s < smax) {
      br.push_back(s);
      s *= 2.0;
    }
    if (smax - br.back() < 0.5 * (br.back() - br[br.size() - 2])) br.back() = smax;
    else br.push_back(smax);
  } else {
    for (int k = 1; k <= 4; ++k) br.push_back(smax * k / 4.0);
  }
  const double dth = 2.0 * kPi / n_theta;
  if (p.max_dr > 0.0) {
    std::vector<double> fine{0.0};
    for (std::size_t k = 0; k + 1 < br.size(); ++k) {
      const double ra = std::pow(br[k], 1.0 / kap), rb = std::pow(br[k + 1], 1.0 / kap);
      const int pieces = std::max(1, static_cast<int>(std::ceil((rb - ra) / p.max_dr)));
      for (int j = 1; j <= pieces; ++j) fine.push_back(std::pow(ra + (rb - ra) * j / pieces, kap));
    }
    br = std::move(fine);
  }
  for (std::size_t k = 0; k + 1 < br.size(); ++k) {
    const double a = br[k], b = br[k + 1];
    for (int g = 0; g < q; ++g) {
      const double sig = a + 0.5 * (b - a) * (gl.x[g] + 1.0);
      const double ws = 0.5 * (b - a) * gl.w[g];
      // r dr = (1/kappa) sigma^{2/kappa - 1} d sigma
      const double r = std::pow(sig, 1.0 / kap);
      const double wr = ws * std::pow(sig, 2.0 / kap - 1.0) / kap;
      for (int j = 0; j < n_theta; ++j) {
        const double th = dth * j;
        const Point rel = r * Point(std::cos(th), std::sin(th));
        out.push_back({p.center + rel, wr * dth, anchor, rel});
      }
    }
  }
}

// Angular intervals of the circle |x| = r inside the patch disks.
std::vector<std::pair<double, double>> excluded_arcs(double r, const std::vector<Patch>& patches) {
  std::vector<std::pair<double, double>> ex;
  for (std::size_t k = 1; k < patches.size(); ++k) {
    const Patch& p = patches[k];
    const double c = p.center.norm();
    if (std::abs(r - c) >= p.radius) continue;
    double cosd = (r * r + c * c - p.radius * p.radius) / (2.0 * r * c);
    cosd = std::clamp(cosd, -1.0, 1.0);
    const double d = std::acos(cosd);
    double th = std::atan2(p.center.y(), p.center.x());
    if (th < 0) th += 2.0 * kPi;
    ex.push_back({th - d, th + d});
  }
  std::sort(ex.begin(), ex.end());
  return ex;
}

void background_ring(double r, double wr, double dtheta, int q, const std::vector<Patch>& patches,
                     std::vector<QuadNode>& out) {
  const auto ex = excluded_arcs(r, patches);
  if (ex.empty()) {
    const int n = static_cast<int>(std::ceil(2.0 * kPi / dtheta)) * q;
    const double h = 2.0 * kPi / n;
    for (int j = 0; j < n; ++j) {
      const double th = h * j;
      out.push_back({Point(r * std::cos(th), r * std::sin(th)), wr * r * h});
    }
    return;
  }
  const GLRule& gl = gl_rule(q);
  for (std::size_t i = 0; i < ex.size(); ++i) {
    const double a = ex[i].second;
    const double b = (i + 1 < ex.size()) ? ex[i + 1].first : ex[0].first + 2.0 * kPi;
    if (b <= a) continue;
    const int np = std::max(1, static_cast<int>(std::ceil((b - a) / dtheta)));
    const double L = (b - a) / np;
    for (int k = 0; k < np; ++k) {
      for (int g = 0; g < q; ++g) {
        const double th = a + L * (k + 0.5 * (gl.x[g] + 1.0));
        out.push_back({Point(r * std::cos(th), r * std::sin(th)), wr * r * 0.5 * L * gl.w[g]});
      }
    }
  }
}

}  // namespace

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  if (n < 1) throw ConfigurationError("Gauss-Legendre order must be positive");
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    if (n == 1) p0 = 1.0;
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    weights[i] = weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) nodes[n / 2] = 0.0;
}

SchemeLayout layout_of(const BubbleConfig& cfg) {
  SchemeLayout l;
  l.alpha = cfg.alpha;
  l.t = cfg.t;
  l.centers.push_back(Point::Zero());
  l.scales.push_back(cfg.s0());
  l.kappas.push_back(1.0 + cfg.alpha);
  for (int i = 0; i < cfg.m(); ++i) {
    l.centers.push_back(cfg.xi[i]);
    l.scales.push_back(cfg.s(i));
    l.kappas.push_back(1.0);
  }
  return l;
}

std::size_t QuadratureScheme::node_count() const {
  std::size_t n = 0;
  for (const auto& r : regions) n += r.size();
  return n;
}

Json QuadratureScheme::descriptor() const {
  Json j;
  j["level"] = level;
  j["gl_order"] = gl_order();
  j["patch_angles"] = patch_angles();
  j["nodes"] = node_count();
  Json ps = Json::array();
  for (std::size_t k = 0; k < patches.size(); ++k) {
    Json p;
    p["center"] = to_json(patches[k].center);
    p["scale"] = patches[k].scale;
    p["radius"] = patches[k].radius;
    p["kappa"] = patches[k].kappa;
    p["members"] = patches[k].members;
    p["nodes"] = regions[k].size();
    ps.push_back(p);
  }
  j["patches"] = ps;
  Json bg;
  bg["radial_breaks"] = radial_breaks.size();
  bg["inner_radius"] = inner_radius;
  bg["fine_arc"] = fine_arc;
  bg["nodes"] = regions.back().size();
  j["background"] = bg;
  j["warnings"] = warnings;
  return j;
}

QuadratureScheme build_scheme(const SchemeLayout& layout, std::size_t budget, int level) {
  const std::size_t nb = layout.centers.size();
  if (nb == 0 || layout.scales.size() != nb || layout.kappas.size() != nb)
    throw ConfigurationError("quadrature layout needs matching centers, scales and kappas");
  if (layout.centers[0].norm() != 0.0) throw ConfigurationError("quadrature layout must start with p = 0");
  if (level < 0 || level > 6) throw ConfigurationError("quadrature level out of range");
  QuadratureScheme S;
  S.level = level;
  S.layout = layout;

  // spatial widths
  std::vector<double> width(nb);
  for (std::size_t i = 0; i < nb; ++i) width[i] = std::pow(layout.scales[i], 1.0 / layout.kappas[i]);

  // group centers that are too close for separate patches
  std::vector<int> group(nb);
  std::iota(group.begin(), group.end(), 0);
  std::function<int(int)> find = [&](int i) { return group[i] == i ? i : group[i] = find(group[i]); };
  for (std::size_t i = 0; i < nb; ++i)
    for (std::size_t j = i + 1; j < nb; ++j)
      if ((layout.centers[i] - layout.centers[j]).norm() < 4.0 * (width[i] + width[j])) {
        const int a = find(static_cast<int>(i)), b = find(static_cast<int>(j));
        if (a != b) group[std::max(a, b)] = std::min(a, b);
      }
  std::map<int, std::vector<int>> members;
  for (std::size_t i = 0; i < nb; ++i) members[find(static_cast<int>(i))].push_back(static_cast<int>(i));

  std::vector<double> extent;
  for (auto& [root, mem] : members) {
    Patch p;
    p.members = mem;
    if (root == 0) {
      p.center = Point::Zero();
      p.kappa = layout.kappas[0];
      p.scale = layout.scales[0];
    } else {
      Point c = Point::Zero();
      for (int i : mem) c += layout.centers[i];
      p.center = c / static_cast<double>(mem.size());
      p.kappa = 1.0;
      p.scale = std::numeric_limits<double>::infinity();
      for (int i : mem) p.scale = std::min(p.scale, width[i]);
    }
    double e = 0.0;
    for (int i : mem) e = std::max(e, (layout.centers[i] - p.center).norm() + (mem.size() > 1 ? 4.0 * width[i] : 0.0));
    if (mem.size() > 1) {
      std::ostringstream os;
      os << "bubble centers";
      for (int i : mem) os << ' ' << i;
      os << " too close for separate patches; merged (accuracy not guaranteed)";
      S.warnings.push_back(os.str());
    }
    S.patches.push_back(p);
    extent.push_back(e);
  }
  bool fits = true;
  for (std::size_t a = 0; a < S.patches.size(); ++a) {
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < S.patches.size(); ++b)
      if (a != b) gap = std::min(gap, (S.patches[a].center - S.patches[b].center).norm() - extent[a] - extent[b]);
    const double wall = 0.9 * (1.0 - S.patches[a].center.norm()) - extent[a];
    const double room = std::min({0.5 * gap, 0.1 + (a == 0 ? 0.8 : 0.0), wall});
    if (!(room > 0.0)) fits = false;
    S.patches[a].radius = extent[a] + room;
  }
  double wide_arc = 0.0;
  if (!fits) {
    // wide bubbles: one polar patch around p, resolved at the narrowest free width
    Patch g;
    g.center = Point::Zero();
    g.kappa = layout.kappas[0];
    g.scale = layout.scales[0];
    g.radius = 0.9;
    g.members.resize(nb);
    std::iota(g.members.begin(), g.members.end(), 0);
    double wmin = 0.1;
    for (std::size_t i = 1; i < nb; ++i) wmin = std::min(wmin, width[i]);
    g.max_dr = 0.25 * wmin;
    wide_arc = 0.25 * wmin;
    S.patches.assign(1, g);
    extent.assign(1, 0.9);
    S.warnings.push_back("bubbles too wide for separate patches; single polar patch around p");
  }
  const std::size_t np = S.patches.size();
  // The p patch may grow to 0.9 when alone; cap it at 0.1 if there are other patches.
  if (np > 1) {
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t b = 1; b < np; ++b) gap = std::min(gap, S.patches[b].center.norm() - extent[b]);
    S.patches[0].radius = std::min({S.patches[0].radius, extent[0] + 0.1, extent[0] + 0.5 * (gap - extent[0])});
  }

  const int q = S.gl_order();
  S.regions.resize(np + 1);
  for (std::size_t k = 0; k < np; ++k) {
    int nth = S.patches[k].members.size() > 1 ? 4 * S.patch_angles() : S.patch_angles();
    if (wide_arc > 0.0) nth = std::max(nth, static_cast<int>(std::ceil(2.0 * kPi * 0.9 / wide_arc)) << level);
    const Patch& pk = S.patches[k];
    const int anchor = pk.members.size() == 1 && pk.center == layout.centers[pk.members[0]] ? pk.members[0] : -1;
    patch_nodes(pk, anchor, q, nth, S.regions[k]);
  }

  // background
  const double r0 = S.patches[0].radius;
  double r_c = r0, R_min = S.patches[0].radius;
  std::vector<double> br{r0, 1.0};
  for (std::size_t k = 1; k < np; ++k) {
    const double c = S.patches[k].center.norm(), R = S.patches[k].radius;
    br.push_back(c - R);
    br.push_back(c + R);
    S.tangencies.push_back(c - R);
    S.tangencies.push_back(c + R);
    r_c = std::max(r_c, c + R);
    R_min = std::min(R_min, R);
  }
  std::sort(br.begin(), br.end());
  br.erase(std::unique(br.begin(), br.end()), br.end());
  S.inner_radius = r_c;
  S.fine_arc = wide_arc > 0.0 ? wide_arc : 0.5 * R_min;
  const double bl = std::min(0.5, 25.0 / (1.25 * layout.t));
  const double h_bl = std::min(0.1, 2.0 / (1.25 * layout.t));
  auto step = [&](double r) {
    double h = r < r_c ? 0.25 * R_min : std::clamp(0.5 * (r - r_c), 0.25 * R_min, 0.1);
    if (r >= 1.0 - bl) h = std::min(h, h_bl);
    return h;
  };
  auto dtheta = [&](double r) {
    const double arc = r < r_c + 0.5 ? std::max(S.fine_arc, r - r_c) : 2.0 * kPi;
    return std::min(2.0 * kPi / 8.0, arc / r);
  };
  std::vector<double> panels{br[0]};
  for (std::size_t k = 0; k + 1 < br.size(); ++k) {
    const double a = br[k], b = br[k + 1];
    if (b <= a) continue;
    double r = a;
    while (r < b) {
      double nx = r + step(r);
      if (nx > b - 0.3 * step(r)) nx = b;
      panels.push_back(nx);
      r = nx;
    }
  }
  S.radial_breaks = panels;
  const GLRule& gl = gl_rule(q);
  auto& bgn = S.regions[np];
  for (std::size_t k = 0; k + 1 < panels.size(); ++k) {
    const double a = panels[k], b = panels[k + 1];
    const bool ls = is_tangency(a, S.tangencies), rs = is_tangency(b, S.tangencies);
    const Map mp = ls && rs ? Map::sing_both : ls ? Map::sing_left : rs ? Map::sing_right : Map::linear;
    for (int g = 0; g < q; ++g) {
      const double u = 0.5 * (gl.x[g] + 1.0);
      const auto [r, dr] = panel_map(mp, a, b, u);
      background_ring(r, 0.5 * gl.w[g] * dr, dtheta(r), q, S.patches, bgn);
    }
  }

  if (level == 0 && S.node_count() > budget) {
    std::ostringstream os;
    os << "quadrature budget " << budget << " below the minimum scheme size " << S.node_count();
    throw ConfigurationError(os.str());
  }
  return S;
}

QuadratureScheme build_scheme(const BubbleConfig& cfg, std::size_t budget, int level) {
  return build_scheme(layout_of(cfg), budget, level);
}

IntegrationResult integrate_regions(const Integrand& f, const QuadratureScheme& scheme) {
  const std::size_t nr = scheme.regions.size();
  std::vector<double> vals(nr, 0.0);
  parallel_for(nr, [&](std::size_t k) {
    CompensatedSum s;
    const auto& nodes = scheme.regions[k];
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const double v = f(nodes[i].x);
      if (!std::isfinite(v)) {
        const int patch = k + 1 == nr ? -1 : static_cast<int>(k);
        std::ostringstream os;
        os << "non-finite integrand at node " << i << " of " << (patch < 0 ? "background" : "patch " + std::to_string(patch))
           << " x = (" << nodes[i].x.x() << ", " << nodes[i].x.y() << ")";
        throw QuadratureError(os.str(), i, patch);
      }
      s.add(v * nodes[i].w);
    }
    vals[k] = s.value();
  });
  IntegrationResult r;
  CompensatedSum tot;
  for (double v : vals) tot.add(v);
  r.value = tot.value();
  r.per_region = std::move(vals);
  return r;
}

double integrate(const Integrand& f, const QuadratureScheme& scheme) { return integrate_regions(f, scheme).value; }

std::vector<std::vector<double>> integrate_nodes(const NodeIntegrand& f, int dim, const QuadratureScheme& scheme) {
  const std::size_t nr = scheme.regions.size();
  std::vector<std::vector<double>> out(dim, std::vector<double>(nr, 0.0));
  parallel_for(nr, [&](std::size_t k) {
    std::vector<CompensatedSum> s(dim);
    std::vector<double> v(dim);
    const auto& nodes = scheme.regions[k];
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      f(nodes[i], v.data());
      for (int d = 0; d < dim; ++d) {
        if (!std::isfinite(v[d])) {
          const int patch = k + 1 == nr ? -1 : static_cast<int>(k);
          throw QuadratureError("non-finite integrand component " + std::to_string(d) + " at node " +
                                    std::to_string(i) + (patch < 0 ? " of background" : " of patch " + std::to_string(patch)),
                                i, patch);
        }
        s[d].add(v[d] * nodes[i].w);
      }
    }
    for (int d = 0; d < dim; ++d) out[d][k] = s[d].value();
  });
  return out;
}

std::vector<std::vector<double>> integrate_many(const VectorIntegrand& f, int dim, const QuadratureScheme& scheme) {
  return integrate_nodes([&](const QuadNode& n, double* v) { f(n.x, v); }, dim, scheme);
}

double region_total(const std::vector<double>& per_region) {
  CompensatedSum s;
  for (double v : per_region) s.add(v);
  return s.value();
}

RefineResult refine_until(const Integrand& f, const QuadratureScheme& scheme, double rel_tol, std::size_t node_cap) {
  if (!(rel_tol >= 1e-12)) throw ConfigurationError("refine_until: rel_tol must be >= 1e-12");
  RefineResult res;
  double prev = integrate(f, scheme);
  res.value = prev;
  res.level = scheme.level;
  res.nodes = scheme.node_count();
  res.achieved_tol = std::numeric_limits<double>::infinity();
  for (int lvl = scheme.level + 1; lvl <= 6; ++lvl) {
    QuadratureScheme next = build_scheme(scheme.layout, std::numeric_limits<std::size_t>::max(), lvl);
    if (next.node_count() > node_cap) {
      res.cap_hit = true;
      return res;
    }
    const double v = integrate(f, next);
    ++res.refinements;
    res.achieved_tol = std::abs(v - prev) / std::max(std::abs(v), std::numeric_limits<double>::min());
    res.value = v;
    res.level = lvl;
    res.nodes = next.node_count();
    if (res.achieved_tol <= rel_tol) return res;
    prev = v;
  }
  res.cap_hit = true;
  return res;
}

double exterior_mass_singular(double s, double alpha) {
  const double s2 = s * s;
  return 8.0 * kPi * (1.0 + alpha) * s2 / (s2 + 1.0);
}

double exterior_mass_planar(const Point& c, double s, int n_theta) {
  // 8 pi minus the inward flux of the profile, written without cancellation
  const double s2 = s * s;
  CompensatedSum sum;
  const double h = 2.0 * kPi / n_theta;
  for (int j = 0; j < n_theta; ++j) {
    const Point x(std::cos(h * j), std::sin(h * j));
    const Point d = x - c;
    const double d2 = d.squaredNorm();
    sum.add(4.0 * d.dot(x) * s2 / (d2 * (s2 + d2)) * h);
  }
  return sum.value();
}

}  // namespace bubbler
