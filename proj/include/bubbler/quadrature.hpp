#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "bubbler/json_io.hpp"
#include "bubbler/params.hpp"
#include "bubbler/types.hpp"

namespace bubbler {

/// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

struct QuadNode {
  Point x;
  double w;
  int anchor = -1;            ///< bubble whose center the node was laid around, -1 if none
  Point rel = Point::Zero();  ///< exact offset from that center; x alone rounds it away for tiny bubbles
};

/// Polar patch around a bubble center. The radial variable is sigma = r^kappa, graded
/// geometrically (ratio 2) from 1e-3 * scale up to radius^kappa.
struct Patch {
  Point center;
  double scale = 0.0;   ///< bubble scale in the sigma variable
  double radius = 0.0;  ///< in x
  double kappa = 1.0;   ///< 1 + alpha at p, 1 elsewhere
  std::vector<int> members;  ///< bubble indices covered (several after a merge)
  double max_dr = 0.0;       ///< radial panel cap in x, 0 = none
};

/// Centers and scales the layout is derived from. Index 0 is p.
struct SchemeLayout {
  double alpha = 0.0;
  double t = 0.0;
  PointList centers;
  std::vector<double> scales;  ///< sigma-scale of each bubble
  std::vector<double> kappas;
};

SchemeLayout layout_of(const BubbleConfig& cfg);

class QuadratureScheme {
 public:
  std::vector<Patch> patches;
  /// background radial panel endpoints on [patch radius at p, 1]
  std::vector<double> radial_breaks;
  /// panel endpoints where the integrand has a sqrt-type kink (tangency with a patch disk)
  std::vector<double> tangencies;
  double inner_radius = 0.0;    ///< beyond this no patch is met
  double fine_arc = 0.0;        ///< target angular panel arc length near patches
  int level = 0;
  std::vector<std::string> warnings;
  SchemeLayout layout;

  /// realized nodes: regions[k] for patch k, regions.back() for the background
  std::vector<std::vector<QuadNode>> regions;

  std::size_t node_count() const;
  int gl_order() const { return 4 << level; }
  int patch_angles() const { return 16 << level; }
  Json descriptor() const;
};

/// Scheme at a given refinement level; throws ConfigurationError if the level-0 node count exceeds budget.
QuadratureScheme build_scheme(const SchemeLayout& layout, std::size_t budget, int level = 1);
QuadratureScheme build_scheme(const BubbleConfig& cfg, std::size_t budget, int level = 1);

struct IntegrationResult {
  double value = 0.0;
  std::vector<double> per_region;  ///< patches in order, then background
};

using Integrand = std::function<double(const Point&)>;

/// Compensated, fixed-order sum over all nodes. Patches run in parallel.
IntegrationResult integrate_regions(const Integrand& f, const QuadratureScheme& scheme);
double integrate(const Integrand& f, const QuadratureScheme& scheme);

/// Several integrands at once: f(x, out) writes dim values. Returns [component][region].
using VectorIntegrand = std::function<void(const Point&, double*)>;
std::vector<std::vector<double>> integrate_many(const VectorIntegrand& f, int dim, const QuadratureScheme& scheme);
/// Same, with the full node (anchor and exact offset) handed to the integrand.
using NodeIntegrand = std::function<void(const QuadNode&, double*)>;
std::vector<std::vector<double>> integrate_nodes(const NodeIntegrand& f, int dim, const QuadratureScheme& scheme);
/// Compensated sum of per-region values in region order.
double region_total(const std::vector<double>& per_region);

struct RefineResult {
  double value = 0.0;
  double achieved_tol = 0.0;  ///< |I_l - I_{l-1}| / |I_l|
  int level = 0;
  int refinements = 0;
  bool cap_hit = false;
  std::size_t nodes = 0;
};

/// Raises the level from scheme.level until successive values agree within rel_tol or the next
/// scheme would exceed node_cap.
RefineResult refine_until(const Integrand& f, const QuadratureScheme& scheme, double rel_tol, std::size_t node_cap);

/// Mass of the singular bubble 8(1+a)^2 s^2 r^{2a}/(s^2 + r^{2+2a})^2 outside the unit disk.
double exterior_mass_singular(double s, double alpha);
/// Mass of the planar bubble 8 s^2/(s^2 + |x-c|^2)^2 outside the unit disk, via the boundary flux.
double exterior_mass_planar(const Point& c, double s, int n_theta = 2048);

}  // namespace bubbler
