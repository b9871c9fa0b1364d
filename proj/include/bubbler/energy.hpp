#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "bubbler/ansatz.hpp"
#include "bubbler/domain.hpp"
#include "bubbler/json_io.hpp"
#include "bubbler/params.hpp"
#include "bubbler/quadrature.hpp"

namespace bubbler {

struct SurrogateTerms {
  double base = 0.0;                  ///< 8 pi (1+alpha) t
  double eigen = 0.0;                 ///< 8 pi t sum phi1(xi_i)
  double singular_interaction = 0.0;  ///< 16 pi (2+alpha) sum log|xi_i - p|
  double mutual = 0.0;                ///< 16 pi sum_{i != j} log|xi_i - xi_j|, ordered pairs
  double total() const { return base + eigen + singular_interaction + mutual; }
};

struct SurrogateValue {
  SurrogateTerms terms;
  double value = 0.0;
  PointList gradient;
  /// set when two points coincide or a point sits on p; value is then -infinity
  bool coincident = false;
};

SurrogateValue surrogate(const ProblemSpec& spec, const PointList& xi, const DiskDomain& dom);

struct EnergyReport {
  double J_quadrature = 0.0;
  SurrogateTerms surrogate_terms;
  double surrogate = 0.0;
  double remainder = 0.0;
  double quadrature_tol = 0.0;
  double dirichlet = 0.0;  ///< (1/2) int |grad U|^2 = (1/2) sum_ij D_ij
  double mass = 0.0;       ///< int W_hat
  Eigen::MatrixXd D;       ///< D(i, j) = int U_j (-Delta u_i)
  double predicted_leading = 0.0;
  double predicted_remainder = 0.0;
  std::size_t nodes = 0;
  int level = 0;
  Json to_json() const;
};

/// Leading values of D(i, j) built from G, H and the scales, minus the mass 8 pi (m+1+alpha).
double predicted_energy_leading(const ProblemSpec& spec, const BubbleConfig& cfg, const DiskDomain& dom,
                                Eigen::MatrixXd* A = nullptr);

/// Energy of the ansatz by quadrature. With estimate_error the scheme is rerun one level finer and
/// the finer value is reported together with the difference.
EnergyReport energy_quadrature(const ProblemSpec& spec, const BubbleConfig& cfg, const QuadratureScheme& scheme,
                               const DiskDomain& dom, bool estimate_error = true);

struct TraceEntry {
  int start = 0;
  int phase = 0;
  double barrier_weight = 0.0;
  int iteration = 0;
  double objective = 0.0;
  double surrogate = 0.0;
};

struct MaximizerResult {
  PointList xi_star;
  double surrogate_value = 0.0;
  bool interior_flag = false;
  std::vector<std::string> active_constraints;
  std::vector<TraceEntry> optimizer_trace;
  double seed_gradient_norm = 0.0;
  double projected_gradient_norm = 0.0;
  int best_start = 0;
  int starts = 0;
  bool used_nelder_mead = false;
  Json to_json() const;
};

struct MaximizeOptions {
  int random_starts = 6;
  std::uint64_t seed = 0;
  std::vector<double> barrier_schedule{1.0, 1e-2, 1e-4, 1e-6, 0.0};
  int max_iterations = 400;
  bool keep_trace = true;
};

MaximizerResult maximize_reduced(const ProblemSpec& spec, const DiskDomain& dom, const MaximizeOptions& opt = {});

/// Rotation of xi putting its sorted angle vector in lexicographically smallest form.
PointList canonical_rotation(const PointList& xi);

/// Regular m-gon of radius t^{-1/2} about p.
PointList polygon_config(const ProblemSpec& spec, const DiskDomain& dom);

struct GapRow {
  double t = 0.0;
  double J_quadrature = 0.0;
  double surrogate = 0.0;
  double remainder = 0.0;
  double remainder_over_t = 0.0;
  double first_difference = 0.0;  ///< remainder(t_k) - remainder(t_{k-1}); 0 on the first row
  double quadrature_tol = 0.0;
  double mass = 0.0;
  double predicted_remainder = 0.0;
};

using LadderPath = std::function<PointList(const ProblemSpec&)>;

/// Remainder of the energy against the surrogate along a t-ladder.
std::vector<GapRow> expansion_gap(const ProblemSpec& base, const LadderPath& path, const std::vector<double>& ladder,
                                  const DiskDomain& dom, std::size_t budget, int level = 1);

/// Least-squares slope of y against x.
double fitted_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace bubbler
