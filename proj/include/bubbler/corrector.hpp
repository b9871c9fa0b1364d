#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "bubbler/ansatz.hpp"
#include "bubbler/json_io.hpp"
#include "bubbler/params.hpp"
#include "bubbler/quadrature.hpp"

namespace bubbler {

/// Cell-centred lattice on [-1,1]^2 restricted to the open unit disk, with Shortley-Weller
/// distances to the circle where a neighbour falls outside.
class Grid {
 public:
  explicit Grid(int n);

  int n() const { return n_; }
  double h() const { return h_; }
  std::size_t size() const { return nodes_.size(); }
  const Point& node(std::size_t k) const { return nodes_[k]; }
  const PointList& nodes() const { return nodes_; }
  /// node index of lattice cell (i, j), or -1 outside the disk
  int index(int i, int j) const;
  int lattice_i(std::size_t k) const { return ij_[k].first; }
  int lattice_j(std::size_t k) const { return ij_[k].second; }
  /// neighbour ids (E, W, N, S), -1 when the arm hits the boundary
  const std::array<int, 4>& neighbours(std::size_t k) const { return nb_[k]; }
  /// arm lengths (E, W, N, S): h, or the distance to the circle
  const std::array<double, 4>& arms(std::size_t k) const { return arm_[k]; }
  bool irregular(std::size_t k) const;

  /// -Delta_h with homogeneous Dirichlet data
  Eigen::SparseMatrix<double> neg_laplacian() const;
  /// Bilinear interpolation of a nodal field; values outside the disk count as 0.
  double interpolate(const Eigen::VectorXd& f, const Point& x) const;

 private:
  int n_;
  double h_;
  PointList nodes_;
  std::vector<int> index_;
  std::vector<std::pair<int, int>> ij_;
  std::vector<std::array<int, 4>> nb_;
  std::vector<std::array<double, 4>> arm_;
};

/// Minimal n with h = 2/n <= (narrowest bubble width)/6.
int required_grid_n(const BubbleConfig& cfg);

struct SolverOptions {
  /// direct factorization up to this n, restarted GMRES with incomplete LU beyond
  int direct_max_n = 1536;
  double krylov_tol = 1e-13;
  int krylov_restart = 200;
  int krylov_max_iter = 5000;
  int refinement_steps = 2;
};

struct ProjectedSolveResult {
  Eigen::VectorXd phi;
  Eigen::MatrixXd c;  ///< m x 2, y-picture units
  double linear_residual = 0.0;           ///< max-norm, x-picture
  double linear_residual_relative = 0.0;  ///< divided by max |rhs|
  double orthogonality_residual = 0.0;
  std::vector<double> krylov_history;
};

/// The discrete operator -Delta_h - diag(W_hat) bordered by the 2m constraint columns.
class ProjectedOperator {
 public:
  ProjectedOperator(const Ansatz& ansatz, const Grid& grid, const SolverOptions& opt = {});
  ~ProjectedOperator();
  ProjectedOperator(const ProjectedOperator&) = delete;
  ProjectedOperator& operator=(const ProjectedOperator&) = delete;

  const Grid& grid() const { return grid_; }
  const Ansatz& ansatz() const { return ansatz_; }
  int constraints() const { return static_cast<int>(B_.cols()); }
  const Eigen::VectorXd& W() const { return W_; }
  const Eigen::VectorXd& E() const { return E_; }
  /// column (2(i-1) + (j-1)) holds eps0^-2 chi_i Z_ij at the nodes
  const Eigen::MatrixXd& B() const { return B_; }
  const Eigen::SparseMatrix<double>& L() const { return L_; }  ///< -Delta_h
  /// A = -Delta_h - diag(W_hat + extra)
  Eigen::SparseMatrix<double> A(const Eigen::VectorXd* extra_diag = nullptr) const;

  ProjectedSolveResult solve(const Eigen::VectorXd& rhs) const;
  /// Solves with A replaced by -Delta_h - diag(W_hat e^phi) (Newton step); refactors.
  ProjectedSolveResult solve_linearized(const Eigen::VectorXd& rhs, const Eigen::VectorXd& phi) const;

  /// max_j |h^2 <B_j, phi>| / (||B_j||_1 h^2 ||phi||_inf)
  double orthogonality_residual(const Eigen::VectorXd& phi) const;
  double linear_residual(const Eigen::VectorXd& phi, const Eigen::MatrixXd& c, const Eigen::VectorXd& rhs,
                         const Eigen::VectorXd* extra_diag = nullptr) const;

 struct Factor;

 private:
  ProjectedSolveResult solve_with(Factor& f, const Eigen::VectorXd& rhs, const Eigen::VectorXd* extra) const;
  std::unique_ptr<Factor> factor(const Eigen::VectorXd* extra) const;

  const Ansatz& ansatz_;
  const Grid& grid_;
  SolverOptions opt_;
  Eigen::SparseMatrix<double> L_;
  Eigen::VectorXd W_, E_;
  Eigen::MatrixXd B_;
  Eigen::VectorXd col_scale_;
  std::unique_ptr<Factor> base_;
};

/// Checks the resolution precondition and builds the operator.
std::unique_ptr<ProjectedOperator> assemble(const Ansatz& ansatz, const Grid& grid, const SolverOptions& opt = {});

struct CorrectorOptions {
  double tol = 1e-10;
  int max_iterations = 50;
  double stall_ratio = 0.9;
  int stall_count = 3;
  int newton_max_iterations = 60;
  double newton_max_step = 2.0;     ///< sup-norm cap on one Newton move
  double divergence_bound = 50.0;   ///< fixed-point step size treated as divergence
  bool force_newton = false;
};

struct CorrectorResult {
  Eigen::VectorXd phi_final;
  Eigen::MatrixXd c_final;
  std::vector<double> iterations;  ///< ||phi_{k+1} - phi_k||_inf
  std::vector<double> ratios;      ///< successive quotients of the above
  std::string mode = "fixed-point";
  bool converged = false;
  double residual_x = 0.0;  ///< max |-Delta_h phi - W phi - E - N(phi) - B c|
  double residual_y = 0.0;  ///< eps0^2 residual_x
  double orthogonality_residual = 0.0;
  double phi_inf = 0.0;
  double mass = 0.0;  ///< filled by the caller when requested
  Json to_json() const;
};

CorrectorResult fixed_point_correct(const ProjectedOperator& op, const CorrectorOptions& opt = {});
CorrectorResult newton_correct(const ProjectedOperator& op, const Eigen::VectorXd& phi0, const CorrectorOptions& opt = {});
double nonlinear_residual(const ProjectedOperator& op, const Eigen::VectorXd& phi, const Eigen::MatrixXd& c);

struct MultiplierRow {
  std::string label;
  PointList xi;
  Eigen::MatrixXd c;
  std::vector<double> gamma;
  double rhs_star_norm = 0.0;
  double normalized = 0.0;  ///< max_ij gamma_i |c_ij| / ||E + N(phi)||_*
  bool converged = false;
};

/// Corrector at xi_star and at xi_star displaced radially by each of the given relative amounts.
std::vector<MultiplierRow> multiplier_check(const ProblemSpec& spec, const DiskDomain& dom, const PointList& xi_star,
                                            int grid_n, const std::vector<double>& displacements = {0.1},
                                            const SolverOptions& sopt = {}, const CorrectorOptions& copt = {});

struct MassReport {
  double total = 0.0;
  double target = 0.0;
  double relative_error = 0.0;
  std::vector<double> per_region;  ///< patches in order then background
  std::vector<double> region_targets;
  Json to_json() const;
};

/// int |x|^{2alpha} k e^{-t phi1} e^{U + phi}, with phi interpolated from the grid when given.
MassReport mass_quantization(const Ansatz& ansatz, const QuadratureScheme& scheme, const Grid* grid = nullptr,
                             const Eigen::VectorXd* phi = nullptr);

/// CSV x1,x2,phi over the grid nodes.
void dump_grid_field(const Grid& grid, const Eigen::VectorXd& phi, const std::string& csv_path);

}  // namespace bubbler
