#include "bubbler/corrector.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/UmfPackSupport>
#include <unsupported/Eigen/IterativeSolvers>

#include "bubbler/errors.hpp"
#include "bubbler/parallel.hpp"

namespace bubbler {

// ---------------------------------------------------------------- Grid

Grid::Grid(int n) : n_(n), h_(2.0 / n) {
  if (n < 4) throw ConfigurationError("grid needs at least 4 cells per side");
  index_.assign(static_cast<std::size_t>(n) * n, -1);
  auto coord = [&](int i) { return -1.0 + (i + 0.5) * h_; };
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const Point x(coord(i), coord(j));
      if (x.squaredNorm() < 1.0) {
        index_[static_cast<std::size_t>(j) * n + i] = static_cast<int>(nodes_.size());
        nodes_.push_back(x);
        ij_.push_back({i, j});
      }
    }
  nb_.resize(nodes_.size());
  arm_.resize(nodes_.size());
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    const auto [i, j] = ij_[k];
    const double x = nodes_[k].x(), y = nodes_[k].y();
    const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
    for (int d = 0; d < 4; ++d) {
      const int id = index(i + di[d], j + dj[d]);
      nb_[k][d] = id;
      if (id >= 0) {
        arm_[k][d] = h_;
      } else {
        const double cx = std::sqrt(std::max(0.0, 1.0 - y * y));
        const double cy = std::sqrt(std::max(0.0, 1.0 - x * x));
        double s = 0.0;
        switch (d) {
          case 0: s = cx - x; break;
          case 1: s = x + cx; break;
          case 2: s = cy - y; break;
          case 3: s = y + cy; break;
        }
        arm_[k][d] = std::clamp(s, 1e-12 * h_, h_);
      }
    }
  }
}

int Grid::index(int i, int j) const {
  if (i < 0 || j < 0 || i >= n_ || j >= n_) return -1;
  return index_[static_cast<std::size_t>(j) * n_ + i];
}

bool Grid::irregular(std::size_t k) const {
  for (int d = 0; d < 4; ++d)
    if (nb_[k][d] < 0) return true;
  return false;
}

Eigen::SparseMatrix<double> Grid::neg_laplacian() const {
  std::vector<Eigen::Triplet<double>> tr;
  tr.reserve(5 * nodes_.size());
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    const auto& a = arm_[k];
    const auto& nb = nb_[k];
    double diag = 0.0;
    for (int axis = 0; axis < 2; ++axis) {
      const double hp = a[2 * axis], hm = a[2 * axis + 1];
      const double cp = 2.0 / (hp * (hp + hm)), cm = 2.0 / (hm * (hp + hm));
      diag += cp + cm;
      if (nb[2 * axis] >= 0) tr.emplace_back(static_cast<int>(k), nb[2 * axis], -cp);
      if (nb[2 * axis + 1] >= 0) tr.emplace_back(static_cast<int>(k), nb[2 * axis + 1], -cm);
    }
    tr.emplace_back(static_cast<int>(k), static_cast<int>(k), diag);
  }
  Eigen::SparseMatrix<double> L(static_cast<int>(nodes_.size()), static_cast<int>(nodes_.size()));
  L.setFromTriplets(tr.begin(), tr.end());
  return L;
}

double Grid::interpolate(const Eigen::VectorXd& f, const Point& x) const {
  const double fi = (x.x() + 1.0) / h_ - 0.5, fj = (x.y() + 1.0) / h_ - 0.5;
  const int i0 = static_cast<int>(std::floor(fi)), j0 = static_cast<int>(std::floor(fj));
  const double u = fi - i0, v = fj - j0;
  auto val = [&](int i, int j) {
    const int id = index(i, j);
    return id < 0 ? 0.0 : f[id];
  };
  return (1 - u) * (1 - v) * val(i0, j0) + u * (1 - v) * val(i0 + 1, j0) + (1 - u) * v * val(i0, j0 + 1) +
         u * v * val(i0 + 1, j0 + 1);
}

int required_grid_n(const BubbleConfig& cfg) {
  return static_cast<int>(std::ceil(12.0 / cfg.narrowest_width()));
}

// ---------------------------------------------------------------- ProjectedOperator

struct ProjectedOperator::Factor {
  bool direct = true;
  Eigen::SparseMatrix<double> A;
  Eigen::UmfPackLU<Eigen::SparseMatrix<double>> lu;  // direct path
  Eigen::GMRES<Eigen::SparseMatrix<double>, Eigen::IncompleteLUT<double>> gmres;
  // the constraint block is eliminated through a Schur complement; B is dense for wide bubbles
  Eigen::MatrixXd Bt;  // scaled constraint columns
  Eigen::MatrixXd Y;   // A^{-1} Bt
  Eigen::PartialPivLU<Eigen::MatrixXd> schur;
  std::vector<double> history;
};

namespace {

Eigen::VectorXd max_scale(const Eigen::MatrixXd& B) {
  Eigen::VectorXd s(B.cols());
  for (int j = 0; j < B.cols(); ++j) {
    s[j] = B.col(j).cwiseAbs().maxCoeff();
    if (!(s[j] > 0.0)) s[j] = 1.0;
  }
  return s;
}

}  // namespace

ProjectedOperator::ProjectedOperator(const Ansatz& ansatz, const Grid& grid, const SolverOptions& opt)
    : ansatz_(ansatz), grid_(grid), opt_(opt) {
  const std::size_t N = grid.size();
  L_ = grid.neg_laplacian();
  W_.resize(N);
  E_.resize(N);
  const int m = ansatz.count() - 1;
  B_.setZero(N, 2 * m);
  const KernelSet ks(ansatz);
  const double e2 = ansatz.config().eps0 * ansatz.config().eps0;
  const std::size_t chunk = 4096;
  parallel_for((N + chunk - 1) / chunk, [&](std::size_t b) {
    for (std::size_t k = b * chunk; k < std::min(N, (b + 1) * chunk); ++k) {
      const Point& x = grid.node(k);
      const FieldSample f = ansatz.sample(x);
      W_[k] = f.W;
      E_[k] = f.E;
      for (int i = 1; i <= m; ++i) {
        const double ch = ks.chi_x(i, x);
        if (ch == 0.0) continue;
        for (int j = 1; j <= 2; ++j) B_(k, 2 * (i - 1) + (j - 1)) = ch * ks.Z_x(i, j, x) / e2;
      }
    }
  });
  for (std::size_t k = 0; k < N; ++k)
    if (!std::isfinite(W_[k]) || !std::isfinite(E_[k])) throw SolverError("non-finite ansatz sample on the grid");
  col_scale_ = max_scale(B_);
  base_ = factor(nullptr);
}

ProjectedOperator::~ProjectedOperator() = default;

Eigen::SparseMatrix<double> ProjectedOperator::A(const Eigen::VectorXd* extra) const {
  Eigen::SparseMatrix<double> A = L_;
  for (int k = 0; k < A.rows(); ++k) A.coeffRef(k, k) -= W_[k] + (extra ? (*extra)[k] : 0.0);
  return A;
}

namespace {

Eigen::VectorXd apply_inverse(ProjectedOperator::Factor& f, const Eigen::VectorXd& v, bool record) {
  if (f.direct) return f.lu.solve(v);
  Eigen::VectorXd y = f.gmres.solve(v);
  if (record) f.history.push_back(f.gmres.error());
  if (f.gmres.info() != Eigen::Success) {
    std::ostringstream os;
    os << "Krylov stagnation; residual history:";
    for (double e : f.history) os << ' ' << e;
    os << ' ' << f.gmres.error();
    throw SolverError(os.str());
  }
  return y;
}

}  // namespace

std::unique_ptr<ProjectedOperator::Factor> ProjectedOperator::factor(const Eigen::VectorXd* extra) const {
  auto f = std::make_unique<Factor>();
  const int N = static_cast<int>(grid_.size());
  const int M = static_cast<int>(B_.cols());
  f->A = this->A(extra);
  f->A.makeCompressed();
  f->direct = grid_.n() <= opt_.direct_max_n;
  if (f->direct) {
    f->lu.compute(f->A);
    if (f->lu.info() != Eigen::Success) throw SolverError("sparse LU factorization failed");
  } else {
    f->gmres.preconditioner().setDroptol(1e-5);
    f->gmres.preconditioner().setFillfactor(20);
    f->gmres.set_restart(opt_.krylov_restart);
    f->gmres.setTolerance(opt_.krylov_tol);
    f->gmres.setMaxIterations(opt_.krylov_max_iter);
    f->gmres.compute(f->A);
    if (f->gmres.info() != Eigen::Success) throw SolverError("incomplete LU preconditioner failed");
  }
  f->Bt.resize(N, M);
  f->Y.resize(N, M);
  for (int j = 0; j < M; ++j) {
    f->Bt.col(j) = B_.col(j) / col_scale_[j];
    f->Y.col(j) = apply_inverse(*f, f->Bt.col(j), true);
  }
  if (M > 0) f->schur.compute(f->Bt.transpose() * f->Y);
  return f;
}

ProjectedSolveResult ProjectedOperator::solve_with(Factor& f, const Eigen::VectorXd& rhs,
                                                   const Eigen::VectorXd* extra) const {
  const int N = static_cast<int>(grid_.size());
  const int M = static_cast<int>(B_.cols());
  if (rhs.size() != N) throw SolverError("right-hand side size differs from the grid");
  ProjectedSolveResult r;
  // [A, -Bt; Bt^T, 0] [phi; ct] = [g1; g2]
  auto block = [&](const Eigen::VectorXd& g1, const Eigen::VectorXd& g2, Eigen::VectorXd& x, Eigen::VectorXd& c) {
    const Eigen::VectorXd y = apply_inverse(f, g1, false);
    if (M > 0) {
      c = f.schur.solve(g2 - f.Bt.transpose() * y);
      x = y + f.Y * c;
    } else {
      c.resize(0);
      x = y;
    }
  };
  Eigen::VectorXd phi, ct;
  block(rhs, Eigen::VectorXd::Zero(M), phi, ct);
  for (int s = 0; s < opt_.refinement_steps; ++s) {
    const Eigen::VectorXd r1 = rhs - (f.A * phi - f.Bt * ct);
    const Eigen::VectorXd r2 = -(f.Bt.transpose() * phi);
    Eigen::VectorXd dx, dc;
    block(r1, r2, dx, dc);
    phi += dx;
    ct += dc;
  }
  if (!phi.allFinite() || !ct.allFinite()) throw SolverError("non-finite solution of the bordered system");
  r.phi = phi;
  r.krylov_history = f.history;
  const int m = M / 2;
  r.c.resize(m, 2);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < 2; ++j) r.c(i, j) = ct[2 * i + j] / col_scale_[2 * i + j];
  r.linear_residual = linear_residual(r.phi, r.c, rhs, extra);
  const double rn = rhs.cwiseAbs().maxCoeff();
  r.linear_residual_relative = rn > 0 ? r.linear_residual / rn : r.linear_residual;
  r.orthogonality_residual = orthogonality_residual(r.phi);
  return r;
}

ProjectedSolveResult ProjectedOperator::solve(const Eigen::VectorXd& rhs) const { return solve_with(*base_, rhs, nullptr); }

ProjectedSolveResult ProjectedOperator::solve_linearized(const Eigen::VectorXd& rhs, const Eigen::VectorXd& phi) const {
  Eigen::VectorXd extra(W_.size());
  for (int k = 0; k < W_.size(); ++k) extra[k] = W_[k] * std::expm1(phi[k]);
  auto f = factor(&extra);
  return solve_with(*f, rhs, &extra);
}

double ProjectedOperator::orthogonality_residual(const Eigen::VectorXd& phi) const {
  const double pinf = phi.cwiseAbs().maxCoeff();
  if (!(pinf > 0.0)) return 0.0;
  double worst = 0.0;
  for (int j = 0; j < B_.cols(); ++j) {
    const double l1 = B_.col(j).cwiseAbs().sum();
    if (l1 == 0.0) continue;
    worst = std::max(worst, std::abs(B_.col(j).dot(phi)) / (l1 * pinf));
  }
  return worst;
}

double ProjectedOperator::linear_residual(const Eigen::VectorXd& phi, const Eigen::MatrixXd& c,
                                          const Eigen::VectorXd& rhs, const Eigen::VectorXd* extra) const {
  Eigen::VectorXd r = L_ * phi - W_.cwiseProduct(phi) - rhs;
  if (extra) r -= extra->cwiseProduct(phi);
  for (int i = 0; i < c.rows(); ++i)
    for (int j = 0; j < 2; ++j) r -= c(i, j) * B_.col(2 * i + j);
  return r.cwiseAbs().maxCoeff();
}

std::unique_ptr<ProjectedOperator> assemble(const Ansatz& ansatz, const Grid& grid, const SolverOptions& opt) {
  const int need = required_grid_n(ansatz.config());
  if (grid.n() < need) {
    std::ostringstream os;
    os << "grid n = " << grid.n() << " does not resolve the narrowest bubble (width "
       << ansatz.config().narrowest_width() << "); n >= " << need << " required";
    throw ResolutionError(os.str(), need);
  }
  return std::make_unique<ProjectedOperator>(ansatz, grid, opt);
}

// ---------------------------------------------------------------- nonlinear iteration

namespace {

Eigen::VectorXd N_of(const ProjectedOperator& op, const Eigen::VectorXd& phi) {
  Eigen::VectorXd n(phi.size());
  for (int k = 0; k < phi.size(); ++k) n[k] = nonlinear_N_value(op.W()[k], phi[k]);
  return n;
}

void finish(const ProjectedOperator& op, CorrectorResult& r) {
  r.residual_x = nonlinear_residual(op, r.phi_final, r.c_final);
  const double e0 = op.ansatz().config().eps0;
  r.residual_y = e0 * e0 * r.residual_x;
  r.orthogonality_residual = op.orthogonality_residual(r.phi_final);
  r.phi_inf = r.phi_final.cwiseAbs().maxCoeff();
}

}  // namespace

double nonlinear_residual(const ProjectedOperator& op, const Eigen::VectorXd& phi, const Eigen::MatrixXd& c) {
  return op.linear_residual(phi, c, op.E() + N_of(op, phi));
}

CorrectorResult newton_correct(const ProjectedOperator& op, const Eigen::VectorXd& phi0, const CorrectorOptions& opt) {
  CorrectorResult r;
  r.mode = "newton";
  Eigen::VectorXd phi = phi0;
  const int m = op.constraints() / 2;
  r.c_final = Eigen::MatrixXd::Zero(m, 2);
  double res = nonlinear_residual(op, phi, r.c_final);
  for (int it = 0; it < opt.newton_max_iterations; ++it) {
    // (L - W e^phi) phi_new - B c = E + W (e^phi - 1) - W e^phi phi
    Eigen::VectorXd rhs(phi.size());
    for (int k = 0; k < phi.size(); ++k) {
      const double w = op.W()[k];
      rhs[k] = op.E()[k] + w * std::expm1(phi[k]) - w * std::exp(phi[k]) * phi[k];
    }
    const ProjectedSolveResult s = op.solve_linearized(rhs, phi);
    const Eigen::VectorXd step = s.phi - phi;
    const double full = step.cwiseAbs().maxCoeff();
    // damped step: cap the sup-norm move, then backtrack on the residual
    double lam = std::min(1.0, opt.newton_max_step / std::max(full, 1e-300));
    Eigen::VectorXd trial;
    Eigen::MatrixXd ctrial;
    double tres = 0.0;
    for (int b = 0; b < 30; ++b) {
      trial = phi + lam * step;
      ctrial = (1.0 - lam) * r.c_final + lam * s.c;
      tres = trial.allFinite() ? nonlinear_residual(op, trial, ctrial) : std::numeric_limits<double>::infinity();
      if (lam == 1.0 || tres < res) break;
      lam *= 0.5;
    }
    const double diff = lam * full;
    if (!r.iterations.empty()) r.ratios.push_back(diff / r.iterations.back());
    r.iterations.push_back(diff);
    if (!std::isfinite(tres)) break;
    phi = trial;
    r.c_final = ctrial;
    res = tres;
    if (lam == 1.0 && diff < opt.tol) {
      r.converged = true;
      break;
    }
  }
  r.phi_final = phi;
  finish(op, r);
  return r;
}

CorrectorResult fixed_point_correct(const ProjectedOperator& op, const CorrectorOptions& opt) {
  if (opt.force_newton) return newton_correct(op, Eigen::VectorXd::Zero(op.grid().size()), opt);
  CorrectorResult r;
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(op.grid().size());
  const int m = op.constraints() / 2;
  r.c_final = Eigen::MatrixXd::Zero(m, 2);
  int stalled = 0;
  bool fallback = false;
  for (int it = 0; it < opt.max_iterations; ++it) {
    const Eigen::VectorXd rhs = op.E() + N_of(op, phi);
    ProjectedSolveResult s = op.solve(rhs);
    const double diff = (s.phi - phi).cwiseAbs().maxCoeff();
    if (!r.iterations.empty()) {
      const double ratio = diff / r.iterations.back();
      r.ratios.push_back(ratio);
      stalled = ratio > opt.stall_ratio ? stalled + 1 : 0;
    }
    r.iterations.push_back(diff);
    if (!s.phi.allFinite() || diff > opt.divergence_bound) {
      fallback = true;
      break;
    }
    phi = s.phi;
    r.c_final = s.c;
    if (diff < opt.tol) {
      r.converged = true;
      break;
    }
    if (stalled >= opt.stall_count) {
      fallback = true;
      break;
    }
  }
  if (!r.converged) fallback = true;
  if (fallback) {
    const bool usable = phi.allFinite() && phi.cwiseAbs().maxCoeff() < opt.newton_max_step * 4.0;
    CorrectorResult nr = newton_correct(op, usable ? phi : Eigen::VectorXd::Zero(phi.size()), opt);
    nr.iterations.insert(nr.iterations.begin(), r.iterations.begin(), r.iterations.end());
    if (!nr.converged) {
      std::ostringstream os;
      os << "corrector diverged in fixed-point and Newton modes; trace:";
      for (double d : nr.iterations) os << ' ' << d;
      throw SolverError(os.str());
    }
    nr.ratios.insert(nr.ratios.begin(), r.ratios.begin(), r.ratios.end());
    return nr;
  }
  r.phi_final = phi;
  finish(op, r);
  return r;
}

Json CorrectorResult::to_json() const {
  Json j;
  j["mode"] = mode;
  j["converged"] = converged;
  Json c = Json::array();
  for (int i = 0; i < c_final.rows(); ++i) c.push_back({c_final(i, 0), c_final(i, 1)});
  j["c"] = c;
  j["iterations"] = iterations;
  j["ratios"] = ratios;
  j["residual_x"] = residual_x;
  j["residual_y"] = residual_y;
  j["orthogonality_residual"] = orthogonality_residual;
  j["phi_inf"] = phi_inf;
  j["mass"] = mass;
  return j;
}

// ---------------------------------------------------------------- multipliers

std::vector<MultiplierRow> multiplier_check(const ProblemSpec& spec, const DiskDomain& dom, const PointList& xi_star,
                                            int grid_n, const std::vector<double>& displacements,
                                            const SolverOptions& sopt, const CorrectorOptions& copt) {
  std::vector<std::pair<std::string, PointList>> cases{{"xi_star", xi_star}};
  for (double d : displacements) {
    PointList xi = xi_star;
    for (Point& x : xi) x = spec.p + (1.0 + d) * (x - spec.p);
    std::ostringstream os;
    os << "radial displacement " << d;
    cases.push_back({os.str(), xi});
  }
  const Grid grid(grid_n);
  std::vector<MultiplierRow> rows;
  for (const auto& [label, xi] : cases) {
    const BubbleConfig cfg = build_config(spec, xi, dom);
    const Ansatz an(spec, cfg, dom, HMode::exact);
    auto op = assemble(an, grid, sopt);
    const CorrectorResult cr = fixed_point_correct(*op, copt);
    MultiplierRow row;
    row.label = label;
    row.xi = xi;
    row.c = cr.c_final;
    row.gamma = cfg.gamma;
    row.converged = cr.converged;
    const Eigen::VectorXd& phi = cr.phi_final;
    row.rhs_star_norm = star_norm_x(an, [&](const Point& x) {
                          const FieldSample f = an.sample(x);
                          return f.E + nonlinear_N_value(f.W, grid.interpolate(phi, x));
                        }).value;
    double worst = 0.0;
    for (int i = 0; i < row.c.rows(); ++i)
      for (int j = 0; j < 2; ++j) worst = std::max(worst, cfg.gamma[i] * std::abs(row.c(i, j)));
    row.normalized = row.rhs_star_norm > 0 ? worst / row.rhs_star_norm : 0.0;
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------- mass

Json MassReport::to_json() const {
  Json j;
  j["total"] = total;
  j["target"] = target;
  j["relative_error"] = relative_error;
  j["per_region"] = per_region;
  j["region_targets"] = region_targets;
  return j;
}

MassReport mass_quantization(const Ansatz& an, const QuadratureScheme& scheme, const Grid* grid,
                             const Eigen::VectorXd* phi) {
  if ((grid == nullptr) != (phi == nullptr)) throw ConfigurationError("mass_quantization: grid and phi go together");
  const auto comps = integrate_nodes(
      [&](const QuadNode& n, double* v) {
        const double w = an.W_hat_at(n.x, n.anchor, n.rel);
        v[0] = grid ? w * std::exp(grid->interpolate(*phi, n.x)) : w;
      },
      1, scheme);
  IntegrationResult ir;
  ir.per_region = comps[0];
  ir.value = region_total(comps[0]);
  MassReport m;
  m.total = ir.value;
  const double a = an.spec().alpha;
  m.target = 8.0 * kPi * (an.count() + a);
  m.relative_error = std::abs(m.total - m.target) / m.target;
  m.per_region = ir.per_region;
  for (const Patch& p : scheme.patches) {
    double tgt = 0.0;
    for (int i : p.members) tgt += i == 0 ? 8.0 * kPi * (1.0 + a) : 8.0 * kPi;
    m.region_targets.push_back(tgt);
  }
  m.region_targets.push_back(0.0);
  return m;
}

void dump_grid_field(const Grid& grid, const Eigen::VectorXd& phi, const std::string& csv_path) {
  std::ofstream out(csv_path);
  if (!out) throw std::runtime_error("cannot open " + csv_path + " for writing");
  out << "x1,x2,phi\n" << std::setprecision(17);
  for (std::size_t k = 0; k < grid.size(); ++k) out << grid.node(k).x() << ',' << grid.node(k).y() << ',' << phi[k] << '\n';
  if (!out) throw std::runtime_error("write failed for " + csv_path);
}

}  // namespace bubbler
