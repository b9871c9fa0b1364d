#include "bubbler/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "bubbler/ansatz.hpp"
#include "bubbler/corrector.hpp"
#include "bubbler/energy.hpp"
#include "bubbler/errors.hpp"
#include "bubbler/params.hpp"
#include "bubbler/quadrature.hpp"

#ifndef BUBBLER_VERSION
#define BUBBLER_VERSION "0.0.0"
#endif
#ifndef BUBBLER_GIT_REV
#define BUBBLER_GIT_REV "unknown"
#endif

namespace bubbler {

std::string version_string() { return BUBBLER_VERSION; }
std::string git_revision() { return BUBBLER_GIT_REV; }

Stage stage_from_string(const std::string& s) {
  if (s == "construct") return Stage::construct;
  if (s == "maximize") return Stage::maximize;
  if (s == "energy") return Stage::energy;
  if (s == "verify") return Stage::verify;
  if (s == "solve") return Stage::solve;
  if (s == "all") return Stage::all;
  throw ConfigurationError("unknown stage '" + s + "'");
}

std::string stage_to_string(Stage s) {
  switch (s) {
    case Stage::construct: return "construct";
    case Stage::maximize: return "maximize";
    case Stage::energy: return "energy";
    case Stage::verify: return "verify";
    case Stage::solve: return "solve";
    case Stage::all: return "all";
  }
  return "all";
}

Json RunReport::to_json() const {
  Json j;
  j["version"] = version;
  j["git_rev"] = git_rev;
  j["config"] = config;
  j["stages"] = stages;
  Json cs = Json::array();
  for (const Check& c : checks)
    cs.push_back({{"name", c.name}, {"passed", c.passed}, {"value", c.value}, {"tolerance", c.tolerance}, {"note", c.note}});
  j["checks"] = cs;
  Json ts = Json::object();
  for (const auto& [name, t] : tables) ts[name] = {{"header", t.header}, {"rows", t.rows.size()}};
  j["tables"] = ts;
  j["exit_code"] = exit_code;
  return j;
}

RunReport RunReport::from_json(const Json& j) {
  RunReport r;
  r.version = j.at("version").get<std::string>();
  r.git_rev = j.at("git_rev").get<std::string>();
  r.config = j.at("config");
  r.stages = j.at("stages");
  for (const auto& c : j.at("checks"))
    r.checks.push_back({c.at("name").get<std::string>(), c.at("passed").get<bool>(), c.at("value").get<double>(),
                        c.at("tolerance").get<double>(), c.at("note").get<std::string>()});
  r.exit_code = j.at("exit_code").get<int>();
  return r;
}

bool RunReport::all_passed() const {
  for (const Check& c : checks)
    if (!c.passed) return false;
  return true;
}

namespace {

std::string tag(double t) {
  std::ostringstream os;
  os << t;
  return os.str();
}

struct Context {
  const RunConfig& cfg;
  bool verbose;
  DiskDomain dom;
  std::vector<ProblemSpec> specs;
  std::vector<PointList> xi;  // current centers per ladder point
  bool maximized = false;
  RunReport& report;

  void log(const std::string& s) const {
    if (verbose) std::cerr << "[bubbler] " << s << '\n';
  }
  void check(const std::string& name, bool ok, double value, double tol, const std::string& note = "") {
    report.checks.push_back({name, ok, value, tol, note});
  }
};

Json stage_construct(Context& cx) {
  Json out = Json::array();
  for (std::size_t k = 0; k < cx.specs.size(); ++k) {
    const ProblemSpec& sp = cx.specs[k];
    if (sp.m > 0 && cx.xi[k].empty()) cx.xi[k] = polygon_config(sp, cx.dom);
    const BubbleConfig bc = build_config(sp, cx.xi[k], cx.dom);
    const Ansatz an(sp, bc, cx.dom, HMode::exact);
    double bnd = 0.0;
    for (int j = 0; j < 720; ++j) {
      const double th = 2.0 * kPi * j / 720;
      bnd = std::max(bnd, std::abs(an.U(Point(std::cos(th), std::sin(th)))));
    }
    const ConfigSpaceReport cs = in_configuration_space(sp, cx.xi[k], cx.dom);
    const BoundsReport br = theorem_bounds_check(bc, sp);
    Json e;
    e["t"] = sp.t;
    e["spec"] = to_json(sp);
    e["config"] = to_json(bc);
    e["boundary_residual"] = bnd;
    e["fourier_accuracy_warning"] = an.accuracy_warning();
    Json viol = Json::array();
    for (const auto& v : cs.violations) viol.push_back({{"constraint", v.constraint}, {"i", v.index}, {"slack", v.slack}});
    e["configuration_space"] = {{"inside", cs.inside}, {"on_boundary", cs.on_boundary}, {"violations", viol}};
    e["bounds"] = {{"mu0_ratio", br.mu0_ratio}, {"mu_ratio", br.mu_ratio}, {"mu_min", br.mu_min}};
    out.push_back(e);
    cx.check("boundary_residual t=" + tag(sp.t), bnd <= cx.cfg.tol("boundary"), bnd, cx.cfg.tol("boundary"));

    // coarse field dump for plotting
    CsvTable tb;
    tb.header = {"x1", "x2", "U", "W_hat", "E_hat"};
    const int n = 81;
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const Point x(-1.0 + 2.0 * (i + 0.5) / n, -1.0 + 2.0 * (j + 0.5) / n);
        if (x.squaredNorm() >= 1.0) continue;
        const FieldSample f = an.sample(x);
        tb.rows.push_back({x.x(), x.y(), f.U, f.W, f.E});
      }
    const std::string name = "fields_t" + tag(sp.t);
    cx.report.tables[name + ".csv"] = std::move(tb);
    cx.report.sidecars[name + ".json"] = {{"fields", name + ".csv"}, {"spec", to_json(sp)}, {"config", to_json(bc)}};
    cx.log("construct t=" + tag(sp.t) + " boundary residual " + tag(bnd));
  }
  return out;
}

Json stage_maximize(Context& cx) {
  Json out = Json::array();
  if (cx.cfg.m == 0) {
    cx.maximized = true;
    return {{"skipped", "m = 0: no free centers"}};
  }
  CsvTable tr;
  tr.header = {"t", "start", "phase", "barrier_weight", "iteration", "objective", "surrogate"};
  for (std::size_t k = 0; k < cx.specs.size(); ++k) {
    MaximizeOptions opt;
    opt.seed = cx.cfg.seed;
    opt.random_starts = cx.cfg.random_starts;
    const MaximizerResult mr = maximize_reduced(cx.specs[k], cx.dom, opt);
    cx.xi[k] = mr.xi_star;
    Json e = mr.to_json();
    e["t"] = cx.specs[k].t;
    out.push_back(e);
    for (const TraceEntry& te : mr.optimizer_trace)
      tr.rows.push_back({cx.specs[k].t, double(te.start), double(te.phase), te.barrier_weight, double(te.iteration),
                         te.objective, te.surrogate});
    cx.check("maximizer_interior t=" + tag(cx.specs[k].t), mr.interior_flag, mr.interior_flag ? 1.0 : 0.0, 1.0,
             mr.interior_flag ? "" : "active constraints at the maximizer");
    cx.log("maximize t=" + tag(cx.specs[k].t) + " S* = " + tag(mr.surrogate_value));
  }
  cx.report.tables["maximizer_trace.csv"] = std::move(tr);
  cx.maximized = true;
  return out;
}

Json stage_energy(Context& cx) {
  Json out = Json::array();
  CsvTable lad;
  lad.header = {"t", "J_quadrature", "surrogate", "remainder", "mass", "mass_rel_err"};
  for (std::size_t k = 0; k < cx.specs.size(); ++k) {
    const ProblemSpec& sp = cx.specs[k];
    const BubbleConfig bc = build_config(sp, cx.xi[k], cx.dom);
    const QuadratureScheme sc = build_scheme(bc, cx.cfg.quadrature_budget, cx.cfg.quadrature_level);
    const EnergyReport er = energy_quadrature(sp, bc, sc, cx.dom, true);
    Json e = er.to_json();
    e["t"] = sp.t;
    e["scheme"] = sc.descriptor();
    out.push_back(e);
    const double target = 8.0 * kPi * (sp.m + 1.0 + sp.alpha);
    lad.rows.push_back({sp.t, er.J_quadrature, er.surrogate, er.remainder, er.mass, std::abs(er.mass - target) / target});
    const double rel = er.quadrature_tol / std::max(1.0, std::abs(er.J_quadrature));
    cx.check("energy_quadrature t=" + tag(sp.t), rel <= cx.cfg.tol("energy_quadrature"), rel,
             cx.cfg.tol("energy_quadrature"));
    cx.log("energy t=" + tag(sp.t) + " remainder " + tag(er.remainder));
  }
  cx.report.tables["ladder.csv"] = std::move(lad);
  return out;
}

Json stage_verify(Context& cx) {
  Json out = Json::array();
  std::vector<double> errs;
  for (std::size_t k = 0; k < cx.specs.size(); ++k) {
    const ProblemSpec& sp = cx.specs[k];
    const BubbleConfig bc = build_config(sp, cx.xi[k], cx.dom);
    const QuadratureScheme sc = build_scheme(bc, cx.cfg.quadrature_budget, cx.cfg.quadrature_level);
    const Ansatz an(sp, bc, cx.dom, HMode::exact);
    const MassReport mr = mass_quantization(an, sc);
    Json e = mr.to_json();
    e["t"] = sp.t;
    out.push_back(e);
    errs.push_back(mr.relative_error);
  }
  const double last = errs.back();
  cx.check("mass_quantization t=" + tag(cx.specs.back().t), last <= cx.cfg.tol("mass_relative"), last,
           cx.cfg.tol("mass_relative"));
  if (errs.size() > 1) {
    bool dec = true;
    for (std::size_t k = 1; k < errs.size(); ++k) dec = dec && errs[k] < errs[k - 1];
    cx.check("mass_error_decreasing", dec, dec ? 1.0 : 0.0, 1.0);
  }
  return out;
}

Json stage_solve(Context& cx) {
  Json out = Json::array();
  const Grid grid(cx.cfg.grid_n);
  for (std::size_t k = 0; k < cx.specs.size(); ++k) {
    const ProblemSpec& sp = cx.specs[k];
    const BubbleConfig bc = build_config(sp, cx.xi[k], cx.dom);
    const int need = required_grid_n(bc);
    Json e;
    e["t"] = sp.t;
    e["grid_n"] = cx.cfg.grid_n;
    if (need > cx.cfg.grid_n) {
      e["skipped"] = "grid does not resolve the narrowest bubble; n >= " + std::to_string(need) + " required";
      out.push_back(e);
      continue;
    }
    const Ansatz an(sp, bc, cx.dom, HMode::exact);
    auto op = assemble(an, grid);
    CorrectorOptions co;
    co.tol = cx.cfg.tol("fixed_point");
    CorrectorResult cr = fixed_point_correct(*op, co);
    const QuadratureScheme sc = build_scheme(bc, cx.cfg.quadrature_budget, cx.cfg.quadrature_level);
    const MassReport mr = mass_quantization(an, sc, &grid, &cr.phi_final);
    cr.mass = mr.total;
    e["corrector"] = cr.to_json();
    e["mass"] = mr.to_json();
    out.push_back(e);
    cx.check("corrector_converged t=" + tag(sp.t), cr.converged, cr.converged ? 1.0 : 0.0, 1.0, cr.mode);
    cx.check("corrector_residual t=" + tag(sp.t), cr.residual_x <= cx.cfg.tol("corrector_residual"), cr.residual_x,
             cx.cfg.tol("corrector_residual"));
    cx.check("orthogonality t=" + tag(sp.t), cr.orthogonality_residual <= cx.cfg.tol("orthogonality"),
             cr.orthogonality_residual, cx.cfg.tol("orthogonality"));

    CsvTable tb;
    tb.header = {"x1", "x2", "phi"};
    const int stride = std::max(1, grid.n() / 256);
    for (std::size_t q = 0; q < grid.size(); ++q)
      if (grid.lattice_i(q) % stride == 0 && grid.lattice_j(q) % stride == 0)
        tb.rows.push_back({grid.node(q).x(), grid.node(q).y(), cr.phi_final[q]});
    cx.report.tables["phi_t" + tag(sp.t) + ".csv"] = std::move(tb);
    cx.log("solve t=" + tag(sp.t) + " |phi| = " + tag(cr.phi_inf));
  }
  return out;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigurationError*>(&e)) return 2;
  return 3;
}

}  // namespace

RunReport run_pipeline(const RunConfig& cfg, Stage stage, bool verbose) {
  RunReport report;
  report.config = cfg.to_json();
  report.version = version_string();
  report.git_rev = git_revision();

  Context cx{cfg, verbose, DiskDomain(cfg.h_spec, cfg.alpha), {}, {}, false, report};
  try {
    for (double t : cfg.t_ladder) cx.specs.push_back(ProblemSpec::make(cfg.alpha, cfg.m, t, cfg.alpha_hat, cfg.d, cfg.R0));
  } catch (const std::exception& e) {
    report.stages["setup"] = {{"status", "failed"}, {"error", e.what()}};
    report.exit_code = exit_code_for(e);
    return report;
  }
  cx.xi.assign(cx.specs.size(), PointList{});

  std::vector<std::string> plan;
  switch (stage) {
    case Stage::construct: plan = {"construct"}; break;
    case Stage::maximize: plan = {"construct", "maximize"}; break;
    case Stage::energy: plan = {"construct", "maximize", "energy"}; break;
    case Stage::verify: plan = {"construct", "maximize", "verify"}; break;
    case Stage::solve: plan = {"construct", "maximize", "solve"}; break;
    case Stage::all: plan = {"construct", "maximize", "energy", "verify", "solve"}; break;
  }
  int code = 0;
  for (const std::string& name : plan) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      Json res;
      if (name == "construct") res = stage_construct(cx);
      else if (name == "maximize") res = stage_maximize(cx);
      else if (name == "energy") res = stage_energy(cx);
      else if (name == "verify") res = stage_verify(cx);
      else res = stage_solve(cx);
      report.stages[name] = {{"status", "ok"}, {"results", res}};
    } catch (const std::exception& e) {
      report.stages[name] = {{"status", "failed"}, {"error", e.what()}};
      code = std::max(code, exit_code_for(e));
      cx.log("stage " + name + " failed: " + e.what());
      if (name == "construct" || name == "maximize") {
        report.timings[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        break;  // later stages need the centers
      }
    }
    report.timings[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  if (code == 0 && !report.all_passed()) code = 1;
  report.exit_code = code;
  return report;
}

namespace {

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string csv_text(const CsvTable& t) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (std::size_t i = 0; i < t.header.size(); ++i) os << (i ? "," : "") << t.header[i];
  os << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
    os << '\n';
  }
  return os.str();
}

}  // namespace

void emit(const RunReport& report, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "tables");
  for (const auto& [name, t] : report.tables) write_atomic(fs::path(dir) / "tables" / name, csv_text(t));
  for (const auto& [name, j] : report.sidecars) write_atomic(fs::path(dir) / "tables" / name, j.dump(2) + "\n");
  Json tj = Json::object();
  for (const auto& [k, v] : report.timings) tj[k] = v;
  write_atomic(fs::path(dir) / "timings.json", tj.dump(2) + "\n");
  write_atomic(fs::path(dir) / "report.json", report.to_json().dump(2) + "\n");
}

}  // namespace bubbler
