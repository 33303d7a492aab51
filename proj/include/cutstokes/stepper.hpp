#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "cutstokes/errors.hpp"
#include "cutstokes/forms.hpp"
#include "cutstokes/geometry.hpp"
#include "cutstokes/manufactured.hpp"
#include "cutstokes/mesh.hpp"
#include "cutstokes/solver.hpp"
#include "cutstokes/spaces.hpp"

namespace cutstokes {

struct StepConfig {
  int k = 2;
  double h = 0.1;
  double dt = 0.05;
  double final_time = 1.0;
  double nu = 1e-2;
  double gamma_s = 1.0;
  double sigma = 0.0;  // <= 0: 40 k^2
  double c_delta = 1.0;
  int bdf_order = 1;
  int subdivision = 0;
  StripAdjacency adjacency = StripAdjacency::Vertex;
  int error_degree = 0;  // <= 0: 2k + 2
  bool monitor_energy = false;
  int snapshot_every = 0;  // 0 disables VTK output
  std::string snapshot_dir;
  std::ostream* log = nullptr;

  double penalty() const { return sigma > 0.0 ? sigma : 40.0 * k * k; }
  int quadrature_degree() const { return error_degree > 0 ? error_degree : 2 * k + 2; }
  int num_steps() const { return static_cast<int>(std::llround(final_time / dt)); }

  void validate() const {
    if (k < 2 || k > LagrangeBasis::kMaxOrder) throw std::invalid_argument("k must be in [2, 4]");
    if (!(h > 0.0)) throw std::invalid_argument("h must be positive");
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
    if (!(final_time > 0.0)) throw std::invalid_argument("final time must be positive");
    if (std::abs(num_steps() * dt - final_time) > 1e-9 * final_time)
      throw std::invalid_argument("final time must be an integer multiple of dt");
    if (!(nu > 0.0)) throw std::invalid_argument("nu must be positive");
    if (!(gamma_s > 0.0)) throw std::invalid_argument("gamma_s must be positive");
    if (!(c_delta > 0.0)) throw std::invalid_argument("c_delta must be positive");
    if (bdf_order != 1 && bdf_order != 2) throw std::invalid_argument("bdf_order must be 1 or 2");
    if (subdivision < 0) throw std::invalid_argument("subdivision must be >= 0");
    if (snapshot_every < 0) throw std::invalid_argument("snapshot cadence must be >= 0");
  }
};

/// Solution and discrete setting at t_n = n dt. History vectors keep their own layouts.
struct StepState {
  int n = 0;
  double t = 0.0;
  std::shared_ptr<const BackgroundMesh> mesh;  // keeps layouts and geometry valid
  std::shared_ptr<const CutDecomposition> cut;
  std::shared_ptr<const ActiveSets> active;
  TaylorHoodLayout layout;
  FieldVector u;
  FieldVector u_prev;  // u^{n-1}, only kept for BDF2
  FieldVector p;       // unset at n = 0
  double residual = 0.0;
};

/// BDF coefficients: alpha0 u^{n+1} - sum_j beta_j u^{n-j}, all over dt.
struct BdfWeights {
  double alpha0 = 1.0;
  std::vector<double> beta;

  static BdfWeights of_order(int order) {
    if (order == 1) return {1.0, {1.0}};
    if (order == 2) return {1.5, {2.0, -0.5}};
    throw std::invalid_argument("BdfWeights: order must be 1 or 2");
  }
};

/// Velocity nodes as VTK vertices with the vector field attached.
inline void write_velocity_vtk(std::ostream& os, const FieldVector& u) {
  const auto& l = *u.layout;
  os << "# vtk DataFile Version 3.0\ncutstokes velocity\nASCII\nDATASET UNSTRUCTURED_GRID\nPOINTS " << l.num_nodes()
     << " double\n";
  os.precision(17);
  for (const auto& p : l.node_points) os << p.x << ' ' << p.y << " 0\n";
  os << "CELLS " << l.num_nodes() << ' ' << 2 * l.num_nodes() << '\n';
  for (int i = 0; i < l.num_nodes(); ++i) os << "1 " << i << '\n';
  os << "CELL_TYPES " << l.num_nodes() << '\n';
  for (int i = 0; i < l.num_nodes(); ++i) os << "1\n";
  os << "POINT_DATA " << l.num_nodes() << "\nVECTORS velocity double\n";
  for (int i = 0; i < l.num_nodes(); ++i)
    os << u.coefficients[l.dof(i, 0)] << ' ' << u.coefficients[l.dof(i, 1)] << " 0\n";
}

class Stepper {
 public:
  Stepper(StepConfig config, ManufacturedCase mcase) : config_(std::move(config)), case_(std::move(mcase)) {
    config_.validate();
    // h is the largest element diameter. Fitted runs keep the box exact instead.
    mesh_ = std::make_shared<BackgroundMesh>(case_.fitted ? build_structured_mesh(case_.box, config_.h / std::sqrt(2.0))
                                                          : build_mesh_with_hmax(case_.box, config_.h));
    delta_ = case_.fitted ? 0.0 : strip_width(config_.c_delta, case_.phi.w_inf, config_.dt, config_.bdf_order);
  }

  const BackgroundMesh& mesh() const { return *mesh_; }
  const StepConfig& config() const { return config_; }
  const ManufacturedCase& manufactured() const { return case_; }
  double strip_delta() const { return delta_; }

  FormParams form_params(const ActiveSets& active) const {
    FormParams p;
    p.nu = config_.nu;
    p.sigma = config_.penalty();
    p.gamma_s = config_.gamma_s;
    p.L = active.strip_rings;
    p.dt = config_.dt;
    p.k = config_.k;
    return p;
  }

  /// Cut geometry and active sets at time t.
  std::pair<std::shared_ptr<const CutDecomposition>, std::shared_ptr<const ActiveSets>> setting(double t) const {
    const int qdeg = config_.quadrature_degree();
    auto cut = std::make_shared<CutDecomposition>(
        case_.fitted ? fitted_decomposition(*mesh_, qdeg)
                     : classify_and_decompose(*mesh_, case_.phi, t, config_.subdivision, qdeg));
    cut->time = t;
    auto active = std::make_shared<ActiveSets>(extract_active_sets(*mesh_, *cut, delta_, config_.adjacency));
    if (case_.fitted) {
      active->facets_velocity_gp.clear();
      active->facets_pressure_gp.clear();
    }
    return {cut, active};
  }

  StepState initialize() const {
    StepState s;
    s.n = 0;
    s.t = 0.0;
    s.mesh = mesh_;
    std::tie(s.cut, s.active) = setting(0.0);
    s.layout = build_layout(*mesh_, *s.active, config_.k);
    const auto& u0 = case_.velocity;
    s.u = interpolate(s.layout.velocity, [&](const Point2& x) { return u0(x, 0.0); });
    log_step(s);
    return s;
  }

  StepState advance(const StepState& prev) const {
    StepState s;
    s.n = prev.n + 1;
    s.t = s.n * config_.dt;
    s.mesh = mesh_;
    std::tie(s.cut, s.active) = setting(s.t);
    s.layout = build_layout(*mesh_, *s.active, config_.k);

    const int order = std::min(config_.bdf_order, s.n);
    const auto w = BdfWeights::of_order(order);
    Eigen::VectorXd history = Eigen::VectorXd::Zero(s.layout.velocity->num_dofs());
    const FieldVector* levels[2] = {&prev.u, &prev.u_prev};
    for (int j = 0; j < order; ++j) {
      try {
        history += w.beta[j] * transfer(*levels[j], s.layout.velocity, &s.active->in_cut_mesh).coefficients;
      } catch (const ContainmentError& e) {
        throw ContainmentError(std::string(e.what()) + " at step " + std::to_string(s.n) + " (history level " +
                                   std::to_string(j + 1) + ", delta_h=" + std::to_string(delta_) + ")",
                               e.missing_nodes());
      }
    }

    const auto params = form_params(*s.active);
    const auto blocks = assemble_blocks(*s.cut, *s.active, s.layout, params, case_.forcing, s.t);
    const auto system = build_system(blocks, params, w.alpha0, &history);
    std::ostringstream ctx;
    ctx << "step " << s.n << ", t=" << s.t << ", active=" << s.active->t_active.size()
        << ", cut=" << s.active->t_boundary.size() << ", dofs=" << system.size();
    auto sol = solve(system, ctx.str());
    s.u = std::move(sol.u);
    s.p = std::move(sol.p);
    s.residual = sol.scaled_residual;
    if (config_.bdf_order == 2) s.u_prev = prev.u;
    log_step(s);
    maybe_snapshot(s);
    return s;
  }

  const std::shared_ptr<BackgroundMesh>& mesh_ptr() const { return mesh_; }

 private:
  void log_step(const StepState& s) const {
    if (config_.log == nullptr) return;
    *config_.log << "step " << s.n << " t=" << s.t << " dofs_u=" << s.layout.velocity->num_dofs()
                 << " dofs_p=" << s.layout.pressure->num_dofs() << " residual=" << s.residual << '\n';
  }

  void maybe_snapshot(const StepState& s) const {
    if (config_.snapshot_every <= 0 || s.n % config_.snapshot_every != 0) return;
    namespace fs = std::filesystem;
    const fs::path dir = config_.snapshot_dir.empty() ? fs::path(".") : fs::path(config_.snapshot_dir);
    fs::create_directories(dir);
    std::ofstream geo(dir / ("cut_" + std::to_string(s.n) + ".vtk"));
    write_cut_vtk(geo, *s.cut);
    std::ofstream vel(dir / ("velocity_" + std::to_string(s.n) + ".vtk"));
    write_velocity_vtk(vel, s.u);
  }

 private:
  StepConfig config_;
  ManufacturedCase case_;
  std::shared_ptr<BackgroundMesh> mesh_;
  double delta_ = 0.0;
};

struct RunResult {
  ErrorReport errors;
  StepState final_state;
  StepErrors initial_error;
  double energy = 0.0;  // ||u^N||^2 + dt sum nu |||u^n|||_*^2, when monitored
  double wall_time_s = 0.0;
  int max_dofs = 0;
  int steps = 0;
};

/// Full trajectory over [0, T] with per-step errors. `on_step` sees every state after n = 0.
inline RunResult run(const StepConfig& config, const ManufacturedCase& mcase,
                     const std::function<void(const StepState&, const StepErrors&)>& on_step = {}) {
  const auto start = std::chrono::steady_clock::now();
  Stepper stepper(config, mcase);
  RunResult r;
  r.errors.h = config.h;
  r.errors.dt = config.dt;
  r.errors.nu = config.nu;
  r.errors.gamma_s = config.gamma_s;
  r.errors.k = config.k;
  r.errors.subdivision = config.subdivision;
  r.errors.bdf_order = config.bdf_order;
  const int qdeg = config.quadrature_degree();

  StepState state = stepper.initialize();
  r.initial_error = step_errors(*state.cut, &state.u, nullptr, mcase, 0.0, qdeg);
  double dissipation = 0.0;
  const int n = config.num_steps();
  for (int i = 0; i < n; ++i) {
    state = stepper.advance(state);
    auto e = step_errors(*state.cut, &state.u, &state.p, mcase, state.t, qdeg);
    e.step = state.n;
    r.errors.steps.push_back(e);
    r.max_dofs = std::max(r.max_dofs, state.layout.velocity->num_dofs() + state.layout.pressure->num_dofs() + 1);
    if (config.monitor_energy) dissipation += config.dt * config.nu * triple_norms(*state.cut, state.u, state.p).velocity_star_sq;
    if (on_step) on_step(state, e);
  }
  r.errors.accumulate();
  if (config.monitor_energy) {
    const auto m = assemble_mass(*state.cut, *state.layout.velocity);
    r.energy = state.u.coefficients.dot(m * state.u.coefficients) + dissipation;
  }
  r.steps = n;
  r.final_state = std::move(state);
  r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace cutstokes
