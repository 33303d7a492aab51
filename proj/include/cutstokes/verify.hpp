#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "cutstokes/errors.hpp"
#include "cutstokes/forms.hpp"
#include "cutstokes/geometry.hpp"
#include "cutstokes/manufactured.hpp"
#include "cutstokes/quadrature.hpp"
#include "cutstokes/solver.hpp"
#include "cutstokes/spaces.hpp"
#include "cutstokes/stepper.hpp"

// Fast property checks shared by the `verify` subcommand and the test suites.
namespace cutstokes::verify {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << std::scientific << v;
  return os.str();
}

inline double slope(const std::vector<double>& h, const std::vector<double>& e) {
  // least-squares slope of log e against log h
  const int n = static_cast<int>(h.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    const double x = std::log(h[i]), y = std::log(e[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline double min_pairwise_rate(const std::vector<double>& h, const std::vector<double>& e) {
  double r = INFINITY;
  for (std::size_t i = 0; i + 1 < e.size(); ++i) r = std::min(r, std::log(e[i] / e[i + 1]) / std::log(h[i] / h[i + 1]));
  return r;
}

struct DiskSetting {
  std::shared_ptr<BackgroundMesh> mesh;
  CutDecomposition cut;
  ActiveSets active;
  TaylorHoodLayout layout;
};

/// Moving-disk geometry at time t on a mesh with h_max = h.
inline DiskSetting disk_setting(double h, double t = 0.0, int k = 2, double delta = 0.05, int s = 0,
                                const LevelSet* phi = nullptr) {
  DiskSetting d;
  d.mesh = std::make_shared<BackgroundMesh>(build_mesh_with_hmax({-1.0, -1.0, 2.0, 1.0}, h));
  const auto mc = moving_disk_case(1.0);
  d.cut = classify_and_decompose(*d.mesh, phi ? *phi : mc.phi, t, s, 2 * k + 2);
  d.active = extract_active_sets(*d.mesh, d.cut, delta);
  d.layout = build_layout(*d.mesh, d.active, k);
  return d;
}

inline double quad_form(const SparseBlock& a, const Eigen::VectorXd& v) { return v.dot(a * v); }

/// |v^T G v| measured against the roundoff scale |v|^T |G| |v|.
inline double relative_quad_form(const SparseBlock& g, const Eigen::VectorXd& v) {
  double num = 0.0, den = 0.0;
  for (int c = 0; c < g.outerSize(); ++c)
    for (SparseBlock::InnerIterator it(g, c); it; ++it) {
      num += v[it.row()] * it.value() * v[c];
      den += std::abs(v[it.row()] * it.value() * v[c]);
    }
  return den > 0.0 ? std::abs(num) / den : 0.0;
}

inline double asymmetry(const SparseBlock& a) {
  const SparseBlock d = a - SparseBlock(a.transpose());
  return d.norm() / std::max(a.norm(), 1e-300);
}

}  // namespace detail

inline CheckResult timed(const std::string& name, const std::function<bool(std::string&)>& body) {
  CheckResult r;
  r.name = name;
  const auto start = std::chrono::steady_clock::now();
  try {
    r.passed = body(r.detail);
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

/// Triangle and line rules integrate every monomial up to their degree exactly.
inline CheckResult quadrature_exactness() {
  return timed("quadrature exactness", [](std::string& detail) {
    double worst = 0.0;
    for (int d = 0; d <= 12; ++d) {
      const auto& rule = reference_triangle_rule(d);
      for (int a = 0; a <= d; ++a)
        for (int b = 0; a + b <= d; ++b) {
          double s = 0.0;
          for (const auto& q : rule) s += q.w * std::pow(q.x.x, a) * std::pow(q.x.y, b);
          // int x^a y^b over the reference triangle = a! b! / (a + b + 2)!
          const double exact = std::tgamma(a + 1) * std::tgamma(b + 1) / std::tgamma(a + b + 3);
          worst = std::max(worst, std::abs(s - exact) / exact);
        }
      const auto& g = gauss_legendre(line_points_for_degree(d));
      double s = 0.0;
      for (std::size_t i = 0; i < g.points.size(); ++i) s += g.weights[i] * std::pow(g.points[i], d);
      worst = std::max(worst, std::abs(s - 1.0 / (d + 1)) * (d + 1));
    }
    detail = "max relative error " + detail::fmt(worst);
    return worst <= 1e-12;
  });
}

/// Cut quadrature: disk area converges at second order for s = 0 and each subdivision level gains ~4x.
inline CheckResult disk_area_convergence() {
  return timed("disk area order and subdivision gain", [](std::string& detail) {
    const double exact = std::numbers::pi / 2.0;
    std::vector<double> hs{0.2, 0.1, 0.05, 0.025}, err;
    for (double h : hs) {
      const auto d = detail::disk_setting(h);
      err.push_back(std::abs(d.cut.total_inside_area() - exact));
    }
    const double order = detail::slope(hs, err);
    std::vector<double> es;
    for (int s = 0; s <= 3; ++s) {
      const auto d = detail::disk_setting(0.1, 0.0, 2, 0.05, s);
      es.push_back(std::abs(d.cut.total_inside_area() - exact));
    }
    double gain = INFINITY;
    for (int s = 0; s < 3; ++s) gain = std::min(gain, es[s] / es[s + 1]);
    detail = "order " + detail::fmt(order) + ", min gain per level " + detail::fmt(gain);
    return order >= 1.9 && gain >= 3.5;
  });
}

/// Ghost penalties vanish on global polynomials of the space degree.
inline CheckResult ghost_penalty_zero_jump() {
  return timed("ghost penalty zero jump", [](std::string& detail) {
    double worst = 0.0;
    for (int k : {2, 3}) {
      const auto d = detail::disk_setting(0.1, 0.3, k, 0.1);
      const auto gv = assemble_ghost_penalty_velocity(*d.mesh, d.active, *d.layout.velocity);
      const auto gp = assemble_ghost_penalty_pressure(*d.mesh, d.active, *d.layout.pressure);
      const auto u = interpolate(d.layout.velocity, [k](const Point2& x) {
        return Eigen::Vector2d(std::pow(x.x, k) - 2.0 * x.x * std::pow(x.y, k - 1) + 1.0, std::pow(x.y, k) + x.x);
      });
      const auto p = interpolate_scalar(d.layout.pressure, [k](const Point2& x) {
        return std::pow(x.x + 0.5 * x.y, k - 1) - 3.0 * x.y + 0.25;
      });
      worst = std::max(worst, detail::relative_quad_form(gv, u.coefficients));
      worst = std::max(worst, detail::relative_quad_form(gp, p.coefficients));
    }
    detail = "max |g(v, v)| / (|v|^T |G| |v|) " + detail::fmt(worst);
    return worst <= 1e-12;
  });
}

/// Ghost penalty of the interpolant of a smooth field decays at order >= 2k - 0.5.
inline CheckResult ghost_penalty_decay(int k = 2) {
  return timed("ghost penalty decay k=" + std::to_string(k), [k](std::string& detail) {
    std::vector<double> hs{0.2, 0.1, 0.05, 0.025}, ev, ep;
    for (double h : hs) {
      const auto d = detail::disk_setting(h, 0.0, k, 0.05);
      const auto gv = assemble_ghost_penalty_velocity(*d.mesh, d.active, *d.layout.velocity);
      const auto gp = assemble_ghost_penalty_pressure(*d.mesh, d.active, *d.layout.pressure);
      const auto u = interpolate(d.layout.velocity, [](const Point2& x) { return disk::velocity(x, 0.0); });
      const auto p = interpolate_scalar(d.layout.pressure, [](const Point2& x) { return disk::pressure(x, 0.0); });
      ev.push_back(detail::quad_form(gv, u.coefficients));
      ep.push_back(detail::quad_form(gp, p.coefficients));
    }
    const double rv = detail::min_pairwise_rate(hs, ev), rp = detail::min_pairwise_rate(hs, ep);
    detail = "velocity rate " + detail::fmt(rv) + ", pressure rate " + detail::fmt(rp) + " (need >= " +
             detail::fmt(2 * k - 0.5) + ")";
    return rv >= 2 * k - 0.5 && rp >= 2 * k - 0.5;
  });
}

/// Mass, viscosity/Nitsche and ghost-penalty blocks are symmetric; mass and
/// ghost penalties positive semidefinite; viscosity plus velocity GP positive definite.
inline CheckResult block_symmetry_definiteness() {
  return timed("block symmetry and definiteness", [](std::string& detail) {
    const auto d = detail::disk_setting(0.2, 0.15, 2, 0.05);
    FormParams prm;
    prm.L = d.active.strip_rings;
    const auto m = assemble_mass(d.cut, *d.layout.velocity);
    const auto a = assemble_viscosity_nitsche(d.cut, *d.layout.velocity, prm);
    const auto gv = assemble_ghost_penalty_velocity(*d.mesh, d.active, *d.layout.velocity);
    const auto gp = assemble_ghost_penalty_pressure(*d.mesh, d.active, *d.layout.pressure);
    double asym = 0.0;
    for (const auto* b : {&m, &a, &gv, &gp}) asym = std::max(asym, detail::asymmetry(*b));
    auto min_eig = [](const SparseBlock& s) {
      const Eigen::MatrixXd dense(s);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense, Eigen::EigenvaluesOnly);
      return std::pair{es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
    };
    const auto [mm, mM] = min_eig(m);
    const auto [gm, gM] = min_eig(gv);
    const auto [pm, pM] = min_eig(gp);
    const auto stab = combined_stabilization(prm, gv, gp);
    const auto [cm, cM] = min_eig(SparseBlock(a + stab.velocity));
    detail = "asymmetry " + detail::fmt(asym) + ", min eig mass " + detail::fmt(mm / mM) + ", gp_u " +
             detail::fmt(gm / gM) + ", gp_p " + detail::fmt(pm / pM) + ", a_h+s_h " + detail::fmt(cm / cM);
    return asym <= 1e-12 && mm >= -1e-12 * mM && gm >= -1e-12 * gM && pm >= -1e-12 * pM && cm > 1e-12 * cM;
  });
}

/// b_h(1, v) = 0 and b_h(x1, v) = (1, v_1)_{Omega_h} for every discrete v (divergence theorem on Omega_h).
inline CheckResult divergence_identity() {
  return timed("divergence theorem for b_h", [](std::string& detail) {
    const auto d = detail::disk_setting(0.1, 0.37, 2, 0.05);
    const auto b = assemble_pressure_coupling(d.cut, *d.layout.velocity, *d.layout.pressure);
    const auto one = interpolate_scalar(d.layout.pressure, [](const Point2&) { return 1.0; });
    const auto xq = interpolate_scalar(d.layout.pressure, [](const Point2& x) { return x.x; });
    const Eigen::VectorXd r1 = b.transpose() * one.coefficients;
    const Eigen::VectorXd rx = b.transpose() * xq.coefficients;
    const Eigen::VectorXd load = assemble_load(d.cut, *d.layout.velocity,
                                               [](const Point2&, double) { return Eigen::Vector2d(1.0, 0.0); }, 0.0);
    const double scale = load.cwiseAbs().maxCoeff();
    const double e1 = r1.cwiseAbs().maxCoeff() / scale, ex = (rx - load).cwiseAbs().maxCoeff() / scale;
    detail = "max |b(1,phi_i)| " + detail::fmt(e1) + ", max |b(x,phi_i) - (1,phi_i)| " + detail::fmt(ex);
    return e1 <= 1e-12 && ex <= 1e-12;
  });
}

/// Divergence, boundary trace, forcing and pressure mean of the moving-disk solution.
inline CheckResult manufactured_identities() {
  return timed("manufactured solution identities", [](std::string& detail) {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> ux(-1.0, 2.0), uy(-1.0, 1.0), ut(0.0, 1.0), ua(0.0, 2.0 * std::numbers::pi);
    double div = 0.0, trace = 0.0, ferr = 0.0;
    const double nu = 0.37, e = 1e-5;
    for (int i = 0; i < 200; ++i) {
      const Point2 x{ux(rng), uy(rng)};
      const double t = ut(rng);
      div = std::max(div, std::abs(disk::velocity_gradient(x, t).trace()));
      const double th = ua(rng);
      const Point2 g{t + std::sqrt(0.5) * std::cos(th), std::sqrt(0.5) * std::sin(th)};
      trace = std::max(trace, disk::velocity(g, t).norm());
      // central differences of the closed-form u, grad u and p
      const Point2 dx{e, 0.0}, dy{0.0, e};
      const Eigen::Vector2d dudt = (disk::velocity(x, t + e) - disk::velocity(x, t - e)) / (2 * e);
      const Eigen::Matrix2d gx = (disk::velocity_gradient(x + dx, t) - disk::velocity_gradient(x - dx, t)) / (2 * e);
      const Eigen::Matrix2d gy = (disk::velocity_gradient(x + dy, t) - disk::velocity_gradient(x - dy, t)) / (2 * e);
      const Eigen::Vector2d lap(gx(0, 0) + gy(0, 1), gx(1, 0) + gy(1, 1));
      const Eigen::Vector2d gp((disk::pressure(x + dx, t) - disk::pressure(x - dx, t)) / (2 * e),
                               (disk::pressure(x + dy, t) - disk::pressure(x - dy, t)) / (2 * e));
      const Eigen::Vector2d fd = dudt - nu * lap + gp;
      const Eigen::Vector2d f = disk::forcing(x, t, nu);
      ferr = std::max(ferr, (f - fd).norm() / std::max(1.0, f.norm()));
      Eigen::Matrix2d gfd;
      gfd.col(0) = (disk::velocity(x + dx, t) - disk::velocity(x - dx, t)) / (2 * e);
      gfd.col(1) = (disk::velocity(x + dy, t) - disk::velocity(x - dy, t)) / (2 * e);
      ferr = std::max(ferr, (gfd - disk::velocity_gradient(x, t)).norm() / std::max(1.0, gfd.norm()));
    }
    const auto d = detail::disk_setting(0.025, 0.4, 2, 0.05, 2);
    double mean = 0.0;
    for (int el = 0; el < d.mesh->num_elements(); ++el)
      for (const auto& q : d.cut.volume_quadrature(el, 8)) mean += q.w * disk::pressure(q.x, 0.4);
    detail = "max |div u| " + detail::fmt(div) + ", max |u| on interface " + detail::fmt(trace) +
             ", forcing/gradient FD mismatch " + detail::fmt(ferr) + ", |int p| " + detail::fmt(std::abs(mean));
    return div <= 1e-12 && trace <= 1e-12 && ferr <= 1e-6 && std::abs(mean) <= 1e-4;
  });
}

/// The bordered system is nonsingular for many random interface positions.
inline CheckResult random_well_posedness(int trials = 100) {
  return timed("well-posedness over " + std::to_string(trials) + " random cuts", [trials](std::string& detail) {
    std::mt19937 rng(2024);
    std::uniform_real_distribution<double> off(-0.25, 0.25), rad(0.3, 0.5);
    const auto mesh = std::make_shared<BackgroundMesh>(build_mesh_with_hmax({-1.0, -1.0, 1.0, 1.0}, 0.25));
    int failures = 0;
    double worst_res = 0.0;
    int max_n = 0;
    for (int i = 0; i < trials; ++i) {
      const double cx = off(rng), cy = off(rng), r = rad(rng);
      LevelSet phi;
      phi.value = [=](const Point2& x, double) { return (x.x - cx) * (x.x - cx) + (x.y - cy) * (x.y - cy) - r * r; };
      const auto cut = classify_and_decompose(*mesh, phi, 0.0, 0, 6);
      const auto active = extract_active_sets(*mesh, cut, 0.05);
      const auto layout = build_layout(*mesh, active, 2);
      FormParams prm;
      prm.L = active.strip_rings;
      prm.dt = 0.05;
      const auto blocks = assemble_blocks(cut, active, layout, prm,
                                          [](const Point2& x, double) { return Eigen::Vector2d(x.y, -x.x * x.x); }, 0.0);
      const auto sys = build_system(blocks, prm, 1.0);
      const Eigen::MatrixXd dense(sys.matrix);
      Eigen::FullPivLU<Eigen::MatrixXd> lu(dense);
      max_n = std::max(max_n, sys.size());
      bool ok = lu.rank() == sys.size();
      if (ok) {
        try {
          worst_res = std::max(worst_res, solve(sys).scaled_residual);
        } catch (const SolveError&) {
          ok = false;
        }
      }
      failures += !ok;
    }
    detail = std::to_string(failures) + " singular of " + std::to_string(trials) + " (systems up to " +
             std::to_string(max_n) + " unknowns), worst residual " + detail::fmt(worst_res);
    return failures == 0;
  });
}

/// Every history DOF needed on the new domain was active at the previous step, over full runs.
inline CheckResult containment_over_run() {
  return timed("containment over full runs", [](std::string& detail) {
    std::ostringstream os;
    bool ok = true;
    for (int bdf : {1, 2}) {
      StepConfig c;
      c.h = 0.1;
      c.dt = 0.05;
      c.bdf_order = bdf;
      const auto mc = moving_disk_case(c.nu);
      Stepper st(c, mc);
      auto state = st.initialize();
      std::vector<StepState> hist{state};
      int missing = 0;
      for (int n = 0; n < c.num_steps(); ++n) {
        const auto [cut, active] = st.setting((n + 1) * c.dt);
        const auto next = build_layout(st.mesh(), *active, c.k);
        for (int j = 0; j < std::min<int>(bdf, hist.size()); ++j)
          missing += count_missing_nodes(*hist[hist.size() - 1 - j].layout.velocity, *next.velocity,
                                         active->in_cut_mesh);
        state = st.advance(state);
        hist.push_back(state);
      }
      os << "bdf" << bdf << ": " << missing << " missing nodes over " << c.num_steps() << " steps; ";
      ok = ok && missing == 0;
    }
    detail = os.str();
    return ok;
  });
}

inline std::vector<CheckResult> run_all(std::ostream* progress = nullptr) {
  std::vector<std::function<CheckResult()>> checks = {
      quadrature_exactness,  disk_area_convergence, ghost_penalty_zero_jump,  [] { return ghost_penalty_decay(2); },
      block_symmetry_definiteness, divergence_identity, manufactured_identities, [] { return random_well_posedness(); },
      containment_over_run};
  std::vector<CheckResult> out;
  for (const auto& c : checks) {
    out.push_back(c());
    if (progress != nullptr) {
      const auto& r = out.back();
      *progress << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << r.detail << ", " << detail::fmt(r.seconds)
                << " s)\n";
    }
  }
  return out;
}

}  // namespace cutstokes::verify
