#include <cmath>

#include <gtest/gtest.h>

#include "cutstokes/errors.hpp"
#include "cutstokes/manufactured.hpp"
#include "cutstokes/solver.hpp"
#include "cutstokes/verify.hpp"

using namespace cutstokes;
using verify::detail::disk_setting;

namespace {

struct Problem {
  verify::detail::DiskSetting d;
  FormParams params;
  SystemBlocks blocks;
};

Problem disk_problem(double h, double nu, double gamma, double t = 0.1) {
  Problem p;
  p.d = disk_setting(h, t, 2, 0.05);
  p.params.nu = nu;
  p.params.gamma_s = gamma;
  p.params.dt = 0.05;
  p.params.L = p.d.active.strip_rings;
  const auto mc = moving_disk_case(nu);
  p.blocks = assemble_blocks(p.d.cut, p.d.active, p.d.layout, p.params, mc.forcing, t);
  return p;
}

Eigen::VectorXd stacked(const SolveResult& r) {
  Eigen::VectorXd x(r.u.coefficients.size() + r.p.coefficients.size() + 1);
  x << r.u.coefficients, r.p.coefficients, r.multiplier;
  return x;
}

}  // namespace

TEST(Solver, SystemIsSymmetric) {
  auto p = disk_problem(0.2, 1e-2, 1.0);
  const auto sys = build_system(p.blocks, p.params, 1.0);
  EXPECT_EQ(sys.size(), p.d.layout.velocity->num_dofs() + p.d.layout.pressure->num_dofs() + 1);
  EXPECT_LT(verify::detail::asymmetry(sys.matrix), 1e-12);
}

TEST(Solver, ZeroRhsGivesZero) {
  auto p = disk_problem(0.2, 1e-2, 1.0);
  p.blocks.load.setZero();
  const auto r = solve(build_system(p.blocks, p.params, 1.0));
  EXPECT_EQ(stacked(r).norm(), 0.0);
}

TEST(Solver, SolutionIsLinearInData) {
  auto p = disk_problem(0.2, 1e-2, 1.0);
  const auto sys = build_system(p.blocks, p.params, 1.0);
  const auto r1 = solve(sys);
  auto scaled = sys;
  scaled.rhs *= -3.5;
  const auto r2 = solve(scaled);
  EXPECT_LT((stacked(r2) + 3.5 * stacked(r1)).norm(), 1e-10 * stacked(r2).norm());

  auto other = sys;
  other.rhs.head(sys.num_velocity) = Eigen::VectorXd::Ones(sys.num_velocity);
  auto sum = sys;
  sum.rhs += other.rhs;
  const auto r3 = solve(other), r4 = solve(sum);
  EXPECT_LT((stacked(r4) - stacked(r1) - stacked(r3)).norm(), 1e-10 * stacked(r4).norm());
}

TEST(Solver, PressureHasZeroMean) {
  auto p = disk_problem(0.1, 1e-2, 1.0);
  const auto r = solve(build_system(p.blocks, p.params, 1.0));
  EXPECT_LT(std::abs(p.blocks.mean.dot(r.p.coefficients)), 1e-10 * r.p.coefficients.norm());
}

TEST(Solver, ResidualMeetsTolerance) {
  for (double nu : {1.0, 1e-2, 1e-4})
    for (double gamma : {0.1, 1000.0}) {
      auto p = disk_problem(0.1, nu, gamma);
      const auto r = solve(build_system(p.blocks, p.params, 1.0));
      EXPECT_LE(r.scaled_residual, 1e-10) << nu << " " << gamma;
      EXPECT_TRUE(std::isfinite(r.relative_residual));
    }
}

TEST(Solver, Deterministic) {
  auto p = disk_problem(0.2, 1e-2, 1.0);
  const auto sys = build_system(p.blocks, p.params, 1.0);
  EXPECT_EQ(stacked(solve(sys)), stacked(solve(sys)));
}

TEST(Solver, HistoryEntersThroughMass) {
  auto p = disk_problem(0.2, 1e-2, 1.0);
  const Eigen::VectorXd hist = Eigen::VectorXd::LinSpaced(p.d.layout.velocity->num_dofs(), -1.0, 1.0);
  const auto a = build_system(p.blocks, p.params, 1.0);
  const auto b = build_system(p.blocks, p.params, 1.0, &hist);
  const Eigen::VectorXd diff = b.rhs.head(a.num_velocity) - a.rhs.head(a.num_velocity);
  EXPECT_LT((diff - p.blocks.mass * hist / p.params.dt).norm(), 1e-12 * diff.norm());
  EXPECT_EQ(b.rhs.tail(a.num_pressure + 1).norm(), 0.0);
}

TEST(Solver, DimensionMismatchRejected) {
  auto p = disk_problem(0.2, 1e-2, 1.0);
  const Eigen::VectorXd bad = Eigen::VectorXd::Zero(3);
  EXPECT_THROW(build_system(p.blocks, p.params, 1.0, &bad), std::invalid_argument);
  auto broken = p.blocks;
  broken.mean = Eigen::VectorXd::Zero(2);
  EXPECT_THROW(build_system(broken, p.params, 1.0), std::invalid_argument);
  auto params = p.params;
  params.nu = -1.0;
  EXPECT_THROW(build_system(p.blocks, params, 1.0), std::invalid_argument);
}

TEST(Solver, SingularSystemReported) {
  auto p = disk_problem(0.2, 1e-2, 1.0);
  auto sys = build_system(p.blocks, p.params, 1.0);
  sys.matrix.setZero();
  sys.matrix.makeCompressed();
  EXPECT_THROW(solve(sys, "zero matrix"), SolveError);
}

TEST(Solver, StationaryFittedStokesConverges) {
  // P2/P1 on the unit square against the polynomial stream-function solution
  const auto mc = fitted_square_case(1.0);
  std::vector<double> eu, ep;
  for (int n : {4, 8, 16}) {
    const auto mesh = build_structured_mesh(mc.box, 1.0 / n);
    const auto cut = fitted_decomposition(mesh, 6);
    auto active = extract_active_sets(mesh, cut, 0.0);
    active.facets_pressure_gp.clear();
    active.facets_velocity_gp.clear();
    const auto layout = build_layout(mesh, active, 2);
    FormParams params;
    params.nu = 1.0;
    const auto blocks = assemble_blocks(cut, active, layout, params, mc.forcing, 0.0);
    const auto r = solve(build_system(blocks, params, 0.0));
    const auto e = step_errors(cut, &r.u, &r.p, mc, 0.0, 6);
    eu.push_back(e.velocity_l2);
    ep.push_back(e.pressure_l2);
  }
  for (double rate : eoc(eu)) EXPECT_GE(rate, 2.7);
  for (double rate : eoc(ep)) EXPECT_GE(rate, 1.8);
}

TEST(Solver, BackwardErrorAtRoundoff) {
  // extreme viscosity and penalty on a coarse mesh: the residual floor is set by |A||x|
  auto p = disk_problem(0.4, 1e-4, 1000.0, 0.5);
  const auto r = solve(build_system(p.blocks, p.params, 1.0));
  EXPECT_LE(r.backward_error, 1e-12);
  EXPECT_TRUE(r.u.coefficients.allFinite());
}
