#pragma once

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#ifdef CUTSTOKES_HAVE_UMFPACK
#include <Eigen/UmfPackSupport>
#else
#include <Eigen/SparseLU>
#endif

#include "cutstokes/forms.hpp"
#include "cutstokes/spaces.hpp"

namespace cutstokes {

class SolveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every assembled piece of one time step, on the current layouts.
struct SystemBlocks {
  TaylorHoodLayout layout;
  SparseBlock mass;
  SparseBlock viscosity;
  SparseBlock coupling;
  SparseBlock velocity_gp;
  SparseBlock pressure_gp;
  Eigen::VectorXd load;
  Eigen::VectorXd mean;
};

/// Bordered symmetric system
///
///   [ A    B^T  0 ] [u]   [f_u]
///   [ B   -C    m ] [p] = [ 0 ]
///   [ 0    m^T  0 ] [l]   [ 0 ]
///
/// with A = (alpha0/dt) M + a_h + velocity GP, C = (gamma_s/nu) j_h and m the
/// mean-value functional of the pressure.
struct SaddleSystem {
  TaylorHoodLayout layout;
  int num_velocity = 0;
  int num_pressure = 0;
  SparseBlock matrix;
  Eigen::VectorXd rhs;

  int size() const { return num_velocity + num_pressure + 1; }
};

inline SystemBlocks assemble_blocks(const CutDecomposition& cut, const ActiveSets& active,
                                    const TaylorHoodLayout& layout, const FormParams& params, const VectorField& f,
                                    double t) {
  const auto& mesh = *cut.mesh;
  SystemBlocks b;
  b.layout = layout;
  b.mass = assemble_mass(cut, *layout.velocity);
  b.viscosity = assemble_viscosity_nitsche(cut, *layout.velocity, params);
  b.coupling = assemble_pressure_coupling(cut, *layout.velocity, *layout.pressure);
  b.velocity_gp = assemble_ghost_penalty_velocity(mesh, active, *layout.velocity);
  b.pressure_gp = assemble_ghost_penalty_pressure(mesh, active, *layout.pressure);
  b.load = f ? assemble_load(cut, *layout.velocity, f, t) : Eigen::VectorXd::Zero(layout.velocity->num_dofs());
  b.mean = assemble_mean_constraint(cut, *layout.pressure);
  return b;
}

/// `history` is sum_j beta_j u^{n-j} on the current velocity layout; its mass
/// contribution M * history / dt is added to the load.
inline SaddleSystem build_system(const SystemBlocks& blocks, const FormParams& params, double alpha0,
                                 const Eigen::VectorXd* history = nullptr) {
  params.validate();
  const int nv = blocks.layout.velocity->num_dofs();
  const int np = blocks.layout.pressure->num_dofs();
  auto check = [](const SparseBlock& m, int r, int c, const char* what) {
    if (m.rows() != r || m.cols() != c) throw std::invalid_argument(std::string("build_system: dimension mismatch in ") + what);
  };
  check(blocks.mass, nv, nv, "mass");
  check(blocks.viscosity, nv, nv, "viscosity");
  check(blocks.velocity_gp, nv, nv, "velocity ghost penalty");
  check(blocks.coupling, np, nv, "coupling");
  check(blocks.pressure_gp, np, np, "pressure ghost penalty");
  if (blocks.load.size() != nv || blocks.mean.size() != np)
    throw std::invalid_argument("build_system: dimension mismatch in load or mean vector");
  if (history != nullptr && history->size() != nv)
    throw std::invalid_argument("build_system: dimension mismatch in history vector");

  const auto stab = combined_stabilization(params, blocks.velocity_gp, blocks.pressure_gp);
  const SparseBlock a = (alpha0 / params.dt) * blocks.mass + blocks.viscosity + stab.velocity;

  Triplets trip;
  trip.reserve(a.nonZeros() + 2 * blocks.coupling.nonZeros() + stab.pressure.nonZeros() + 2 * np);
  for (int c = 0; c < a.outerSize(); ++c)
    for (SparseBlock::InnerIterator it(a, c); it; ++it) trip.emplace_back(it.row(), it.col(), it.value());
  for (int c = 0; c < blocks.coupling.outerSize(); ++c)
    for (SparseBlock::InnerIterator it(blocks.coupling, c); it; ++it) {
      trip.emplace_back(nv + it.row(), it.col(), it.value());
      trip.emplace_back(it.col(), nv + it.row(), it.value());
    }
  for (int c = 0; c < stab.pressure.outerSize(); ++c)
    for (SparseBlock::InnerIterator it(stab.pressure, c); it; ++it)
      trip.emplace_back(nv + it.row(), nv + it.col(), it.value());
  const int mult = nv + np;
  for (int i = 0; i < np; ++i)
    if (blocks.mean[i] != 0.0) {
      trip.emplace_back(nv + i, mult, blocks.mean[i]);
      trip.emplace_back(mult, nv + i, blocks.mean[i]);
    }

  SaddleSystem sys;
  sys.layout = blocks.layout;
  sys.num_velocity = nv;
  sys.num_pressure = np;
  sys.matrix.resize(nv + np + 1, nv + np + 1);
  sys.matrix.setFromTriplets(trip.begin(), trip.end());
  sys.matrix.makeCompressed();
  sys.rhs = Eigen::VectorXd::Zero(nv + np + 1);
  sys.rhs.head(nv) = blocks.load;
  if (history != nullptr) sys.rhs.head(nv) += (blocks.mass * *history) / params.dt;
  return sys;
}

namespace detail {

/// b - A x accumulated in extended precision, for iterative refinement.
inline Eigen::VectorXd extended_defect(const SparseBlock& a, const Eigen::VectorXd& x, const Eigen::VectorXd& b) {
  std::vector<long double> acc(b.data(), b.data() + b.size());
  for (int c = 0; c < a.outerSize(); ++c)
    for (SparseBlock::InnerIterator it(a, c); it; ++it)
      acc[it.row()] -= static_cast<long double>(it.value()) * static_cast<long double>(x[c]);
  Eigen::VectorXd out(b.size());
  for (int i = 0; i < b.size(); ++i) out[i] = static_cast<double>(acc[i]);
  return out;
}

/// Componentwise backward error max_i |Ax - b|_i / (|A||x| + |b|)_i.
inline double backward_error(const SparseBlock& a, const Eigen::VectorXd& x, const Eigen::VectorXd& b) {
  const Eigen::VectorXd r = a * x - b;
  Eigen::VectorXd den = b.cwiseAbs();
  for (int c = 0; c < a.outerSize(); ++c)
    for (SparseBlock::InnerIterator it(a, c); it; ++it) den[it.row()] += std::abs(it.value() * x[c]);
  double w = 0.0;
  for (int i = 0; i < r.size(); ++i)
    if (den[i] > 0.0) w = std::max(w, std::abs(r[i]) / den[i]);
  return w;
}

}  // namespace detail

struct SolveResult {
  FieldVector u;
  FieldVector p;
  double multiplier = 0.0;
  /// ||Ax - b|| / ||b||. For large nu^{-1} gamma_s this is bounded below by
  /// roundoff in ||A|| ||x||, so acceptance uses the equilibrated residual.
  double relative_residual = 0.0;
  /// ||D(Ax - b)|| / ||D b|| with the Jacobi equilibration D = |diag A|^{-1/2}.
  double scaled_residual = 0.0;
  /// Componentwise backward error; near machine precision means x is as good as
  /// double arithmetic allows even when the residual cannot drop further.
  double backward_error = 0.0;
};

/// Sparse direct solve of the bordered system. Throws SolveError when the
/// factorization fails, or when the equilibrated residual exceeds 1e-10 relative
/// while the backward error is above roundoff level.
inline SolveResult solve(const SaddleSystem& sys, const std::string& context = {}) {
#ifdef CUTSTOKES_HAVE_UMFPACK
  Eigen::UmfPackLU<SparseBlock> lu;
  // The pattern is symmetric, so order A + A^T directly.
  lu.umfpackControl()(UMFPACK_STRATEGY) = UMFPACK_STRATEGY_SYMMETRIC;
#else
  Eigen::SparseLU<SparseBlock, Eigen::COLAMDOrdering<int>> lu;
#endif
  const std::string where = context.empty() ? std::string() : " (" + context + ")";
  // Symmetric diagonal equilibration: the ghost penalties scale with 1/nu and
  // would otherwise swamp small viscosities.
  const int n = sys.size();
  Eigen::VectorXd scale = Eigen::VectorXd::Ones(n);
  for (int c = 0; c < sys.matrix.outerSize(); ++c)
    for (SparseBlock::InnerIterator it(sys.matrix, c); it; ++it)
      if (it.row() == it.col() && std::abs(it.value()) > 0.0) scale[c] = 1.0 / std::sqrt(std::abs(it.value()));
  SparseBlock scaled = scale.asDiagonal() * sys.matrix * scale.asDiagonal();
  scaled.makeCompressed();
  lu.compute(scaled);
  if (lu.info() != Eigen::Success)
    throw SolveError("sparse factorization failed" + where + ": system of size " + std::to_string(n) +
                     " is singular; check strip width and ghost-penalty parameters");
  auto apply = [&](const Eigen::VectorXd& b) -> Eigen::VectorXd {
    const Eigen::VectorXd sb = scale.cwiseProduct(b);
    Eigen::VectorXd y = lu.solve(sb);
    return scale.cwiseProduct(y);
  };
  Eigen::VectorXd x = apply(sys.rhs);
  if (lu.info() != Eigen::Success || !x.allFinite()) throw SolveError("sparse solve failed" + where);

  SolveResult r;
  const Eigen::VectorXd sb = scale.cwiseProduct(sys.rhs);
  const double bnorm = sys.rhs.norm(), sbnorm = sb.norm();
  auto measure = [&] {
    const Eigen::VectorXd res = sys.matrix * x - sys.rhs;
    r.relative_residual = bnorm > 0.0 ? res.norm() / bnorm : res.norm();
    const double sr = scale.cwiseProduct(res).norm();
    r.scaled_residual = sbnorm > 0.0 ? sr / sbnorm : sr;
  };
  measure();
  // Iterative refinement with an extended-precision defect.
  for (int it = 0; it < 4 && bnorm > 0.0 && r.scaled_residual > 1e-13; ++it) {
    x += apply(detail::extended_defect(sys.matrix, x, sys.rhs));
    measure();
  }
  r.backward_error = detail::backward_error(sys.matrix, x, sys.rhs);
  if (r.scaled_residual > 1e-10 && r.backward_error > 1e-12) {
    std::ostringstream msg;
    msg << "relative residual " << std::scientific << r.scaled_residual << " above 1e-10 and backward error "
        << r.backward_error << " above 1e-12" << where;
    throw SolveError(msg.str());
  }
  r.u = FieldVector(sys.layout.velocity, x.head(sys.num_velocity));
  r.p = FieldVector(sys.layout.pressure, x.segment(sys.num_velocity, sys.num_pressure));
  r.multiplier = x[sys.num_velocity + sys.num_pressure];
  return r;
}

}  // namespace cutstokes
