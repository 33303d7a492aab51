#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <unsupported/Eigen/SparseExtra>

#include "cutstokes/geometry.hpp"
#include "cutstokes/lagrange.hpp"
#include "cutstokes/spaces.hpp"

namespace cutstokes {

using SparseBlock = Eigen::SparseMatrix<double>;
using Triplets = std::vector<Eigen::Triplet<double>>;
using VectorField = std::function<Eigen::Vector2d(const Point2&, double)>;
using ScalarField = std::function<double(const Point2&, double)>;

struct FormParams {
  double nu = 1e-2;
  double sigma = 160.0;
  double gamma_s = 1.0;
  int L = 1;
  double dt = 0.1;
  int k = 2;

  /// gamma_{s,u} = gamma'_{s,u}; a zero-width strip still gets one ring of scaling.
  double gamma_velocity() const { return std::max(L, 1) * gamma_s; }
  double gamma_pressure() const { return gamma_s; }

  void validate() const {
    if (!(nu > 0.0)) throw std::invalid_argument("FormParams: nu must be positive");
    if (!(sigma > 0.0)) throw std::invalid_argument("FormParams: sigma must be positive");
    if (!(gamma_s >= 0.0)) throw std::invalid_argument("FormParams: gamma_s must be non-negative");
    if (!(dt > 0.0)) throw std::invalid_argument("FormParams: dt must be positive");
    if (k < 2) throw std::invalid_argument("FormParams: k must be >= 2");
  }
};

namespace detail {

inline SparseBlock from_triplets(int rows, int cols, const Triplets& t) {
  SparseBlock m(rows, cols);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

/// Adds a scalar local matrix to every component block of a vector layout.
inline void scatter_componentwise(Triplets& out, const DofLayout& layout, std::span<const int> rows,
                                  std::span<const int> cols, const LocalMatrix& local) {
  for (int c = 0; c < layout.components; ++c)
    for (int i = 0; i < local.rows(); ++i)
      for (int j = 0; j < local.cols(); ++j)
        if (local(i, j) != 0.0) out.emplace_back(layout.dof(rows[i], c), layout.dof(cols[j], c), local(i, j));
}

}  // namespace detail

/// Mass matrix over the physical part of every supported element.
inline SparseBlock assemble_mass(const CutDecomposition& cut, const DofLayout& layout, int degree = -1) {
  const auto& mesh = *cut.mesh;
  const auto& basis = LagrangeBasis::get(layout.order);
  if (degree < 0) degree = 2 * layout.order;
  Triplets trip;
  BasisValues bv;
  LocalMatrix local(basis.size(), basis.size());
  for (int e = 0; e < mesh.num_elements(); ++e) {
    if (!layout.supports(e) || cut.kind[e] == ElementKind::Outside) continue;
    const auto map = AffineMap::of(mesh, e);
    local.setZero();
    for (const auto& q : cut.volume_quadrature(e, degree)) {
      evaluate_at_physical(basis, map, q.x, bv, false);
      local.noalias() += q.w * bv.values * bv.values.transpose();
    }
    auto nodes = layout.nodes_of(e);
    detail::scatter_componentwise(trip, layout, nodes, nodes, local);
  }
  return detail::from_triplets(layout.num_dofs(), layout.num_dofs(), trip);
}

/// nu * ( (grad u, grad v)_{Omega_h} + symmetric Nitsche terms on Gamma_h ).
inline SparseBlock assemble_viscosity_nitsche(const CutDecomposition& cut, const DofLayout& layout,
                                              const FormParams& params) {
  const auto& mesh = *cut.mesh;
  const auto& basis = LagrangeBasis::get(layout.order);
  const int n = basis.size();
  Triplets trip;
  BasisValues bv;
  LocalMatrix local(n, n);
  for (int e = 0; e < mesh.num_elements(); ++e) {
    if (!layout.supports(e) || cut.kind[e] == ElementKind::Outside) continue;
    const auto map = AffineMap::of(mesh, e);
    local.setZero();
    for (const auto& q : cut.volume_quadrature(e, std::max(1, 2 * layout.order - 2))) {
      evaluate_at_physical(basis, map, q.x, bv);
      local.noalias() += q.w * bv.gradients * bv.gradients.transpose();
    }
    if (cut.has_interface(e)) {
      const double penalty = params.sigma / mesh.diameters[e];
      for (const auto& q : cut.interface_quadrature(e, 2 * layout.order)) {
        evaluate_at_physical(basis, map, q.x, bv);
        const LocalVector dn = bv.gradients * Eigen::Vector2d(q.normal.x, q.normal.y);
        local.noalias() += q.w * (-dn * bv.values.transpose() - bv.values * dn.transpose() +
                                  penalty * bv.values * bv.values.transpose());
      }
    }
    local *= params.nu;
    auto nodes = layout.nodes_of(e);
    detail::scatter_componentwise(trip, layout, nodes, nodes, local);
  }
  return detail::from_triplets(layout.num_dofs(), layout.num_dofs(), trip);
}

/// B with B(q, v) = -(q, div v)_{Omega_h} + (q, v.n)_{Gamma_h}; rows pressure, columns velocity.
inline SparseBlock assemble_pressure_coupling(const CutDecomposition& cut, const DofLayout& velocity,
                                              const DofLayout& pressure) {
  const auto& mesh = *cut.mesh;
  const auto& vb = LagrangeBasis::get(velocity.order);
  const auto& pb = LagrangeBasis::get(pressure.order);
  const int degree = velocity.order + pressure.order;
  Triplets trip;
  BasisValues bu, bp;
  LocalMatrix bx(pb.size(), vb.size()), by(pb.size(), vb.size());
  for (int e = 0; e < mesh.num_elements(); ++e) {
    if (!pressure.supports(e) || cut.kind[e] == ElementKind::Outside) continue;
    if (!velocity.supports(e)) throw std::logic_error("pressure coupling: velocity support must contain pressure support");
    const auto map = AffineMap::of(mesh, e);
    bx.setZero();
    by.setZero();
    for (const auto& q : cut.volume_quadrature(e, degree - 1)) {
      evaluate_at_physical(vb, map, q.x, bu);
      evaluate_at_physical(pb, map, q.x, bp, false);
      bx.noalias() -= q.w * bp.values * bu.gradients.col(0).transpose();
      by.noalias() -= q.w * bp.values * bu.gradients.col(1).transpose();
    }
    for (const auto& q : cut.interface_quadrature(e, degree)) {
      evaluate_at_physical(vb, map, q.x, bu, false);
      evaluate_at_physical(pb, map, q.x, bp, false);
      bx.noalias() += (q.w * q.normal.x) * bp.values * bu.values.transpose();
      by.noalias() += (q.w * q.normal.y) * bp.values * bu.values.transpose();
    }
    auto pn = pressure.nodes_of(e);
    auto vn = velocity.nodes_of(e);
    for (int i = 0; i < pb.size(); ++i)
      for (int j = 0; j < vb.size(); ++j) {
        if (bx(i, j) != 0.0) trip.emplace_back(pn[i], velocity.dof(vn[j], 0), bx(i, j));
        if (by(i, j) != 0.0) trip.emplace_back(pn[i], velocity.dof(vn[j], 1), by(i, j));
      }
  }
  return detail::from_triplets(pressure.num_dofs(), velocity.num_dofs(), trip);
}

/// Direct ghost penalty: sum over facets of w(F) * int_{T1 u T2} [u][v], with the
/// jump taken between the two element polynomials extended over the whole patch.
/// w(F) = 1/h_F^2 (h_F the mean diameter) when `inverse_h2`, else 1.
inline SparseBlock assemble_ghost_penalty(const BackgroundMesh& mesh, const std::vector<int>& facets,
                                          const DofLayout& layout, bool inverse_h2) {
  const auto& basis = LagrangeBasis::get(layout.order);
  const int n = basis.size();
  const int degree = 2 * layout.order;
  Triplets trip;
  BasisValues b1, b2;
  LocalMatrix local(2 * n, 2 * n);
  Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 2 * kMaxLocalNodes, 1> jump(2 * n);
  std::vector<int> nodes(2 * n);
  Quadrature quad;
  for (int f : facets) {
    const auto [t1, t2] = mesh.facet_to_elements[f];
    if (t2 < 0) continue;
    const auto m1 = AffineMap::of(mesh, t1), m2 = AffineMap::of(mesh, t2);
    quad.clear();
    for (int t : {t1, t2}) {
      auto c = mesh.corners(t);
      append_triangle_rule(quad, c[0], c[1], c[2], degree);
    }
    local.setZero();
    for (const auto& q : quad) {
      evaluate_at_physical(basis, m1, q.x, b1, false);
      evaluate_at_physical(basis, m2, q.x, b2, false);
      jump.head(n) = b1.values;
      jump.tail(n) = -b2.values;
      local.noalias() += q.w * jump * jump.transpose();
    }
    if (inverse_h2) {
      const double h = 0.5 * (mesh.diameters[t1] + mesh.diameters[t2]);
      local /= h * h;
    }
    auto n1 = layout.nodes_of(t1), n2 = layout.nodes_of(t2);
    std::copy(n1.begin(), n1.end(), nodes.begin());
    std::copy(n2.begin(), n2.end(), nodes.begin() + n);
    detail::scatter_componentwise(trip, layout, nodes, nodes, local);
  }
  return detail::from_triplets(layout.num_dofs(), layout.num_dofs(), trip);
}

/// Unscaled velocity operator i_h over the extension-strip facets.
inline SparseBlock assemble_ghost_penalty_velocity(const BackgroundMesh& mesh, const ActiveSets& active,
                                                   const DofLayout& velocity) {
  return assemble_ghost_penalty(mesh, active.facets_velocity_gp, velocity, true);
}

/// Unscaled pressure operator j_h over the boundary-element facets.
inline SparseBlock assemble_ghost_penalty_pressure(const BackgroundMesh& mesh, const ActiveSets& active,
                                                   const DofLayout& pressure) {
  return assemble_ghost_penalty(mesh, active.facets_pressure_gp, pressure, false);
}

/// (f(., t), v)_{Omega_h} for a vector layout.
inline Eigen::VectorXd assemble_load(const CutDecomposition& cut, const DofLayout& layout, const VectorField& f,
                                     double t, int degree = -1) {
  const auto& mesh = *cut.mesh;
  const auto& basis = LagrangeBasis::get(layout.order);
  if (degree < 0) degree = 2 * layout.order + 2;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(layout.num_dofs());
  BasisValues bv;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    if (!layout.supports(e) || cut.kind[e] == ElementKind::Outside) continue;
    const auto map = AffineMap::of(mesh, e);
    auto nodes = layout.nodes_of(e);
    for (const auto& q : cut.volume_quadrature(e, degree)) {
      const Eigen::Vector2d fv = f(q.x, t);
      evaluate_at_physical(basis, map, q.x, bv, false);
      for (int i = 0; i < basis.size(); ++i) {
        rhs[layout.dof(nodes[i], 0)] += q.w * fv[0] * bv.values[i];
        rhs[layout.dof(nodes[i], 1)] += q.w * fv[1] * bv.values[i];
      }
    }
  }
  return rhs;
}

/// (q_i, 1)_{Omega_h} for every pressure basis function.
inline Eigen::VectorXd assemble_mean_constraint(const CutDecomposition& cut, const DofLayout& pressure) {
  const auto& mesh = *cut.mesh;
  const auto& basis = LagrangeBasis::get(pressure.order);
  Eigen::VectorXd m = Eigen::VectorXd::Zero(pressure.num_dofs());
  BasisValues bv;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    if (!pressure.supports(e) || cut.kind[e] == ElementKind::Outside) continue;
    const auto map = AffineMap::of(mesh, e);
    auto nodes = pressure.nodes_of(e);
    for (const auto& q : cut.volume_quadrature(e, pressure.order)) {
      evaluate_at_physical(basis, map, q.x, bv, false);
      for (int i = 0; i < basis.size(); ++i) m[nodes[i]] += q.w * bv.values[i];
    }
  }
  return m;
}

struct Stabilization {
  SparseBlock velocity;  // added to the velocity-velocity block
  SparseBlock pressure;  // added to the pressure-pressure block (negative semidefinite)
};

/// s_h = gamma_{s,u} (nu + 1/nu) i_h  -  (gamma_{s,p} / nu) j_h.
inline Stabilization combined_stabilization(const FormParams& params, const SparseBlock& velocity_gp,
                                            const SparseBlock& pressure_gp) {
  Stabilization s;
  s.velocity = (params.gamma_velocity() * (params.nu + 1.0 / params.nu)) * velocity_gp;
  s.pressure = (-params.gamma_pressure() / params.nu) * pressure_gp;
  return s;
}

/// Squared mesh-dependent norms of a discrete velocity/pressure pair.
struct TripleNorms {
  double velocity_sq = 0.0;       // |||v|||_n^2
  double velocity_star_sq = 0.0;  // |||v|||_{*,n}^2
  double pressure_sq = 0.0;       // |||q|||_n^2
  double pressure_star_sq = 0.0;  // |||q|||_{*,n}^2
};

inline TripleNorms triple_norms(const CutDecomposition& cut, const FieldVector& u, const FieldVector& p) {
  const auto& mesh = *cut.mesh;
  const auto& vl = *u.layout;
  const auto& pl = *p.layout;
  const auto& vb = LagrangeBasis::get(vl.order);
  const auto& pb = LagrangeBasis::get(pl.order);
  TripleNorms out;
  BasisValues bv;
  auto velocity_at = [&](int e, const AffineMap& map, const Point2& x, Eigen::Vector2d& val, Eigen::Matrix2d& grad) {
    evaluate_at_physical(vb, map, x, bv);
    val.setZero();
    grad.setZero();
    auto nodes = vl.nodes_of(e);
    for (int i = 0; i < vb.size(); ++i)
      for (int c = 0; c < 2; ++c) {
        const double coef = u.coefficients[vl.dof(nodes[i], c)];
        val[c] += coef * bv.values[i];
        grad.row(c) += coef * bv.gradients.row(i);
      }
  };
  auto pressure_at = [&](int e, const AffineMap& map, const Point2& x) {
    evaluate_at_physical(pb, map, x, bv, false);
    double v = 0.0;
    auto nodes = pl.nodes_of(e);
    for (int i = 0; i < pb.size(); ++i) v += p.coefficients[nodes[i]] * bv.values[i];
    return v;
  };
  Eigen::Vector2d val;
  Eigen::Matrix2d grad;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    if (!vl.supports(e)) continue;
    const auto map = AffineMap::of(mesh, e);
    const double h = mesh.diameters[e];
    for (const auto& q : cut.element_quadrature(e, 2 * vl.order)) {
      velocity_at(e, map, q.x, val, grad);
      out.velocity_star_sq += q.w * grad.squaredNorm();
    }
    for (const auto& q : cut.volume_quadrature(e, 2 * vl.order)) {
      velocity_at(e, map, q.x, val, grad);
      out.velocity_sq += q.w * grad.squaredNorm();
    }
    for (const auto& q : cut.interface_quadrature(e, 2 * vl.order)) {
      velocity_at(e, map, q.x, val, grad);
      const Eigen::Vector2d dn = grad * Eigen::Vector2d(q.normal.x, q.normal.y);
      out.velocity_sq += q.w * (val.squaredNorm() / h + h * dn.squaredNorm());
      out.velocity_star_sq += q.w * val.squaredNorm() / h;
    }
    if (!pl.supports(e)) continue;
    for (const auto& q : cut.element_quadrature(e, 2 * pl.order)) {
      const double pv = pressure_at(e, map, q.x);
      out.pressure_star_sq += q.w * pv * pv;
    }
    for (const auto& q : cut.volume_quadrature(e, 2 * pl.order)) {
      const double pv = pressure_at(e, map, q.x);
      out.pressure_sq += q.w * pv * pv;
    }
    for (const auto& q : cut.interface_quadrature(e, 2 * pl.order)) {
      const double pv = pressure_at(e, map, q.x);
      out.pressure_sq += q.w * h * pv * pv;
    }
  }
  return out;
}

/// Matrix Market export of an assembled block.
inline bool save_matrix_market(const SparseBlock& block, const std::string& path) {
  return Eigen::saveMarket(block, path);
}

}  // namespace cutstokes
