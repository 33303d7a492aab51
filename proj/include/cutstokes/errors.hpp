#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "cutstokes/geometry.hpp"
#include "cutstokes/lagrange.hpp"
#include "cutstokes/manufactured.hpp"
#include "cutstokes/spaces.hpp"

namespace cutstokes {

/// Errors on the discrete domain at one time level.
struct StepErrors {
  int step = 0;
  double time = 0.0;
  double velocity_l2 = 0.0;
  double velocity_h1 = 0.0;  // L2 norm of the gradient error
  double pressure_l2 = 0.0;  // after shifting both pressures to zero mean
};

/// Velocity and pressure errors on Omega_h at time t. Any field may be null to skip it.
inline StepErrors step_errors(const CutDecomposition& cut, const FieldVector* u, const FieldVector* p,
                              const ManufacturedCase& c, double t, int degree) {
  const auto& mesh = *cut.mesh;
  StepErrors out;
  out.time = t;
  BasisValues bv;
  if (u != nullptr) {
    const auto& layout = *u->layout;
    const auto& basis = LagrangeBasis::get(layout.order);
    double l2 = 0.0, h1 = 0.0;
    for (int e = 0; e < mesh.num_elements(); ++e) {
      if (cut.kind[e] == ElementKind::Outside || cut.inside_area[e] <= 0.0) continue;
      if (!layout.supports(e)) throw std::logic_error("step_errors: velocity layout does not cover the physical domain");
      const auto map = AffineMap::of(mesh, e);
      auto nodes = layout.nodes_of(e);
      for (const auto& q : cut.volume_quadrature(e, degree)) {
        evaluate_at_physical(basis, map, q.x, bv);
        Eigen::Vector2d val = -c.velocity(q.x, t);
        Eigen::Matrix2d grad = -c.velocity_gradient(q.x, t);
        for (int i = 0; i < basis.size(); ++i)
          for (int k = 0; k < 2; ++k) {
            const double coef = u->coefficients[layout.dof(nodes[i], k)];
            val[k] += coef * bv.values[i];
            grad.row(k) += coef * bv.gradients.row(i);
          }
        l2 += q.w * val.squaredNorm();
        h1 += q.w * grad.squaredNorm();
      }
    }
    out.velocity_l2 = std::sqrt(l2);
    out.velocity_h1 = std::sqrt(h1);
  }
  if (p != nullptr) {
    const auto& layout = *p->layout;
    const auto& basis = LagrangeBasis::get(layout.order);
    std::vector<double> diff, weight;
    for (int e = 0; e < mesh.num_elements(); ++e) {
      if (cut.kind[e] == ElementKind::Outside || cut.inside_area[e] <= 0.0) continue;
      if (!layout.supports(e)) throw std::logic_error("step_errors: pressure layout does not cover the physical domain");
      const auto map = AffineMap::of(mesh, e);
      auto nodes = layout.nodes_of(e);
      for (const auto& q : cut.volume_quadrature(e, degree)) {
        evaluate_at_physical(basis, map, q.x, bv, false);
        double v = -c.pressure(q.x, t);
        for (int i = 0; i < basis.size(); ++i) v += p->coefficients[nodes[i]] * bv.values[i];
        diff.push_back(v);
        weight.push_back(q.w);
      }
    }
    double area = 0.0, mean = 0.0;
    for (std::size_t i = 0; i < diff.size(); ++i) {
      area += weight[i];
      mean += weight[i] * diff[i];
    }
    if (area > 0.0) mean /= area;
    double l2 = 0.0;
    for (std::size_t i = 0; i < diff.size(); ++i) l2 += weight[i] * (diff[i] - mean) * (diff[i] - mean);
    out.pressure_l2 = std::sqrt(l2);
  }
  return out;
}

/// Discrete space-time errors: norm^2 = dt * sum over steps 1..N of the per-step norm^2.
struct ErrorReport {
  double h = 0.0;
  double dt = 0.0;
  double nu = 0.0;
  double gamma_s = 0.0;
  int k = 2;
  int subdivision = 0;
  int bdf_order = 1;
  std::vector<StepErrors> steps;
  double velocity_l2l2 = 0.0;
  double velocity_l2h1 = 0.0;
  double pressure_l2l2 = 0.0;

  void add(const StepErrors& s) {
    steps.push_back(s);
    accumulate();
  }

  void accumulate() {
    double a = 0.0, b = 0.0, c = 0.0;
    for (const auto& s : steps) {
      a += s.velocity_l2 * s.velocity_l2;
      b += s.velocity_h1 * s.velocity_h1;
      c += s.pressure_l2 * s.pressure_l2;
    }
    velocity_l2l2 = std::sqrt(dt * a);
    velocity_l2h1 = std::sqrt(dt * b);
    pressure_l2l2 = std::sqrt(dt * c);
  }
};

/// Experimental orders log2(e_i / e_{i+1}) of a sequence refined by 2.
inline std::vector<double> eoc(const std::vector<double>& errors) {
  if (errors.size() < 2) throw std::invalid_argument("eoc: need at least two error values");
  for (double e : errors)
    if (!(e > 0.0) || !std::isfinite(e)) throw std::invalid_argument("eoc: errors must be positive and finite");
  std::vector<double> rates;
  for (std::size_t i = 0; i + 1 < errors.size(); ++i) rates.push_back(std::log2(errors[i] / errors[i + 1]));
  return rates;
}

}  // namespace cutstokes
