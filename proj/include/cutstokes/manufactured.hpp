#pragma once

#include <cmath>
#include <functional>
#include <numbers>

#include <Eigen/Dense>

#include "cutstokes/geometry.hpp"
#include "cutstokes/mesh.hpp"

namespace cutstokes {

/// Analytic solution of a moving-domain Stokes problem plus its forcing.
struct ManufacturedCase {
  LevelSet phi;
  std::function<Eigen::Vector2d(const Point2&, double)> velocity;
  std::function<Eigen::Matrix2d(const Point2&, double)> velocity_gradient;  // row c = grad u_c
  std::function<double(const Point2&, double)> pressure;
  std::function<Eigen::Vector2d(const Point2&, double)> forcing;
  BoundingBox box{-1.0, -1.0, 2.0, 1.0};
  double final_time = 1.0;
  bool stationary = false;
  /// Box boundary is the physical boundary; no cut geometry.
  bool fitted = false;
};

/// Disk of radius sqrt(1/2) translating with unit speed along x1.
///
/// With xi = x1 - t, eta = x2 and s = xi^2 + eta^2:
///   u = 2 pi cos(pi s) (eta, -xi),  p = sin(pi s) - 2/pi.
/// The rotation is about the moving centre, so u is divergence free and
/// vanishes on the interface s = 1/2.
namespace disk {

inline double level_set(const Point2& x, double t) {
  const double xi = x.x - t;
  return xi * xi + x.y * x.y - 0.5;
}

inline Eigen::Vector2d velocity(const Point2& x, double t) {
  using std::numbers::pi;
  const double xi = x.x - t, eta = x.y, g = std::cos(pi * (xi * xi + eta * eta));
  return 2.0 * pi * g * Eigen::Vector2d(eta, -xi);
}

inline Eigen::Matrix2d velocity_gradient(const Point2& x, double t) {
  using std::numbers::pi;
  const double xi = x.x - t, eta = x.y, s = xi * xi + eta * eta;
  const double g = std::cos(pi * s), dg = -pi * std::sin(pi * s);  // dg/ds
  // d g / d xi = 2 xi dg, d g / d eta = 2 eta dg
  Eigen::Matrix2d m;
  m << 2.0 * pi * eta * 2.0 * xi * dg, 2.0 * pi * (g + eta * 2.0 * eta * dg),
      -2.0 * pi * (g + xi * 2.0 * xi * dg), -2.0 * pi * xi * 2.0 * eta * dg;
  return m;
}

inline double pressure(const Point2& x, double t) {
  using std::numbers::pi;
  const double xi = x.x - t;
  return std::sin(pi * (xi * xi + x.y * x.y)) - 2.0 / pi;
}

inline Eigen::Vector2d time_derivative(const Point2& x, double t) {
  using std::numbers::pi;
  const double xi = x.x - t, eta = x.y, s = xi * xi + eta * eta;
  const double g = std::cos(pi * s), sn = std::sin(pi * s);
  return 2.0 * pi * (2.0 * pi * xi * sn * Eigen::Vector2d(eta, -xi) + g * Eigen::Vector2d(0.0, 1.0));
}

inline Eigen::Vector2d laplacian(const Point2& x, double t) {
  using std::numbers::pi;
  const double xi = x.x - t, eta = x.y, s = xi * xi + eta * eta;
  const double c = -4.0 * pi * pi * s * std::cos(pi * s) - 8.0 * pi * std::sin(pi * s);
  return 2.0 * pi * c * Eigen::Vector2d(eta, -xi);
}

inline Eigen::Vector2d pressure_gradient(const Point2& x, double t) {
  using std::numbers::pi;
  const double xi = x.x - t, eta = x.y;
  return 2.0 * pi * std::cos(pi * (xi * xi + eta * eta)) * Eigen::Vector2d(xi, eta);
}

inline Eigen::Vector2d forcing(const Point2& x, double t, double nu) {
  return time_derivative(x, t) - nu * laplacian(x, t) + pressure_gradient(x, t);
}

}  // namespace disk

inline ManufacturedCase moving_disk_case(double nu) {
  ManufacturedCase c;
  c.phi.value = disk::level_set;
  c.phi.w_inf = 1.0;
  c.velocity = disk::velocity;
  c.velocity_gradient = disk::velocity_gradient;
  c.pressure = disk::pressure;
  c.forcing = [nu](const Point2& x, double t) { return disk::forcing(x, t, nu); };
  return c;
}

/// Stationary Stokes on the unit square from the stream function a(x) a(y),
/// a(z) = z^2 (1-z)^2; u vanishes on the boundary, p = cos(pi x) cos(pi y) has zero mean.
namespace square {

inline double a(double z) { return z * z * (1 - z) * (1 - z); }
inline double da(double z) { return 2 * z * (1 - z) * (1 - 2 * z); }
inline double dda(double z) { return 2 - 12 * z + 12 * z * z; }
inline double ddda(double z) { return -12 + 24 * z; }

inline Eigen::Vector2d velocity(const Point2& p, double) {
  return {a(p.x) * da(p.y), -da(p.x) * a(p.y)};
}

inline Eigen::Matrix2d velocity_gradient(const Point2& p, double) {
  Eigen::Matrix2d m;
  m << da(p.x) * da(p.y), a(p.x) * dda(p.y), -dda(p.x) * a(p.y), -da(p.x) * da(p.y);
  return m;
}

inline double pressure(const Point2& p, double) {
  using std::numbers::pi;
  return std::cos(pi * p.x) * std::cos(pi * p.y);
}

inline Eigen::Vector2d forcing(const Point2& p, double, double nu) {
  using std::numbers::pi;
  const double x = p.x, y = p.y;
  const Eigen::Vector2d lap(dda(x) * da(y) + a(x) * ddda(y), -ddda(x) * a(y) - da(x) * dda(y));
  const Eigen::Vector2d gp(-pi * std::sin(pi * x) * std::cos(pi * y), -pi * std::cos(pi * x) * std::sin(pi * y));
  return -nu * lap + gp;
}

}  // namespace square

inline ManufacturedCase fitted_square_case(double nu) {
  ManufacturedCase c;
  // Negative everywhere: the whole box is physical.
  c.phi.value = [](const Point2&, double) { return -1.0; };
  c.phi.w_inf = 0.0;
  c.velocity = square::velocity;
  c.velocity_gradient = square::velocity_gradient;
  c.pressure = square::pressure;
  c.forcing = [nu](const Point2& x, double t) { return square::forcing(x, t, nu); };
  c.box = {0.0, 0.0, 1.0, 1.0};
  c.final_time = 1.0;
  c.stationary = true;
  c.fitted = true;
  return c;
}

}  // namespace cutstokes
