#pragma once

#include <array>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "cutstokes/mesh.hpp"

namespace cutstokes {

constexpr int kMaxLocalNodes = 15;

using LocalVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxLocalNodes, 1>;
using LocalGradients = Eigen::Matrix<double, Eigen::Dynamic, 2, 0, kMaxLocalNodes, 2>;
using LocalMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 2 * kMaxLocalNodes, 2 * kMaxLocalNodes>;

/// Nodal P_k basis on the reference triangle (0,0),(1,0),(0,1).
///
/// Nodes sit on the uniform barycentric lattice; node i has integer
/// barycentric coordinates bary[i] summing to k, with bary[i][1] / k and
/// bary[i][2] / k the reference coordinates. Shape functions are stored as
/// monomial coefficients, so they can be evaluated anywhere in the plane,
/// which is what the canonical polynomial extension needs.
class LagrangeBasis {
 public:
  static constexpr int kMaxOrder = 4;

  explicit LagrangeBasis(int order) : order_(order) {
    if (order < 1 || order > kMaxOrder) throw std::invalid_argument("LagrangeBasis: order must be in [1, 4]");
    for (int a = 0; a <= order; ++a)
      for (int b = 0; a + b <= order; ++b) exponents_.push_back({a, b});
    for (int j = 0; j <= order; ++j)
      for (int i = 0; i + j <= order; ++i) bary_.push_back({order - i - j, i, j});
    const int n = size();
    Eigen::MatrixXd vandermonde(n, n);
    for (int r = 0; r < n; ++r) {
      const double xi = double(bary_[r][1]) / order, eta = double(bary_[r][2]) / order;
      for (int c = 0; c < n; ++c) vandermonde(r, c) = ipow(xi, exponents_[c][0]) * ipow(eta, exponents_[c][1]);
    }
    // Column j of coeffs_ holds the monomial expansion of shape function j.
    coeffs_ = vandermonde.inverse();
  }

  int order() const { return order_; }
  int size() const { return static_cast<int>(exponents_.size()); }
  const std::vector<std::array<int, 3>>& lattice() const { return bary_; }

  Point2 node(int i) const { return {double(bary_[i][1]) / order_, double(bary_[i][2]) / order_}; }

  void values(const Point2& ref, LocalVector& out) const {
    LocalVector m(size());
    for (int c = 0; c < size(); ++c) m[c] = ipow(ref.x, exponents_[c][0]) * ipow(ref.y, exponents_[c][1]);
    out.noalias() = coeffs_.transpose() * m;
  }

  /// Reference gradients: row i = (d/dxi, d/deta) of shape function i.
  void gradients(const Point2& ref, LocalGradients& out) const {
    LocalGradients dm(size(), 2);
    for (int c = 0; c < size(); ++c) {
      const int a = exponents_[c][0], b = exponents_[c][1];
      dm(c, 0) = a == 0 ? 0.0 : a * ipow(ref.x, a - 1) * ipow(ref.y, b);
      dm(c, 1) = b == 0 ? 0.0 : b * ipow(ref.x, a) * ipow(ref.y, b - 1);
    }
    out.noalias() = coeffs_.transpose() * dm;
  }

  /// Process-wide cached instance.
  static const LagrangeBasis& get(int order) {
    static const std::array<LagrangeBasis, kMaxOrder> bases{LagrangeBasis(1), LagrangeBasis(2), LagrangeBasis(3),
                                                            LagrangeBasis(4)};
    if (order < 1 || order > kMaxOrder) throw std::invalid_argument("LagrangeBasis: order must be in [1, 4]");
    return bases[order - 1];
  }

 private:
  static double ipow(double x, int p) {
    double r = 1.0;
    for (int i = 0; i < p; ++i) r *= x;
    return r;
  }

  int order_;
  std::vector<std::array<int, 2>> exponents_;
  std::vector<std::array<int, 3>> bary_;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxLocalNodes, kMaxLocalNodes> coeffs_;
};

/// Affine map x = origin + J * ref of one background element.
struct AffineMap {
  Point2 origin;
  Eigen::Matrix2d jacobian;
  Eigen::Matrix2d inverse;
  double det = 0.0;

  static AffineMap of(const BackgroundMesh& mesh, int element) {
    auto c = mesh.corners(element);
    AffineMap m;
    m.origin = c[0];
    m.jacobian << c[1].x - c[0].x, c[2].x - c[0].x, c[1].y - c[0].y, c[2].y - c[0].y;
    m.det = m.jacobian.determinant();
    m.inverse = m.jacobian.inverse();
    return m;
  }

  Point2 to_reference(const Point2& x) const {
    const Eigen::Vector2d r = inverse * Eigen::Vector2d(x.x - origin.x, x.y - origin.y);
    return {r[0], r[1]};
  }

  Point2 to_physical(const Point2& ref) const {
    const Eigen::Vector2d r = jacobian * Eigen::Vector2d(ref.x, ref.y);
    return {origin.x + r[0], origin.y + r[1]};
  }
};

}  // namespace cutstokes
