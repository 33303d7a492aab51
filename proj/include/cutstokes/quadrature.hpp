#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "cutstokes/mesh.hpp"

namespace cutstokes {

struct QuadPoint {
  Point2 x;
  double w = 0.0;
};

using Quadrature = std::vector<QuadPoint>;

/// One-dimensional Gauss-Legendre rule on [0, 1].
struct LineRule {
  std::vector<double> points;
  std::vector<double> weights;
};

namespace detail {

inline LineRule compute_gauss_legendre(int n) {
  LineRule rule;
  rule.points.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    // Newton on P_n starting from the Chebyshev-like guess.
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    rule.points[n - 1 - i] = 0.5 * (x + 1.0);
    rule.weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}

constexpr int kMaxLinePoints = 24;
constexpr int kMaxTriangleDegree = 30;

}  // namespace detail

/// n-point Gauss-Legendre on [0,1]; exact to degree 2n-1. Weights sum to 1.
inline const LineRule& gauss_legendre(int n) {
  static const std::vector<LineRule> rules = [] {
    std::vector<LineRule> r(detail::kMaxLinePoints + 1);
    for (int i = 1; i <= detail::kMaxLinePoints; ++i) r[i] = detail::compute_gauss_legendre(i);
    return r;
  }();
  if (n < 1 || n > detail::kMaxLinePoints) throw std::out_of_range("gauss_legendre: unsupported point count");
  return rules[n];
}

inline int line_points_for_degree(int degree) { return std::max(1, (degree + 2) / 2); }

/// Collapsed (Duffy) Gauss rule on the reference triangle (0,0),(1,0),(0,1),
/// exact for polynomials of total degree `degree`. Weights sum to 1/2.
inline const Quadrature& reference_triangle_rule(int degree) {
  static const std::vector<Quadrature> rules = [] {
    std::vector<Quadrature> r(detail::kMaxTriangleDegree + 1);
    for (int d = 0; d <= detail::kMaxTriangleDegree; ++d) {
      // The Jacobian (1 - a) raises the degree in a by one.
      const auto& ga = gauss_legendre(line_points_for_degree(d + 1));
      const auto& gb = gauss_legendre(line_points_for_degree(d));
      for (std::size_t i = 0; i < ga.points.size(); ++i)
        for (std::size_t j = 0; j < gb.points.size(); ++j) {
          const double a = ga.points[i], b = gb.points[j];
          r[d].push_back({{a, b * (1.0 - a)}, ga.weights[i] * gb.weights[j] * (1.0 - a)});
        }
    }
    return r;
  }();
  if (degree < 0 || degree > detail::kMaxTriangleDegree)
    throw std::out_of_range("reference_triangle_rule: unsupported degree");
  return rules[degree];
}

/// Appends the rule of `degree` mapped affinely onto triangle (a, b, c).
inline void append_triangle_rule(Quadrature& out, const Point2& a, const Point2& b, const Point2& c,
                                 int degree) {
  const double jac = std::abs(cross(b - a, c - a));
  for (const auto& q : reference_triangle_rule(degree))
    out.push_back({a + q.x.x * (b - a) + q.x.y * (c - a), q.w * jac});
}

/// Appends the Gauss-Legendre rule of `degree` mapped onto segment [a, b].
inline void append_segment_rule(Quadrature& out, const Point2& a, const Point2& b, int degree) {
  const double len = norm(b - a);
  const auto& g = gauss_legendre(line_points_for_degree(degree));
  for (std::size_t i = 0; i < g.points.size(); ++i)
    out.push_back({a + g.points[i] * (b - a), g.weights[i] * len});
}

}  // namespace cutstokes
