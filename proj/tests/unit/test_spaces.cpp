#include <cmath>

#include <gtest/gtest.h>

#include "cutstokes/geometry.hpp"
#include "cutstokes/manufactured.hpp"
#include "cutstokes/spaces.hpp"

using namespace cutstokes;

namespace {

std::vector<char> all(const BackgroundMesh& m) { return std::vector<char>(m.num_elements(), 1); }

}  // namespace

TEST(Spaces, NodeCountsOnFullMesh) {
  const auto m = build_structured_mesh({0, 0, 1, 1}, 0.25);
  for (int k = 1; k <= 4; ++k) {
    const auto s = build_space(m, all(m), k, 1);
    EXPECT_EQ(s->num_nodes(), (4 * k + 1) * (4 * k + 1)) << k;
    EXPECT_EQ(build_space(m, all(m), k, 2)->num_dofs(), 2 * (4 * k + 1) * (4 * k + 1));
  }
}

TEST(Spaces, SharedNodesCoincide) {
  // every node is listed once and its point agrees across the elements using it
  const auto m = build_structured_mesh({0, 0, 1, 1}, 0.2);
  for (int k = 2; k <= 4; ++k) {
    const auto s = build_space(m, all(m), k, 1);
    const auto& basis = LagrangeBasis::get(k);
    for (int e = 0; e < m.num_elements(); ++e) {
      const auto map = AffineMap::of(m, e);
      auto nodes = s->nodes_of(e);
      for (int i = 0; i < basis.size(); ++i) {
        const Point2 x = map.to_physical(basis.node(i));
        EXPECT_NEAR(x.x, s->node_points[nodes[i]].x, 1e-13);
        EXPECT_NEAR(x.y, s->node_points[nodes[i]].y, 1e-13);
      }
    }
  }
}

TEST(Spaces, InterpolationReproducesPolynomials) {
  const auto m = build_structured_mesh({-1, -1, 1, 1}, 0.3);
  const auto s = build_space(m, all(m), 3, 2);
  auto f = [](const Point2& p) { return Eigen::Vector2d(p.x * p.x * p.y - 1.0, std::pow(p.y, 3) + p.x); };
  const auto u = interpolate(s, f);
  for (int e = 0; e < m.num_elements(); e += 5) {
    const auto c = m.corners(e);
    const Point2 x = (1.0 / 3.0) * (c[0] + c[1] + c[2]);
    EXPECT_NEAR((field_value(u, e, x) - f(x)).norm(), 0.0, 1e-12);
  }
}

TEST(Spaces, ContinuityAcrossFacets) {
  const auto m = build_structured_mesh({0, 0, 1, 1}, 0.25);
  const auto s = build_space(m, all(m), 2, 2);
  auto f = [](const Point2& p) { return Eigen::Vector2d(std::sin(3 * p.x), std::exp(p.y)); };
  const auto u = interpolate(s, f);
  for (int fct = 0; fct < m.num_facets(); ++fct) {
    const auto [a, b] = m.facet_to_elements[fct];
    if (b < 0) continue;
    const Point2 x = 0.3 * m.vertices[m.facets[fct][0]] + 0.7 * m.vertices[m.facets[fct][1]];
    EXPECT_NEAR((field_value(u, a, x) - field_value(u, b, x)).norm(), 0.0, 1e-13);
  }
}

TEST(Spaces, TaylorHoodLayoutSupports) {
  const auto mc = moving_disk_case(1.0);
  const auto m = build_mesh_with_hmax(mc.box, 0.2);
  const auto cut = classify_and_decompose(m, mc.phi, 0.0, 0, 6);
  const auto a = extract_active_sets(m, cut, 0.1);
  const auto th = build_layout(m, a, 2);
  EXPECT_EQ(th.velocity->order, 2);
  EXPECT_EQ(th.pressure->order, 1);
  EXPECT_EQ(th.velocity->support, a.in_active);
  EXPECT_EQ(th.pressure->support, a.in_cut_mesh);
  EXPECT_THROW(build_layout(m, a, 1), std::invalid_argument);
}

TEST(Spaces, TransferKeepsSharedValues) {
  const auto m = build_structured_mesh({0, 0, 1, 1}, 0.1);
  std::vector<char> left(m.num_elements(), 0), right(m.num_elements(), 0);
  for (int e = 0; e < m.num_elements(); ++e) {
    const auto c = m.corners(e);
    const double cx = (c[0].x + c[1].x + c[2].x) / 3.0;
    left[e] = cx < 0.6;
    right[e] = cx > 0.4;
  }
  const auto a = build_space(m, left, 2, 2), b = build_space(m, right, 2, 2);
  auto f = [](const Point2& p) { return Eigen::Vector2d(p.x + 2 * p.y, p.x * p.y); };
  const auto u = interpolate(a, f);
  const auto v = transfer(u, b);
  for (int n = 0; n < b->num_nodes(); ++n) {
    const auto& x = b->node_points[n];
    const bool shared = a->key_to_node[b->node_to_key[n]] >= 0;
    const Eigen::Vector2d expect = shared ? f(x) : Eigen::Vector2d::Zero();
    EXPECT_NEAR(v.coefficients[b->dof(n, 0)], expect[0], 1e-14);
    EXPECT_NEAR(v.coefficients[b->dof(n, 1)], expect[1], 1e-14);
  }
  // requiring the whole right part: nodes beyond x = 0.6 were never active
  try {
    transfer(u, b, &right);
    FAIL() << "expected a containment error";
  } catch (const ContainmentError& e) {
    EXPECT_GT(e.missing_nodes(), 0);
  }
  // requiring only the overlap succeeds
  std::vector<char> overlap(m.num_elements(), 0);
  for (int e = 0; e < m.num_elements(); ++e) overlap[e] = left[e] && right[e];
  EXPECT_NO_THROW(transfer(u, b, &overlap));
}

TEST(Spaces, TransferRejectsMismatchedSpaces) {
  const auto m = build_structured_mesh({0, 0, 1, 1}, 0.25);
  const FieldVector u(build_space(m, all(m), 2, 2));
  EXPECT_THROW(transfer(u, build_space(m, all(m), 3, 2)), std::invalid_argument);
  EXPECT_THROW(transfer(u, build_space(m, all(m), 2, 1)), std::invalid_argument);
}

TEST(Spaces, RejectsBadInput) {
  const auto m = build_structured_mesh({0, 0, 1, 1}, 0.25);
  EXPECT_THROW(build_space(m, std::vector<char>(3, 1), 2, 1), std::invalid_argument);
  const auto s = build_space(m, all(m), 2, 1);
  EXPECT_THROW(interpolate(s, [](const Point2&) { return Eigen::Vector2d::Zero(); }), std::invalid_argument);
  EXPECT_THROW(FieldVector(s, Eigen::VectorXd::Zero(3)), std::invalid_argument);
  std::vector<char> none(m.num_elements(), 0);
  EXPECT_THROW(build_space(m, none, 2, 1)->nodes_of(0), std::out_of_range);
}
