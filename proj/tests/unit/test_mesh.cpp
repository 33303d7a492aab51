#include <cmath>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "cutstokes/mesh.hpp"

using namespace cutstokes;

namespace {

BackgroundMesh unit_square(double cell) { return build_structured_mesh({0.0, 0.0, 1.0, 1.0}, cell); }

}  // namespace

TEST(Mesh, StructuredCounts) {
  const auto m = unit_square(0.25);
  EXPECT_EQ(m.num_vertices(), 25);
  EXPECT_EQ(m.num_elements(), 32);
  // 4*5 horizontal + 5*4 vertical + 16 diagonals
  EXPECT_EQ(m.num_facets(), 56);
  EXPECT_EQ(m.num_vertices() - m.num_facets() + m.num_elements(), 1);
}

TEST(Mesh, AreasPositiveAndSumToBox) {
  const auto m = build_structured_mesh({-1.0, -1.0, 2.0, 1.0}, 0.1);
  double total = 0.0;
  for (int e = 0; e < m.num_elements(); ++e) {
    EXPECT_GT(m.area(e), 0.0);
    total += m.area(e);
  }
  EXPECT_NEAR(total, 6.0, 1e-12);
}

TEST(Mesh, FacetConnectivityConsistent) {
  const auto m = unit_square(0.125);
  int boundary = 0;
  for (int f = 0; f < m.num_facets(); ++f) {
    const auto [a, b] = m.facet_to_elements[f];
    ASSERT_GE(a, 0);
    if (b < 0) {
      ++boundary;
      continue;
    }
    for (int e : {a, b}) {
      const auto& fs = m.element_to_facets[e];
      EXPECT_NE(std::find(fs.begin(), fs.end(), f), fs.end());
    }
  }
  EXPECT_EQ(boundary, 4 * 8);
}

TEST(Mesh, FacetOppositeLocalVertex) {
  const auto m = unit_square(0.25);
  for (int e = 0; e < m.num_elements(); ++e)
    for (int i = 0; i < 3; ++i) {
      const auto& f = m.facets[m.element_to_facets[e][i]];
      const int v = m.triangles[e][i];
      EXPECT_NE(f[0], v);
      EXPECT_NE(f[1], v);
      std::set<int> expect{m.triangles[e][(i + 1) % 3], m.triangles[e][(i + 2) % 3]};
      EXPECT_EQ(std::set<int>(f.begin(), f.end()), expect);
    }
}

TEST(Mesh, DiametersAndHeights) {
  const auto m = unit_square(0.25);
  EXPECT_NEAR(m.h_max, 0.25 * std::sqrt(2.0), 1e-14);
  for (double d : m.diameters) EXPECT_NEAR(d, 0.25 * std::sqrt(2.0), 1e-14);
  // right isosceles triangle with legs 0.25: the shortest height is onto the hypotenuse
  EXPECT_NEAR(m.min_height, 0.25 / std::sqrt(2.0), 1e-14);
}

TEST(Mesh, BuildWithHmaxIsExact) {
  const BoundingBox box{-1.0, -1.0, 2.0, 1.0};
  const int expected[] = {660, 2494, 9690};
  const double hs[] = {0.2, 0.1, 0.05};
  for (int i = 0; i < 3; ++i) {
    const auto m = build_mesh_with_hmax(box, hs[i]);
    EXPECT_NEAR(m.h_max, hs[i], 1e-12);
    EXPECT_EQ(m.num_elements(), expected[i]);
    EXPECT_LE(m.bbox.xmin, box.xmin);
    EXPECT_GE(m.bbox.xmax, box.xmax);
    EXPECT_LE(m.bbox.ymin, box.ymin);
    EXPECT_GE(m.bbox.ymax, box.ymax);
    // grown symmetrically about the centre
    EXPECT_NEAR(m.bbox.xmin + m.bbox.xmax, 1.0, 1e-12);
    EXPECT_NEAR(m.bbox.ymin + m.bbox.ymax, 0.0, 1e-12);
  }
}

TEST(Mesh, NeighborsSymmetric) {
  const auto m = unit_square(0.2);
  for (int e = 0; e < m.num_elements(); ++e) {
    const auto fn = facet_neighbors(m, e);
    const auto vn = vertex_neighbors(m, e);
    EXPECT_LE(fn.size(), 3u);
    for (int n : fn) EXPECT_TRUE(std::binary_search(vn.begin(), vn.end(), n));
    for (int n : vn) {
      EXPECT_NE(n, e);
      const auto back = vertex_neighbors(m, n);
      EXPECT_TRUE(std::binary_search(back.begin(), back.end(), e));
    }
  }
}

TEST(Mesh, ShapeRegular) {
  const auto m = unit_square(0.1);
  // right isosceles triangle: R / r = 1 + sqrt(2)
  for (int e = 0; e < m.num_elements(); ++e) EXPECT_NEAR(radius_ratio(m, e), 1.0 + std::sqrt(2.0), 1e-10);
}

TEST(Mesh, RejectsBadInput) {
  EXPECT_THROW(build_structured_mesh({0, 0, 1, 1}, 0.0), std::invalid_argument);
  EXPECT_THROW(build_structured_mesh({0, 0, 1, 1}, -0.1), std::invalid_argument);
  EXPECT_THROW(build_structured_mesh({1, 0, 0, 1}, 0.1), std::invalid_argument);
  EXPECT_THROW(build_mesh_with_hmax({0, 0, 1, 1}, NAN), std::invalid_argument);
  const auto m = unit_square(0.5);
  EXPECT_THROW(facet_neighbors(m, m.num_elements()), std::out_of_range);
}

TEST(Mesh, VtkExport) {
  const auto m = unit_square(0.25);
  std::ostringstream os;
  write_vtk(os, m);
  const auto s = os.str();
  EXPECT_NE(s.find("POINTS 25 double"), std::string::npos);
  EXPECT_NE(s.find("CELLS 32 128"), std::string::npos);
}
