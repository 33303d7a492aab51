#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace cutstokes {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  Point2 operator+(const Point2& o) const { return {x + o.x, y + o.y}; }
  Point2 operator-(const Point2& o) const { return {x - o.x, y - o.y}; }
  Point2 operator*(double s) const { return {s * x, s * y}; }
  friend Point2 operator*(double s, const Point2& p) { return p * s; }
  bool operator==(const Point2&) const = default;
};

inline double dot(const Point2& a, const Point2& b) { return a.x * b.x + a.y * b.y; }
inline double cross(const Point2& a, const Point2& b) { return a.x * b.y - a.y * b.x; }
inline double norm(const Point2& a) { return std::hypot(a.x, a.y); }

/// Signed area of the triangle (a, b, c); positive for counter-clockwise order.
inline double signed_area(const Point2& a, const Point2& b, const Point2& c) {
  return 0.5 * cross(b - a, c - a);
}

struct BoundingBox {
  double xmin = 0.0, ymin = 0.0, xmax = 1.0, ymax = 1.0;

  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
  double area() const { return width() * height(); }
  bool operator==(const BoundingBox&) const = default;
};

using Triangle = std::array<int, 3>;
using Edge = std::array<int, 2>;

/// Fixed background triangulation with element/facet/vertex connectivity.
///
/// element_to_facets[K][i] is the facet opposite local vertex i, i.e. the one
/// joining local vertices (i+1)%3 and (i+2)%3. facet_to_elements[F][1] is -1
/// for boundary facets.
struct BackgroundMesh {
  std::vector<Point2> vertices;
  std::vector<Triangle> triangles;
  std::vector<Edge> facets;
  std::vector<std::array<int, 2>> facet_to_elements;
  std::vector<std::array<int, 3>> element_to_facets;
  // CSR vertex -> incident elements
  std::vector<int> vertex_element_offsets;
  std::vector<int> vertex_elements;
  std::vector<double> diameters;
  double h_max = 0.0;
  double min_height = 0.0;
  BoundingBox bbox;

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  int num_elements() const { return static_cast<int>(triangles.size()); }
  int num_facets() const { return static_cast<int>(facets.size()); }

  std::array<Point2, 3> corners(int element) const {
    const auto& t = triangles.at(element);
    return {vertices[t[0]], vertices[t[1]], vertices[t[2]]};
  }

  double area(int element) const {
    auto c = corners(element);
    return signed_area(c[0], c[1], c[2]);
  }

  bool is_boundary_facet(int facet) const { return facet_to_elements[facet][1] < 0; }
};

namespace detail {

inline void check_element(const BackgroundMesh& mesh, int element) {
  if (element < 0 || element >= mesh.num_elements())
    throw std::out_of_range("element index " + std::to_string(element) + " out of range");
}

inline void finalize_connectivity(BackgroundMesh& mesh) {
  const int ne = mesh.num_elements();
  mesh.facets.clear();
  mesh.facet_to_elements.clear();
  mesh.element_to_facets.assign(ne, {-1, -1, -1});
  std::unordered_map<std::uint64_t, int> lookup;
  lookup.reserve(3 * ne);
  const auto nv = static_cast<std::uint64_t>(mesh.num_vertices());
  for (int e = 0; e < ne; ++e) {
    const auto& t = mesh.triangles[e];
    for (int i = 0; i < 3; ++i) {
      int a = t[(i + 1) % 3], b = t[(i + 2) % 3];
      if (a > b) std::swap(a, b);
      const std::uint64_t key = static_cast<std::uint64_t>(a) * nv + static_cast<std::uint64_t>(b);
      auto [it, inserted] = lookup.try_emplace(key, mesh.num_facets());
      if (inserted) {
        mesh.facets.push_back({a, b});
        mesh.facet_to_elements.push_back({e, -1});
      } else {
        auto& adj = mesh.facet_to_elements[it->second];
        if (adj[1] >= 0) throw std::logic_error("non-manifold facet in background mesh");
        adj[1] = e;
      }
      mesh.element_to_facets[e][i] = it->second;
    }
  }

  mesh.vertex_element_offsets.assign(mesh.num_vertices() + 1, 0);
  for (const auto& t : mesh.triangles)
    for (int v : t) ++mesh.vertex_element_offsets[v + 1];
  for (int v = 0; v < mesh.num_vertices(); ++v)
    mesh.vertex_element_offsets[v + 1] += mesh.vertex_element_offsets[v];
  mesh.vertex_elements.assign(mesh.vertex_element_offsets.back(), -1);
  std::vector<int> fill(mesh.vertex_element_offsets.begin(), mesh.vertex_element_offsets.end() - 1);
  for (int e = 0; e < ne; ++e)
    for (int v : mesh.triangles[e]) mesh.vertex_elements[fill[v]++] = e;

  mesh.diameters.resize(ne);
  mesh.h_max = 0.0;
  mesh.min_height = std::numeric_limits<double>::infinity();
  for (int e = 0; e < ne; ++e) {
    auto c = mesh.corners(e);
    double longest = 0.0;
    for (int i = 0; i < 3; ++i) longest = std::max(longest, norm(c[(i + 1) % 3] - c[i]));
    mesh.diameters[e] = longest;
    mesh.h_max = std::max(mesh.h_max, longest);
    mesh.min_height = std::min(mesh.min_height, 2.0 * mesh.area(e) / longest);
  }
}

}  // namespace detail

/// Alternating-diagonal triangulation of `bbox` with cells no wider than `h_target`.
inline BackgroundMesh build_structured_mesh(const BoundingBox& bbox, double h_target) {
  if (!(h_target > 0.0) || !std::isfinite(h_target))
    throw std::invalid_argument("build_structured_mesh: h_target must be positive");
  if (!(bbox.xmax > bbox.xmin) || !(bbox.ymax > bbox.ymin))
    throw std::invalid_argument("build_structured_mesh: bounding box is degenerate or inverted");

  // The small slack keeps e.g. 3/0.1 from rounding up to 31 cells.
  const int nx = std::max(1, static_cast<int>(std::ceil(bbox.width() / h_target - 1e-9)));
  const int ny = std::max(1, static_cast<int>(std::ceil(bbox.height() / h_target - 1e-9)));

  BackgroundMesh mesh;
  mesh.bbox = bbox;
  mesh.vertices.reserve((nx + 1) * (ny + 1));
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      mesh.vertices.push_back({bbox.xmin + bbox.width() * i / nx, bbox.ymin + bbox.height() * j / ny});

  auto vid = [nx](int i, int j) { return j * (nx + 1) + i; };
  mesh.triangles.reserve(2 * nx * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int a = vid(i, j), b = vid(i + 1, j), c = vid(i + 1, j + 1), d = vid(i, j + 1);
      if ((i + j) % 2 == 0) {
        mesh.triangles.push_back({a, b, c});
        mesh.triangles.push_back({a, c, d});
      } else {
        mesh.triangles.push_back({a, b, d});
        mesh.triangles.push_back({b, c, d});
      }
    }
  }
  detail::finalize_connectivity(mesh);
  return mesh;
}

/// Mesh whose largest element diameter is exactly `h_max`: square cells of side
/// h_max / sqrt(2), with `bbox` grown symmetrically to a whole number of cells.
inline BackgroundMesh build_mesh_with_hmax(const BoundingBox& bbox, double h_max) {
  if (!(h_max > 0.0) || !std::isfinite(h_max)) throw std::invalid_argument("build_mesh_with_hmax: h_max must be positive");
  const double cell = h_max / std::sqrt(2.0);
  const int nx = std::max(1, static_cast<int>(std::ceil(bbox.width() / cell - 1e-9)));
  const int ny = std::max(1, static_cast<int>(std::ceil(bbox.height() / cell - 1e-9)));
  const double cx = 0.5 * (bbox.xmin + bbox.xmax), cy = 0.5 * (bbox.ymin + bbox.ymax);
  const BoundingBox grown{cx - 0.5 * nx * cell, cy - 0.5 * ny * cell, cx + 0.5 * nx * cell, cy + 0.5 * ny * cell};
  return build_structured_mesh(grown, cell * (1.0 + 1e-12));
}

/// Elements sharing a facet with `element` (at most three), in local facet order.
inline std::vector<int> facet_neighbors(const BackgroundMesh& mesh, int element) {
  detail::check_element(mesh, element);
  std::vector<int> result;
  for (int f : mesh.element_to_facets[element]) {
    const auto& adj = mesh.facet_to_elements[f];
    const int other = adj[0] == element ? adj[1] : adj[0];
    if (other >= 0) result.push_back(other);
  }
  return result;
}

/// Elements sharing at least one vertex with `element`, excluding itself; sorted.
inline std::vector<int> vertex_neighbors(const BackgroundMesh& mesh, int element) {
  detail::check_element(mesh, element);
  std::vector<int> result;
  for (int v : mesh.triangles[element])
    for (int k = mesh.vertex_element_offsets[v]; k < mesh.vertex_element_offsets[v + 1]; ++k)
      if (mesh.vertex_elements[k] != element) result.push_back(mesh.vertex_elements[k]);
  std::sort(result.begin(), result.end());
  result.erase(std::unique(result.begin(), result.end()), result.end());
  return result;
}

/// Circumradius over inradius, the shape-regularity measure of one element.
inline double radius_ratio(const BackgroundMesh& mesh, int element) {
  auto c = mesh.corners(element);
  const double a = norm(c[1] - c[2]), b = norm(c[2] - c[0]), e = norm(c[0] - c[1]);
  const double area = mesh.area(element);
  const double circum = a * b * e / (4.0 * area);
  const double in = 2.0 * area / (a + b + e);
  return circum / in;
}

/// Legacy VTK ASCII export; optional per-cell scalar data.
inline void write_vtk(std::ostream& os, const BackgroundMesh& mesh,
                      const std::vector<double>* cell_data = nullptr,
                      const char* cell_data_name = "data") {
  os << "# vtk DataFile Version 3.0\ncutstokes background mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << mesh.num_vertices() << " double\n";
  os.precision(17);
  for (const auto& p : mesh.vertices) os << p.x << ' ' << p.y << " 0\n";
  os << "CELLS " << mesh.num_elements() << ' ' << 4 * mesh.num_elements() << '\n';
  for (const auto& t : mesh.triangles) os << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  os << "CELL_TYPES " << mesh.num_elements() << '\n';
  for (int e = 0; e < mesh.num_elements(); ++e) os << "5\n";
  if (cell_data != nullptr) {
    os << "CELL_DATA " << mesh.num_elements() << "\nSCALARS " << cell_data_name
       << " double 1\nLOOKUP_TABLE default\n";
    for (double v : *cell_data) os << v << '\n';
  }
}

}  // namespace cutstokes
