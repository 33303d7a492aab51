#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "cutstokes/mesh.hpp"
#include "cutstokes/quadrature.hpp"

namespace cutstokes {

/// Time-dependent level set; negative inside the physical domain.
struct LevelSet {
  std::function<double(const Point2&, double)> value;
  /// Maximal normal speed of the zero level.
  double w_inf = 1.0;
};

enum class ElementKind : std::uint8_t { Inside, Outside, Cut };

struct InterfaceSegment {
  Point2 a;
  Point2 b;
  Point2 normal;  // unit, pointing from the inside to the outside
  double length = 0.0;
};

struct InterfacePoint {
  Point2 x;
  double w = 0.0;
  Point2 normal;
};

/// Sub-triangulation of one element that needs more than the full-element rule.
struct ElementPieces {
  std::vector<std::array<Point2, 3>> inside_parts;
  std::vector<InterfaceSegment> segments;
};

/// Classification and cut geometry of every background element at one time.
///
/// Inside elements integrate with the full element rule; Cut elements over
/// their inside sub-triangles. Boundary segments are stored for any element
/// owning a piece of the discrete interface (Cut elements, or Inside elements
/// on the box boundary in fitted mode).
struct CutDecomposition {
  const BackgroundMesh* mesh = nullptr;
  double time = 0.0;
  int subdivision_level = 0;
  int quad_degree = 1;
  std::vector<ElementKind> kind;
  std::vector<double> inside_area;
  std::vector<double> outside_area;
  std::vector<int> piece_slot;  // -1 when the element has no pieces
  std::vector<ElementPieces> pieces;

  bool has_interface(int element) const {
    const int slot = piece_slot[element];
    return slot >= 0 && !pieces[slot].segments.empty();
  }

  const std::vector<InterfaceSegment>& segments(int element) const {
    static const std::vector<InterfaceSegment> none;
    const int slot = piece_slot[element];
    return slot >= 0 ? pieces[slot].segments : none;
  }

  /// Quadrature over the inside part of `element`, exact to `degree` on each straight piece.
  Quadrature volume_quadrature(int element, int degree) const {
    Quadrature q;
    if (kind[element] == ElementKind::Outside) return q;
    if (kind[element] == ElementKind::Inside) {
      auto c = mesh->corners(element);
      append_triangle_rule(q, c[0], c[1], c[2], degree);
      return q;
    }
    for (const auto& t : pieces[piece_slot[element]].inside_parts)
      append_triangle_rule(q, t[0], t[1], t[2], degree);
    return q;
  }

  /// Full-element quadrature regardless of classification.
  Quadrature element_quadrature(int element, int degree) const {
    Quadrature q;
    auto c = mesh->corners(element);
    append_triangle_rule(q, c[0], c[1], c[2], degree);
    return q;
  }

  std::vector<InterfacePoint> interface_quadrature(int element, int degree) const {
    std::vector<InterfacePoint> out;
    Quadrature tmp;
    for (const auto& s : segments(element)) {
      tmp.clear();
      append_segment_rule(tmp, s.a, s.b, degree);
      for (const auto& q : tmp) out.push_back({q.x, q.w, s.normal});
    }
    return out;
  }

  double total_inside_area() const {
    double a = 0.0;
    for (double v : inside_area) a += v;
    return a;
  }

  double total_interface_length() const {
    double l = 0.0;
    for (const auto& p : pieces)
      for (const auto& s : p.segments) l += s.length;
    return l;
  }
};

namespace detail {

inline Point2 linear_gradient(const std::array<Point2, 3>& p, const std::array<double, 3>& f) {
  const Point2 e1 = p[1] - p[0], e2 = p[2] - p[0];
  const double det = cross(e1, e2);
  const double g1 = f[1] - f[0], g2 = f[2] - f[0];
  return {(e2.y * g1 - e1.y * g2) / det, (-e2.x * g1 + e1.x * g2) / det};
}

struct SplitAccumulator {
  ElementPieces pieces;
  double inside = 0.0;
  double outside = 0.0;
};

/// Splits a triangle by the zero line of the linear interpolant of f.
inline void split_triangle(const std::array<Point2, 3>& p, const std::array<double, 3>& f,
                           SplitAccumulator& acc) {
  const int neg = (f[0] < 0) + (f[1] < 0) + (f[2] < 0);
  const double area = signed_area(p[0], p[1], p[2]);
  if (neg == 3) {
    acc.pieces.inside_parts.push_back(p);
    acc.inside += area;
    return;
  }
  if (neg == 0) {
    acc.outside += area;
    return;
  }
  // The lone vertex i has the minority sign.
  const bool lone_negative = neg == 1;
  int i = 0;
  for (; i < 3; ++i)
    if ((f[i] < 0) == lone_negative) break;
  const int j = (i + 1) % 3, k = (i + 2) % 3;
  const Point2 qij = p[i] + (f[i] / (f[i] - f[j])) * (p[j] - p[i]);
  const Point2 qik = p[i] + (f[i] / (f[i] - f[k])) * (p[k] - p[i]);
  const std::array<Point2, 3> tip{p[i], qij, qik};
  const std::array<Point2, 3> quad_a{qij, p[j], p[k]};
  const std::array<Point2, 3> quad_b{qij, p[k], qik};
  const double a_tip = signed_area(tip[0], tip[1], tip[2]);
  const double a_quad = signed_area(quad_a[0], quad_a[1], quad_a[2]) + signed_area(quad_b[0], quad_b[1], quad_b[2]);
  if (lone_negative) {
    acc.pieces.inside_parts.push_back(tip);
    acc.inside += a_tip;
    acc.outside += a_quad;
  } else {
    acc.pieces.inside_parts.push_back(quad_a);
    acc.pieces.inside_parts.push_back(quad_b);
    acc.inside += a_quad;
    acc.outside += a_tip;
  }
  Point2 g = linear_gradient(p, f);
  const double gn = norm(g);
  InterfaceSegment seg;
  seg.a = qij;
  seg.b = qik;
  seg.normal = g * (1.0 / gn);
  seg.length = norm(qik - qij);
  if (seg.length > 0.0) acc.pieces.segments.push_back(seg);
}

inline double apply_tie_rule(double v, double tol) { return std::abs(v) < tol ? -tol : v; }

}  // namespace detail

/// Classifies all elements and builds the piecewise-linear cut geometry.
///
/// With s > 0, elements near the coarse interface are split into 4^s
/// congruent children and the level set is interpolated linearly on each
/// child. Elements whose vertex values share a sign and that do not touch a
/// sign-changing element are taken as uncut.
inline CutDecomposition classify_and_decompose(const BackgroundMesh& mesh, const LevelSet& phi, double t,
                                               int s, int quad_degree) {
  if (s < 0) throw std::invalid_argument("classify_and_decompose: subdivision level must be >= 0");
  if (quad_degree < 1) throw std::invalid_argument("classify_and_decompose: quad_degree must be >= 1");
  if (!phi.value) throw std::invalid_argument("classify_and_decompose: level set has no evaluator");

  const int ne = mesh.num_elements();
  const double tol = 1e-12 * mesh.h_max;
  CutDecomposition cut;
  cut.mesh = &mesh;
  cut.time = t;
  cut.subdivision_level = s;
  cut.quad_degree = quad_degree;
  cut.kind.assign(ne, ElementKind::Outside);
  cut.inside_area.assign(ne, 0.0);
  cut.outside_area.assign(ne, 0.0);
  cut.piece_slot.assign(ne, -1);

  std::vector<double> vphi(mesh.num_vertices());
  for (int v = 0; v < mesh.num_vertices(); ++v)
    vphi[v] = detail::apply_tie_rule(phi.value(mesh.vertices[v], t), tol);

  std::vector<char> mixed(ne, 0);
  for (int e = 0; e < ne; ++e) {
    const auto& tri = mesh.triangles[e];
    const int neg = (vphi[tri[0]] < 0) + (vphi[tri[1]] < 0) + (vphi[tri[2]] < 0);
    mixed[e] = neg > 0 && neg < 3;
  }
  std::vector<char> refine = mixed;
  if (s > 0) {
    for (int e = 0; e < ne; ++e)
      if (mixed[e])
        for (int v : mesh.triangles[e])
          for (int k = mesh.vertex_element_offsets[v]; k < mesh.vertex_element_offsets[v + 1]; ++k)
            refine[mesh.vertex_elements[k]] = 1;
  }

  const int n = 1 << s;
  std::vector<Point2> lattice;
  std::vector<double> lphi;
  auto lid = [n](int i, int j) { return j * (n + 1) - j * (j - 1) / 2 + i; };

  for (int e = 0; e < ne; ++e) {
    const auto c = mesh.corners(e);
    const double area = mesh.area(e);
    if (!refine[e]) {
      const bool inside = vphi[mesh.triangles[e][0]] < 0;
      cut.kind[e] = inside ? ElementKind::Inside : ElementKind::Outside;
      (inside ? cut.inside_area[e] : cut.outside_area[e]) = area;
      continue;
    }

    detail::SplitAccumulator acc;
    if (s == 0) {
      const auto& tri = mesh.triangles[e];
      detail::split_triangle(c, {vphi[tri[0]], vphi[tri[1]], vphi[tri[2]]}, acc);
    } else {
      lattice.clear();
      lphi.clear();
      for (int j = 0; j <= n; ++j)
        for (int i = 0; i + j <= n; ++i) {
          const Point2 x = c[0] + (double(i) / n) * (c[1] - c[0]) + (double(j) / n) * (c[2] - c[0]);
          lattice.push_back(x);
          lphi.push_back(detail::apply_tie_rule(phi.value(x, t), tol));
        }
      auto child = [&](int a, int b, int d) {
        detail::split_triangle({lattice[a], lattice[b], lattice[d]}, {lphi[a], lphi[b], lphi[d]}, acc);
      };
      for (int j = 0; j < n; ++j)
        for (int i = 0; i + j < n; ++i) {
          child(lid(i, j), lid(i + 1, j), lid(i, j + 1));
          if (i + j < n - 1) child(lid(i + 1, j), lid(i + 1, j + 1), lid(i, j + 1));
        }
    }

    if (acc.outside <= 0.0) {
      cut.kind[e] = ElementKind::Inside;
      cut.inside_area[e] = area;
    } else if (acc.inside <= 0.0) {
      cut.kind[e] = ElementKind::Outside;
      cut.outside_area[e] = area;
    } else {
      cut.kind[e] = ElementKind::Cut;
      cut.inside_area[e] = acc.inside;
      cut.outside_area[e] = acc.outside;
      cut.piece_slot[e] = static_cast<int>(cut.pieces.size());
      cut.pieces.push_back(std::move(acc.pieces));
    }
  }
  return cut;
}

/// Uncut decomposition of the whole box with the box boundary as the Nitsche
/// boundary. Used for fitted reference computations.
inline CutDecomposition fitted_decomposition(const BackgroundMesh& mesh, int quad_degree) {
  const int ne = mesh.num_elements();
  CutDecomposition cut;
  cut.mesh = &mesh;
  cut.quad_degree = quad_degree;
  cut.kind.assign(ne, ElementKind::Inside);
  cut.inside_area.resize(ne);
  cut.outside_area.assign(ne, 0.0);
  cut.piece_slot.assign(ne, -1);
  for (int e = 0; e < ne; ++e) cut.inside_area[e] = mesh.area(e);
  for (int f = 0; f < mesh.num_facets(); ++f) {
    if (!mesh.is_boundary_facet(f)) continue;
    const int e = mesh.facet_to_elements[f][0];
    const Point2 a = mesh.vertices[mesh.facets[f][0]], b = mesh.vertices[mesh.facets[f][1]];
    const Point2 tangent = b - a;
    Point2 normal{tangent.y, -tangent.x};
    normal = normal * (1.0 / norm(normal));
    // Orient away from the element's centroid.
    auto c = mesh.corners(e);
    const Point2 centroid = (1.0 / 3.0) * (c[0] + c[1] + c[2]);
    if (dot(normal, a - centroid) < 0) normal = normal * -1.0;
    if (cut.piece_slot[e] < 0) {
      cut.piece_slot[e] = static_cast<int>(cut.pieces.size());
      cut.pieces.emplace_back();
    }
    cut.pieces[cut.piece_slot[e]].segments.push_back({a, b, normal, norm(tangent)});
  }
  return cut;
}

/// Width of the extension strip; BDF2 doubles it so two history levels stay covered.
inline double strip_width(double c_delta, double w_inf, double dt, int bdf_order) {
  if (bdf_order != 1 && bdf_order != 2) throw std::invalid_argument("strip_width: bdf_order must be 1 or 2");
  if (!(dt > 0.0)) throw std::invalid_argument("strip_width: dt must be positive");
  if (!(c_delta > 0.0) || !(w_inf >= 0.0)) throw std::invalid_argument("strip_width: c_delta and w_inf must be positive");
  return bdf_order * c_delta * w_inf * dt;
}

/// Subdivision level balancing geometry and discretisation error on mesh h.
inline int subdivision_schedule(double h0, double h, int s0) {
  const double levels = std::round(std::log2(h0 / h));
  return static_cast<int>(std::max(0.0, levels)) + s0;
}

enum class StripAdjacency { Facet, Vertex };

/// Element and facet sets driving the spaces and the ghost penalties at one time.
struct ActiveSets {
  std::vector<char> in_active;
  std::vector<char> in_cut_mesh;
  std::vector<char> in_boundary;
  std::vector<char> in_strip;
  std::vector<int> t_active;
  std::vector<int> t_cut_mesh;
  std::vector<int> t_boundary;
  std::vector<int> strip_pm;
  std::vector<int> facets_velocity_gp;
  std::vector<int> facets_pressure_gp;
  /// L = ceil(delta_h / h_max); scales the velocity ghost penalty.
  int strip_rings = 0;
  /// Number of adjacency rings actually used to grow the active mesh.
  int dilation_rings = 0;
  StripAdjacency adjacency = StripAdjacency::Vertex;
  double delta_h = 0.0;
};

namespace detail {

inline std::vector<int> flags_to_list(const std::vector<char>& flags) {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(flags.size()); ++i)
    if (flags[i]) out.push_back(i);
  return out;
}

inline std::vector<char> dilate(const BackgroundMesh& mesh, std::vector<char> flags, int rings,
                                StripAdjacency adjacency) {
  std::vector<int> frontier = flags_to_list(flags);
  for (int r = 0; r < rings && !frontier.empty(); ++r) {
    std::vector<int> next;
    for (int e : frontier) {
      auto nb = adjacency == StripAdjacency::Facet ? facet_neighbors(mesh, e) : vertex_neighbors(mesh, e);
      for (int o : nb)
        if (!flags[o]) {
          flags[o] = 1;
          next.push_back(o);
        }
    }
    frontier = std::move(next);
  }
  return flags;
}

}  // namespace detail

/// Number of adjacency rings that covers a band of width delta_h around the cut mesh.
///
/// One facet ring advances at least by the smallest element height only across
/// facets; one vertex ring covers the full min-height neighbourhood of every
/// element.
inline int dilation_rings_for(const BackgroundMesh& mesh, double delta_h, StripAdjacency adjacency) {
  if (delta_h <= 0.0) return 0;
  const double step = adjacency == StripAdjacency::Facet ? mesh.h_max : mesh.min_height;
  return static_cast<int>(std::ceil(delta_h / step - 1e-12));
}

inline ActiveSets extract_active_sets(const BackgroundMesh& mesh, const CutDecomposition& cut, double delta_h,
                                      StripAdjacency adjacency = StripAdjacency::Vertex) {
  if (!(delta_h >= 0.0)) throw std::invalid_argument("extract_active_sets: delta_h must be >= 0");
  const int ne = mesh.num_elements();
  ActiveSets sets;
  sets.delta_h = delta_h;
  sets.adjacency = adjacency;
  sets.strip_rings = delta_h > 0.0 ? static_cast<int>(std::ceil(delta_h / mesh.h_max - 1e-12)) : 0;
  sets.dilation_rings = dilation_rings_for(mesh, delta_h, adjacency);

  sets.in_cut_mesh.assign(ne, 0);
  sets.in_boundary.assign(ne, 0);
  for (int e = 0; e < ne; ++e) {
    sets.in_cut_mesh[e] = cut.inside_area[e] > 0.0;
    sets.in_boundary[e] = cut.has_interface(e);
  }
  sets.in_active = detail::dilate(mesh, sets.in_cut_mesh, sets.dilation_rings, adjacency);
  sets.in_strip = detail::dilate(mesh, sets.in_boundary, sets.dilation_rings, adjacency);
  for (int e = 0; e < ne; ++e) sets.in_strip[e] = sets.in_strip[e] && sets.in_active[e];

  sets.t_active = detail::flags_to_list(sets.in_active);
  sets.t_cut_mesh = detail::flags_to_list(sets.in_cut_mesh);
  sets.t_boundary = detail::flags_to_list(sets.in_boundary);
  sets.strip_pm = detail::flags_to_list(sets.in_strip);

  for (int f = 0; f < mesh.num_facets(); ++f) {
    const auto [a, b] = mesh.facet_to_elements[f];
    if (b < 0) continue;
    if (sets.in_active[a] && sets.in_active[b] &&
        (sets.in_strip[a] || sets.in_strip[b] || !sets.in_cut_mesh[a] || !sets.in_cut_mesh[b]))
      sets.facets_velocity_gp.push_back(f);
    if (sets.in_cut_mesh[a] && sets.in_cut_mesh[b] && (sets.in_boundary[a] || sets.in_boundary[b]))
      sets.facets_pressure_gp.push_back(f);
  }
  return sets;
}

/// VTK ASCII dump of the inside sub-triangles (cell type 5) and interface segments (type 3).
inline void write_cut_vtk(std::ostream& os, const CutDecomposition& cut) {
  const auto& mesh = *cut.mesh;
  std::vector<std::array<Point2, 3>> tris;
  std::vector<InterfaceSegment> segs;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    if (cut.kind[e] == ElementKind::Inside) tris.push_back(mesh.corners(e));
    if (cut.piece_slot[e] >= 0) {
      const auto& p = cut.pieces[cut.piece_slot[e]];
      if (cut.kind[e] == ElementKind::Cut) tris.insert(tris.end(), p.inside_parts.begin(), p.inside_parts.end());
      segs.insert(segs.end(), p.segments.begin(), p.segments.end());
    }
  }
  const std::size_t npts = 3 * tris.size() + 2 * segs.size();
  os << "# vtk DataFile Version 3.0\ncutstokes cut geometry t=" << cut.time
     << "\nASCII\nDATASET UNSTRUCTURED_GRID\nPOINTS " << npts << " double\n";
  os.precision(17);
  for (const auto& t : tris)
    for (const auto& p : t) os << p.x << ' ' << p.y << " 0\n";
  for (const auto& s : segs) os << s.a.x << ' ' << s.a.y << " 0\n" << s.b.x << ' ' << s.b.y << " 0\n";
  const std::size_t ncells = tris.size() + segs.size();
  os << "CELLS " << ncells << ' ' << 4 * tris.size() + 3 * segs.size() << '\n';
  std::size_t id = 0;
  for (std::size_t i = 0; i < tris.size(); ++i, id += 3) os << "3 " << id << ' ' << id + 1 << ' ' << id + 2 << '\n';
  for (std::size_t i = 0; i < segs.size(); ++i, id += 2) os << "2 " << id << ' ' << id + 1 << '\n';
  os << "CELL_TYPES " << ncells << '\n';
  for (std::size_t i = 0; i < tris.size(); ++i) os << "5\n";
  for (std::size_t i = 0; i < segs.size(); ++i) os << "3\n";
}

}  // namespace cutstokes
