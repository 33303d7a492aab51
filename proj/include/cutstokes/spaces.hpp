#pragma once

#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cutstokes/geometry.hpp"
#include "cutstokes/lagrange.hpp"
#include "cutstokes/mesh.hpp"

namespace cutstokes {

/// Raised when a history DOF needed on the new physical domain was not active at the
/// previous step, i.e. the extension strip was too narrow.
class ContainmentError : public std::runtime_error {
 public:
  ContainmentError(const std::string& what, int missing) : std::runtime_error(what), missing_(missing) {}
  int missing_nodes() const { return missing_; }

 private:
  int missing_;
};

/// Continuous P_k Lagrange space restricted to a subset of background elements.
///
/// Nodes are identified by a key on the fixed background mesh (vertex, edge
/// position, or element interior), so layouts built from different element sets
/// agree on every shared node. Vector-valued spaces interleave components:
/// dof = components * node + component.
struct DofLayout {
  const BackgroundMesh* mesh = nullptr;
  int order = 1;
  int components = 1;
  int local_size = 0;
  std::vector<char> support;
  std::vector<int> key_to_node;
  std::vector<int> node_to_key;
  std::vector<Point2> node_points;
  std::vector<int> element_nodes;

  int num_nodes() const { return static_cast<int>(node_to_key.size()); }
  int num_dofs() const { return components * num_nodes(); }
  int dof(int node, int component) const { return components * node + component; }
  bool supports(int element) const { return element >= 0 && element < static_cast<int>(support.size()) && support[element]; }

  std::span<const int> nodes_of(int element) const {
    if (!supports(element)) throw std::out_of_range("DofLayout: element " + std::to_string(element) + " not in support");
    return {element_nodes.data() + static_cast<std::size_t>(element) * local_size, static_cast<std::size_t>(local_size)};
  }

  bool operator==(const DofLayout& o) const {
    return order == o.order && components == o.components && support == o.support && node_to_key == o.node_to_key &&
           element_nodes == o.element_nodes;
  }
};

using LayoutPtr = std::shared_ptr<const DofLayout>;

/// Taylor-Hood pair: vector P_k on the active mesh, scalar P_{k-1} on the cut mesh.
struct TaylorHoodLayout {
  int k = 2;
  LayoutPtr velocity;
  LayoutPtr pressure;
};

struct FieldVector {
  LayoutPtr layout;
  Eigen::VectorXd coefficients;

  FieldVector() = default;
  explicit FieldVector(LayoutPtr l) : layout(std::move(l)), coefficients(Eigen::VectorXd::Zero(layout->num_dofs())) {}
  FieldVector(LayoutPtr l, Eigen::VectorXd c) : layout(std::move(l)), coefficients(std::move(c)) {
    if (coefficients.size() != layout->num_dofs()) throw std::invalid_argument("FieldVector: size does not match layout");
  }
};

namespace detail {

inline int num_node_keys(const BackgroundMesh& mesh, int order) {
  const int interior = (order - 1) * (order - 2) / 2;
  return mesh.num_vertices() + mesh.num_facets() * (order - 1) + mesh.num_elements() * interior;
}

/// Background-mesh keys of the local lattice nodes of `element`.
inline void element_node_keys(const BackgroundMesh& mesh, int order, int element, std::span<int> out) {
  const auto& basis = LagrangeBasis::get(order);
  const auto& tri = mesh.triangles[element];
  const int nv = mesh.num_vertices(), nf = mesh.num_facets();
  int interior = 0;
  for (int i = 0; i < basis.size(); ++i) {
    const auto& a = basis.lattice()[i];
    const int zeros = (a[0] == 0) + (a[1] == 0) + (a[2] == 0);
    if (zeros == 2) {
      const int local = a[0] != 0 ? 0 : (a[1] != 0 ? 1 : 2);
      out[i] = tri[local];
    } else if (zeros == 1) {
      const int z = a[0] == 0 ? 0 : (a[1] == 0 ? 1 : 2);
      const int p = (z + 1) % 3, q = (z + 2) % 3;
      const int f = mesh.element_to_facets[element][z];
      const int offset = mesh.facets[f][0] == tri[p] ? a[q] : a[p];
      out[i] = nv + f * (order - 1) + offset - 1;
    } else {
      const int nint = (order - 1) * (order - 2) / 2;
      out[i] = nv + nf * (order - 1) + element * nint + interior++;
    }
  }
}

}  // namespace detail

/// Scalar (components = 1) or vector Lagrange space of `order` on the flagged elements.
inline LayoutPtr build_space(const BackgroundMesh& mesh, const std::vector<char>& support, int order, int components) {
  if (static_cast<int>(support.size()) != mesh.num_elements())
    throw std::invalid_argument("build_space: support flags do not match the mesh");
  const auto& basis = LagrangeBasis::get(order);
  auto layout = std::make_shared<DofLayout>();
  layout->mesh = &mesh;
  layout->order = order;
  layout->components = components;
  layout->local_size = basis.size();
  layout->support = support;
  layout->key_to_node.assign(detail::num_node_keys(mesh, order), -1);
  layout->element_nodes.assign(static_cast<std::size_t>(mesh.num_elements()) * basis.size(), -1);
  std::vector<int> keys(basis.size());
  for (int e = 0; e < mesh.num_elements(); ++e) {
    if (!support[e]) continue;
    detail::element_node_keys(mesh, order, e, keys);
    auto c = mesh.corners(e);
    for (int i = 0; i < basis.size(); ++i) {
      int& node = layout->key_to_node[keys[i]];
      if (node < 0) {
        node = layout->num_nodes();
        layout->node_to_key.push_back(keys[i]);
        const auto& a = basis.lattice()[i];
        layout->node_points.push_back((double(a[0]) / order) * c[0] + (double(a[1]) / order) * c[1] +
                                      (double(a[2]) / order) * c[2]);
      }
      layout->element_nodes[static_cast<std::size_t>(e) * basis.size() + i] = node;
    }
  }
  return layout;
}

inline TaylorHoodLayout build_layout(const BackgroundMesh& mesh, const ActiveSets& active, int k) {
  if (k < 2) throw std::invalid_argument("build_layout: Taylor-Hood elements need k >= 2");
  TaylorHoodLayout th;
  th.k = k;
  th.velocity = build_space(mesh, active.in_active, k, 2);
  th.pressure = build_space(mesh, active.in_cut_mesh, k - 1, 1);
  return th;
}

/// Shape functions of one element evaluated at a physical point; the point may lie
/// outside the element (canonical polynomial extension).
struct BasisValues {
  LocalVector values;
  LocalGradients gradients;  // physical
};

inline void evaluate_at_physical(const LagrangeBasis& basis, const AffineMap& map, const Point2& x, BasisValues& out,
                                 bool with_gradients = true) {
  const Point2 ref = map.to_reference(x);
  out.values.resize(basis.size());
  basis.values(ref, out.values);
  if (with_gradients) {
    LocalGradients g(basis.size(), 2);
    basis.gradients(ref, g);
    out.gradients.noalias() = g * map.inverse;
  }
}

/// Values and physical gradients of all local shape functions at a reference point.
inline BasisValues evaluate_basis(const DofLayout& layout, int element, const Point2& reference_point) {
  if (!layout.supports(element)) throw std::out_of_range("evaluate_basis: element outside the layout support");
  const auto& basis = LagrangeBasis::get(layout.order);
  const auto map = AffineMap::of(*layout.mesh, element);
  BasisValues out;
  out.values.resize(basis.size());
  basis.values(reference_point, out.values);
  LocalGradients g(basis.size(), 2);
  basis.gradients(reference_point, g);
  out.gradients.noalias() = g * map.inverse;
  return out;
}

/// Pointwise Lagrange interpolation of a vector field into a two-component layout.
inline FieldVector interpolate(LayoutPtr layout, const std::function<Eigen::Vector2d(const Point2&)>& f) {
  if (layout->components != 2) throw std::invalid_argument("interpolate: vector field needs a two-component layout");
  FieldVector out(layout);
  for (int n = 0; n < layout->num_nodes(); ++n) {
    const Eigen::Vector2d v = f(layout->node_points[n]);
    out.coefficients[layout->dof(n, 0)] = v[0];
    out.coefficients[layout->dof(n, 1)] = v[1];
  }
  return out;
}

inline FieldVector interpolate_scalar(LayoutPtr layout, const std::function<double(const Point2&)>& f) {
  if (layout->components != 1) throw std::invalid_argument("interpolate_scalar: layout must be scalar");
  FieldVector out(layout);
  for (int n = 0; n < layout->num_nodes(); ++n) out.coefficients[n] = f(layout->node_points[n]);
  return out;
}

/// Nodes of `next` on flagged elements that have no counterpart in `previous`.
inline int count_missing_nodes(const DofLayout& previous, const DofLayout& next, const std::vector<char>& required) {
  std::vector<char> seen(next.num_nodes(), 0);
  int missing = 0;
  for (int e = 0; e < static_cast<int>(required.size()); ++e) {
    if (!required[e]) continue;
    for (int n : next.nodes_of(e)) {
      if (seen[n]) continue;
      seen[n] = 1;
      if (previous.key_to_node[next.node_to_key[n]] < 0) ++missing;
    }
  }
  return missing;
}

/// Copies coefficients by node key. Nodes new to `next` start at zero; nodes on
/// `required` elements must exist in the previous layout.
inline FieldVector transfer(const FieldVector& previous, LayoutPtr next, const std::vector<char>* required = nullptr) {
  const auto& prev = *previous.layout;
  if (prev.order != next->order || prev.components != next->components || prev.mesh != next->mesh)
    throw std::invalid_argument("transfer: layouts describe different spaces");
  if (required != nullptr) {
    const int missing = count_missing_nodes(prev, *next, *required);
    if (missing > 0)
      throw ContainmentError("containment violation: " + std::to_string(missing) +
                                 " nodes on the new physical domain were inactive at the previous step",
                             missing);
  }
  FieldVector out(next);
  const int c = next->components;
  for (int n = 0; n < next->num_nodes(); ++n) {
    const int old = prev.key_to_node[next->node_to_key[n]];
    if (old < 0) continue;
    for (int k = 0; k < c; ++k) out.coefficients[c * n + k] = previous.coefficients[c * old + k];
  }
  return out;
}

/// Value of a vector field of `field` at physical point x, using element `element`'s polynomial.
inline Eigen::Vector2d field_value(const FieldVector& field, int element, const Point2& x) {
  const auto& layout = *field.layout;
  const auto& basis = LagrangeBasis::get(layout.order);
  BasisValues bv;
  evaluate_at_physical(basis, AffineMap::of(*layout.mesh, element), x, bv, false);
  Eigen::Vector2d v = Eigen::Vector2d::Zero();
  auto nodes = layout.nodes_of(element);
  for (int i = 0; i < layout.local_size; ++i)
    for (int k = 0; k < layout.components; ++k) v[k] += bv.values[i] * field.coefficients[layout.dof(nodes[i], k)];
  return v;
}

}  // namespace cutstokes
