#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace meshgrad {

using Index = std::int32_t;

class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ElementKind { Vertex, Edge, Face };

struct ElementHandle {
  ElementKind kind = ElementKind::Vertex;
  Index index = 0;

  friend bool operator==(const ElementHandle&, const ElementHandle&) = default;
};

/// Neighborhood access pattern of an energy term, named source-to-target:
/// FV visits the vertices of a face, VE the edges around a vertex, V the
/// vertex itself.
enum class Op { FV, EV, VV, VF, VE, V };

ElementKind source_kind(Op op);
ElementKind target_kind(Op op);
const char* to_string(Op op);
const char* to_string(ElementKind kind);

/// Faces are grouped into face-connected patches; every element kind gets a
/// patch-major evaluation order derived from the face patches.
struct PatchAssignment {
  int target_faces = 0;
  std::vector<Index> patch_of_face;

  // For each element kind: elements listed patch by patch, with CSR offsets.
  std::array<std::vector<Index>, 3> order;
  std::array<std::vector<Index>, 3> offsets;

  int num_patches() const { return static_cast<int>(offsets[0].size()) - 1; }

  std::span<const Index> elements(ElementKind kind, int patch) const {
    const auto k = static_cast<std::size_t>(kind);
    return {order[k].data() + offsets[k][patch], order[k].data() + offsets[k][patch + 1]};
  }
};

inline constexpr int kDefaultPatchFaces = 512;
inline constexpr int kDefaultValenceCap = 32;

/// Indexed triangle mesh with derived edges and incidence tables.
///
/// The mesh is immutable after construction. Edges are stored once each as
/// (i, j) with i < j, sorted lexicographically, so the edge list does not
/// depend on face order. Loose edges that belong to no face may be supplied
/// through `extra_edges`; they participate in every edge query.
class Mesh {
 public:
  Mesh() = default;
  Mesh(std::vector<Eigen::Vector3d> positions, std::vector<std::array<Index, 3>> faces,
       std::vector<std::array<Index, 2>> extra_edges = {}, int patch_target = kDefaultPatchFaces);

  Index num_vertices() const { return static_cast<Index>(positions_.size()); }
  Index num_edges() const { return static_cast<Index>(edges_.size()); }
  Index num_faces() const { return static_cast<Index>(faces_.size()); }
  Index num_elements(ElementKind kind) const;

  const std::vector<Eigen::Vector3d>& positions() const { return positions_; }
  const std::vector<std::array<Index, 3>>& faces() const { return faces_; }
  const std::vector<std::array<Index, 2>>& edges() const { return edges_; }

  std::span<const Index> vertex_vertices(Index v) const { return row(vv_offsets_, vv_, v); }
  std::span<const Index> vertex_edges(Index v) const { return row(ve_offsets_, ve_, v); }
  std::span<const Index> vertex_faces(Index v) const { return row(vf_offsets_, vf_, v); }
  std::span<const Index> edge_faces(Index e) const { return row(ef_offsets_, ef_, e); }

  /// Edge id of the undirected pair (a, b), or -1.
  Index find_edge(Index a, Index b) const;

  const PatchAssignment& patches() const { return patches_; }
  /// Copy of this mesh with patches rebuilt for a different target size.
  Mesh with_patch_target(int target_faces) const;

  int valence_cap() const { return valence_cap_; }
  void set_valence_cap(int cap);

  /// Boundary edges are incident to exactly one face.
  std::vector<Index> boundary_edges() const;
  int euler_characteristic() const { return num_vertices() - num_edges() + num_faces(); }

 private:
  static std::span<const Index> row(const std::vector<Index>& offsets,
                                    const std::vector<Index>& data, Index i) {
    return {data.data() + offsets[i], data.data() + offsets[i + 1]};
  }
  void build_topology(std::vector<std::array<Index, 2>> extra_edges);

  std::vector<Eigen::Vector3d> positions_;
  std::vector<std::array<Index, 3>> faces_;
  std::vector<std::array<Index, 2>> edges_;
  std::vector<Index> vv_offsets_, vv_;
  std::vector<Index> ve_offsets_, ve_;
  std::vector<Index> vf_offsets_, vf_;
  std::vector<Index> ef_offsets_, ef_;
  PatchAssignment patches_;
  int valence_cap_ = kDefaultValenceCap;
};

/// Ordered neighborhood of `handle` under `op`.
///
/// FV keeps the stored winding, EV returns (i, j) with i < j, and the
/// vertex-sourced queries return ids sorted ascending. Throws MeshError when
/// the handle kind does not match the op or a one-ring exceeds the valence cap.
std::vector<ElementHandle> query(const Mesh& mesh, Op op, ElementHandle handle);

/// Greedy breadth-first patching over the face adjacency graph.
///
/// Seeds at the lowest unassigned face and closes a patch once it holds
/// `target_faces` faces; undersized leftovers are merged into a neighboring
/// patch when the result stays within 2 * target_faces.
PatchAssignment partition_patches(const Mesh& mesh, int target_faces);

/// n x n vertex grid in the z = 0 plane, vertex (i, j) at index i * n + j and
/// position (j, i, 0) * spacing. Each quad is split along its
/// (i, j)-(i+1, j+1) diagonal.
Mesh generate_grid(int n, double spacing = 1.0);

/// Subdivided icosahedron projected onto the unit sphere, outward winding.
Mesh generate_icosphere(int subdivisions);

}  // namespace meshgrad
