#include "meshgrad/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>

namespace meshgrad {

ElementKind source_kind(Op op) {
  switch (op) {
    case Op::FV: return ElementKind::Face;
    case Op::EV: return ElementKind::Edge;
    default: return ElementKind::Vertex;
  }
}

ElementKind target_kind(Op op) {
  switch (op) {
    case Op::VF: return ElementKind::Face;
    case Op::VE: return ElementKind::Edge;
    default: return ElementKind::Vertex;
  }
}

const char* to_string(Op op) {
  switch (op) {
    case Op::FV: return "FV";
    case Op::EV: return "EV";
    case Op::VV: return "VV";
    case Op::VF: return "VF";
    case Op::VE: return "VE";
    case Op::V: return "V";
  }
  return "?";
}

const char* to_string(ElementKind kind) {
  switch (kind) {
    case ElementKind::Vertex: return "vertex";
    case ElementKind::Edge: return "edge";
    case ElementKind::Face: return "face";
  }
  return "?";
}

namespace {

// Builds a CSR table from (row, value) pairs that arrive already sorted by
// value within each row.
template <class Emit>
void build_csr(Index rows, std::vector<Index>& offsets, std::vector<Index>& data, Emit&& emit) {
  offsets.assign(static_cast<std::size_t>(rows) + 1, 0);
  emit([&](Index r, Index) { ++offsets[r + 1]; });
  std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
  data.resize(offsets.back());
  std::vector<Index> cursor(offsets.begin(), offsets.end() - 1);
  emit([&](Index r, Index value) { data[cursor[r]++] = value; });
}

}  // namespace

Mesh::Mesh(std::vector<Eigen::Vector3d> positions, std::vector<std::array<Index, 3>> faces,
           std::vector<std::array<Index, 2>> extra_edges, int patch_target)
    : positions_(std::move(positions)), faces_(std::move(faces)) {
  const Index nv = num_vertices();
  for (std::size_t f = 0; f < faces_.size(); ++f) {
    const auto& t = faces_[f];
    for (Index v : t) {
      if (v < 0 || v >= nv) {
        throw MeshError("face " + std::to_string(f) + " references vertex " + std::to_string(v) +
                        " out of range [0, " + std::to_string(nv) + ")");
      }
    }
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
      throw MeshError("face " + std::to_string(f) + " has repeated vertices");
    }
  }
  for (const auto& e : extra_edges) {
    if (e[0] < 0 || e[0] >= nv || e[1] < 0 || e[1] >= nv || e[0] == e[1]) {
      throw MeshError("invalid loose edge (" + std::to_string(e[0]) + ", " +
                      std::to_string(e[1]) + ")");
    }
  }
  build_topology(std::move(extra_edges));
  patches_ = partition_patches(*this, patch_target);
}

void Mesh::build_topology(std::vector<std::array<Index, 2>> extra_edges) {
  const Index nv = num_vertices();

  edges_ = std::move(extra_edges);
  edges_.reserve(edges_.size() + faces_.size() * 3);
  for (const auto& t : faces_) {
    for (int k = 0; k < 3; ++k) edges_.push_back({t[k], t[(k + 1) % 3]});
  }
  for (auto& e : edges_) {
    if (e[0] > e[1]) std::swap(e[0], e[1]);
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());

  build_csr(nv, ve_offsets_, ve_, [&](auto&& put) {
    for (Index e = 0; e < num_edges(); ++e) {
      put(edges_[e][0], e);
      put(edges_[e][1], e);
    }
  });
  // Lexicographic edge order yields each one-ring already sorted.
  build_csr(nv, vv_offsets_, vv_, [&](auto&& put) {
    for (const auto& e : edges_) {
      put(e[0], e[1]);
      put(e[1], e[0]);
    }
  });
  build_csr(nv, vf_offsets_, vf_, [&](auto&& put) {
    for (Index f = 0; f < num_faces(); ++f) {
      for (Index v : faces_[f]) put(v, f);
    }
  });
  build_csr(num_edges(), ef_offsets_, ef_, [&](auto&& put) {
    for (Index f = 0; f < num_faces(); ++f) {
      const auto& t = faces_[f];
      for (int k = 0; k < 3; ++k) put(find_edge(t[k], t[(k + 1) % 3]), f);
    }
  });
}

Index Mesh::num_elements(ElementKind kind) const {
  switch (kind) {
    case ElementKind::Vertex: return num_vertices();
    case ElementKind::Edge: return num_edges();
    case ElementKind::Face: return num_faces();
  }
  return 0;
}

Index Mesh::find_edge(Index a, Index b) const {
  if (a > b) std::swap(a, b);
  for (Index e : vertex_edges(a)) {
    if (edges_[e][0] == a && edges_[e][1] == b) return e;
  }
  return -1;
}

Mesh Mesh::with_patch_target(int target_faces) const {
  Mesh copy = *this;
  copy.patches_ = partition_patches(copy, target_faces);
  return copy;
}

void Mesh::set_valence_cap(int cap) {
  if (cap < 1) throw MeshError("valence cap must be positive");
  valence_cap_ = cap;
}

std::vector<Index> Mesh::boundary_edges() const {
  std::vector<Index> out;
  for (Index e = 0; e < num_edges(); ++e) {
    if (edge_faces(e).size() == 1) out.push_back(e);
  }
  return out;
}

std::vector<ElementHandle> query(const Mesh& mesh, Op op, ElementHandle handle) {
  if (handle.kind != source_kind(op)) {
    throw MeshError(std::string("op ") + to_string(op) + " expects a " +
                    to_string(source_kind(op)) + " handle, got " + to_string(handle.kind));
  }
  if (handle.index < 0 || handle.index >= mesh.num_elements(handle.kind)) {
    throw MeshError(std::string(to_string(handle.kind)) + " handle " +
                    std::to_string(handle.index) + " out of range");
  }
  auto wrap = [](ElementKind kind, std::span<const Index> ids) {
    std::vector<ElementHandle> out;
    out.reserve(ids.size());
    for (Index i : ids) out.push_back({kind, i});
    return out;
  };
  auto ring = [&](ElementKind kind, std::span<const Index> ids) {
    if (static_cast<int>(ids.size()) > mesh.valence_cap()) {
      throw MeshError("vertex " + std::to_string(handle.index) + " has " +
                      std::to_string(ids.size()) + " neighbors, above the valence cap of " +
                      std::to_string(mesh.valence_cap()));
    }
    return wrap(kind, ids);
  };
  switch (op) {
    case Op::FV: return wrap(ElementKind::Vertex, mesh.faces()[handle.index]);
    case Op::EV: return wrap(ElementKind::Vertex, mesh.edges()[handle.index]);
    case Op::V: return {handle};
    case Op::VV: return ring(ElementKind::Vertex, mesh.vertex_vertices(handle.index));
    case Op::VE: return ring(ElementKind::Edge, mesh.vertex_edges(handle.index));
    case Op::VF: return ring(ElementKind::Face, mesh.vertex_faces(handle.index));
  }
  return {};
}

PatchAssignment partition_patches(const Mesh& mesh, int target_faces) {
  if (target_faces < 1) throw MeshError("patch target must be at least one face");
  const Index nf = mesh.num_faces();

  auto for_each_neighbor = [&](Index f, auto&& fn) {
    const auto& t = mesh.faces()[f];
    for (int k = 0; k < 3; ++k) {
      for (Index g : mesh.edge_faces(mesh.find_edge(t[k], t[(k + 1) % 3]))) {
        if (g != f) fn(g);
      }
    }
  };

  std::vector<Index> patch(nf, -1);
  std::vector<Index> sizes;
  std::deque<Index> queue;
  for (Index seed = 0; seed < nf; ++seed) {
    if (patch[seed] >= 0) continue;
    const auto p = static_cast<Index>(sizes.size());
    sizes.push_back(1);
    patch[seed] = p;
    queue.assign(1, seed);
    while (!queue.empty() && sizes[p] < target_faces) {
      const Index f = queue.front();
      queue.pop_front();
      for_each_neighbor(f, [&](Index g) {
        if (patch[g] < 0 && sizes[p] < target_faces) {
          patch[g] = p;
          ++sizes[p];
          queue.push_back(g);
        }
      });
    }
  }

  // Fold small fragments into the smallest adjacent patch that has room.
  std::vector<Index> label(sizes.size());
  std::iota(label.begin(), label.end(), 0);
  auto find = [&](Index p) {
    while (label[p] != p) p = label[p];
    return p;
  };
  std::vector<std::vector<Index>> members(sizes.size());
  for (Index f = 0; f < nf; ++f) members[patch[f]].push_back(f);
  for (Index p = 0; p < static_cast<Index>(sizes.size()); ++p) {
    if (find(p) != p || 2 * sizes[p] >= target_faces) continue;
    Index best = -1;
    for (Index f : members[p]) {
      for_each_neighbor(f, [&](Index g) {
        const Index q = find(patch[g]);
        if (q == p || sizes[q] + sizes[p] > 2 * target_faces) return;
        if (best < 0 || sizes[q] < sizes[best] || (sizes[q] == sizes[best] && q < best)) best = q;
      });
    }
    if (best >= 0) {
      label[p] = best;
      sizes[best] += sizes[p];
      members[best].insert(members[best].end(), members[p].begin(), members[p].end());
      members[p].clear();
    }
  }

  // Renumber surviving patches by their lowest face.
  PatchAssignment out;
  out.target_faces = target_faces;
  out.patch_of_face.resize(nf);
  std::vector<Index> compact(sizes.size(), -1);
  Index count = 0;
  for (Index f = 0; f < nf; ++f) {
    const Index root = find(patch[f]);
    if (compact[root] < 0) compact[root] = count++;
    out.patch_of_face[f] = compact[root];
  }
  const Index num_patches = std::max<Index>(count, 1);

  // Vertices and edges follow the patch of their lowest incident face.
  auto assign_kind = [&](ElementKind kind, auto&& patch_of) {
    const auto k = static_cast<std::size_t>(kind);
    const Index n = mesh.num_elements(kind);
    std::vector<Index> owner(n);
    auto& offsets = out.offsets[k];
    offsets.assign(static_cast<std::size_t>(num_patches) + 1, 0);
    for (Index i = 0; i < n; ++i) {
      owner[i] = patch_of(i);
      ++offsets[owner[i] + 1];
    }
    std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
    auto& order = out.order[k];
    order.resize(n);
    std::vector<Index> cursor(offsets.begin(), offsets.end() - 1);
    for (Index i = 0; i < n; ++i) order[cursor[owner[i]]++] = i;
  };
  assign_kind(ElementKind::Face, [&](Index f) { return out.patch_of_face[f]; });
  auto vertex_patch = [&](Index v) -> Index {
    const auto vf = mesh.vertex_faces(v);
    return vf.empty() ? 0 : out.patch_of_face[vf.front()];
  };
  assign_kind(ElementKind::Vertex, vertex_patch);
  assign_kind(ElementKind::Edge, [&](Index e) -> Index {
    const auto ef = mesh.edge_faces(e);
    return ef.empty() ? vertex_patch(mesh.edges()[e][0]) : out.patch_of_face[ef.front()];
  });
  return out;
}

Mesh generate_grid(int n, double spacing) {
  if (n < 2) throw MeshError("grid needs at least 2 vertices per side");
  if (!(spacing > 0)) throw MeshError("grid spacing must be positive");
  std::vector<Eigen::Vector3d> positions;
  positions.reserve(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) positions.emplace_back(j * spacing, i * spacing, 0.0);
  }
  std::vector<std::array<Index, 3>> faces;
  faces.reserve(2 * static_cast<std::size_t>(n - 1) * (n - 1));
  for (int i = 0; i + 1 < n; ++i) {
    for (int j = 0; j + 1 < n; ++j) {
      const Index a = i * n + j;
      const Index b = a + 1;
      const Index c = a + n + 1;
      const Index d = a + n;
      faces.push_back({a, b, c});
      faces.push_back({a, c, d});
    }
  }
  return Mesh(std::move(positions), std::move(faces));
}

Mesh generate_icosphere(int subdivisions) {
  if (subdivisions < 0) throw MeshError("subdivision count must be non-negative");
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::Vector3d> positions = {
      {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
      {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  std::vector<std::array<Index, 3>> faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
      {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
      {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (auto& p : positions) p.normalize();

  for (int level = 0; level < subdivisions; ++level) {
    std::map<std::pair<Index, Index>, Index> midpoint;
    auto mid = [&](Index a, Index b) {
      const auto key = std::minmax(a, b);
      auto [it, inserted] = midpoint.try_emplace({key.first, key.second}, 0);
      if (inserted) {
        it->second = static_cast<Index>(positions.size());
        positions.push_back((positions[a] + positions[b]).normalized());
      }
      return it->second;
    };
    std::vector<std::array<Index, 3>> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      const Index ab = mid(f[0], f[1]);
      const Index bc = mid(f[1], f[2]);
      const Index ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }
  return Mesh(std::move(positions), std::move(faces));
}

}  // namespace meshgrad
