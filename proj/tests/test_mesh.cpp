#include "doctest.h"
#include "oracles.hpp"

#include "meshgrad/mesh.hpp"
#include "meshgrad/mesh_io.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

using namespace meshgrad;

namespace {

Mesh from_obj_text(const std::string& text) {
  std::istringstream in(text);
  return read_obj(in);
}

std::vector<Index> ids(const std::vector<ElementHandle>& hs) {
  std::vector<Index> out;
  for (const auto& h : hs) out.push_back(h.index);
  return out;
}

}  // namespace

TEST_CASE("load_obj single triangle") {
  const Mesh m = from_obj_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n");
  CHECK(m.num_vertices() == 3);
  CHECK(m.num_faces() == 1);
  CHECK(m.num_edges() == 3);
}

TEST_CASE("load_obj ignores texture and normal suffixes") {
  const Mesh m = from_obj_text(
      "# comment\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvn 0 0 1\nf 1/1/1 2/2/1 3//1\n");
  CHECK(m.num_faces() == 1);
  CHECK(m.faces()[0] == std::array<Index, 3>{0, 1, 2});
}

TEST_CASE("load_obj errors") {
  CHECK_THROWS_WITH_AS(from_obj_text(""), doctest::Contains("no faces"), MeshError);
  CHECK_THROWS_WITH_AS(from_obj_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4\n"),
                       doctest::Contains("out of range"), MeshError);
  CHECK_THROWS_WITH_AS(from_obj_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nf 1 2 3 4\n"),
                       doctest::Contains("triang"), MeshError);
  CHECK_THROWS_WITH_AS(from_obj_text("v 0 0 0\nv 1 zero 0\n"), doctest::Contains("line 2"), MeshError);
  CHECK_THROWS_WITH_AS(load_obj("/nonexistent/mesh.obj"), doctest::Contains("/nonexistent/mesh.obj"),
                       MeshError);
}

TEST_CASE("obj round trip") {
  const Mesh m = generate_grid(4, 0.5);
  const auto path = std::filesystem::temp_directory_path() / "meshgrad_roundtrip.obj";
  save_obj(path.string(), m);
  const Mesh r = load_obj(path.string());
  CHECK(r.faces() == m.faces());
  for (Index v = 0; v < m.num_vertices(); ++v) CHECK((r.positions()[v] - m.positions()[v]).norm() < 1e-5);
  std::filesystem::remove(path);
}

TEST_CASE("generate_grid counts") {
  const Mesh g2 = generate_grid(2);
  CHECK(g2.num_vertices() == 4);
  CHECK(g2.num_faces() == 2);
  CHECK(g2.num_edges() == 5);
  const Mesh g10 = generate_grid(10);
  CHECK(g10.num_vertices() == 100);
  CHECK(g10.num_faces() == 162);
  CHECK_THROWS_AS(generate_grid(1), MeshError);
}

TEST_CASE("generate_grid faces are counter-clockwise in the plane") {
  const Mesh g = generate_grid(5);
  for (const auto& f : g.faces()) {
    const Eigen::Vector3d n = (g.positions()[f[1]] - g.positions()[f[0]]).cross(g.positions()[f[2]] - g.positions()[f[0]]);
    CHECK(n.z() > 0);
  }
}

TEST_CASE("generate_icosphere") {
  const Mesh s0 = generate_icosphere(0);
  CHECK(s0.num_vertices() == 12);
  CHECK(s0.num_faces() == 20);
  CHECK(s0.num_edges() == 30);
  const Mesh s1 = generate_icosphere(1);
  CHECK(s1.num_vertices() == 42);
  CHECK(s1.num_faces() == 80);
  for (int s = 0; s <= 3; ++s) {
    const Mesh m = generate_icosphere(s);
    CHECK(m.euler_characteristic() == 2);
    CHECK(m.boundary_edges().empty());
    for (const auto& p : m.positions()) CHECK(p.norm() == doctest::Approx(1.0).epsilon(1e-14));
    // outward winding: the face normal points away from the origin
    for (const auto& f : m.faces()) {
      const auto& p = m.positions();
      CHECK(p[f[0]].dot(p[f[1]].cross(p[f[2]])) > 0);
    }
  }
}

TEST_CASE("query neighborhoods") {
  const Mesh m(std::vector<Eigen::Vector3d>(6, Eigen::Vector3d::Zero()),
               {{1, 2, 3}, {0, 5, 4}, {0, 4, 1}});
  CHECK(ids(query(m, Op::FV, {ElementKind::Face, 0})) == std::vector<Index>{1, 2, 3});
  const Index e05 = m.find_edge(5, 0);
  REQUIRE(e05 >= 0);
  CHECK(ids(query(m, Op::EV, {ElementKind::Edge, e05})) == std::vector<Index>{0, 5});
  CHECK(ids(query(m, Op::V, {ElementKind::Vertex, 3})) == std::vector<Index>{3});
  CHECK(ids(query(m, Op::VF, {ElementKind::Vertex, 0})) == std::vector<Index>{1, 2});
  CHECK_THROWS_AS(query(m, Op::FV, {ElementKind::Vertex, 0}), MeshError);
  CHECK_THROWS_AS(query(m, Op::FV, {ElementKind::Face, 3}), MeshError);
}

TEST_CASE("one-ring of the 3x3 grid center") {
  const Mesh g = generate_grid(3);
  // center vertex 4; the (i,j)-(i+1,j+1) diagonal adds neighbors 0 and 8
  CHECK(ids(query(g, Op::VV, {ElementKind::Vertex, 4})) == std::vector<Index>{0, 1, 3, 5, 7, 8});
  CHECK(ids(query(g, Op::VV, {ElementKind::Vertex, 4})) == oracle::brute_one_ring(g, 4));
}

TEST_CASE("valence cap enforcement") {
  // fan of 40 triangles around vertex 0
  const int k = 40;
  std::vector<Eigen::Vector3d> p(k + 2, Eigen::Vector3d::Zero());
  std::vector<std::array<Index, 3>> faces;
  for (int i = 1; i <= k; ++i) faces.push_back({0, i, i + 1});
  Mesh m(p, faces);
  CHECK_THROWS_WITH_AS(query(m, Op::VV, {ElementKind::Vertex, 0}), doctest::Contains("valence"), MeshError);
  m.set_valence_cap(64);
  CHECK(query(m, Op::VV, {ElementKind::Vertex, 0}).size() == static_cast<std::size_t>(k + 1));
}

TEST_CASE("invalid faces are rejected") {
  std::vector<Eigen::Vector3d> p(3, Eigen::Vector3d::Zero());
  CHECK_THROWS_AS(Mesh(p, {{0, 1, 3}}), MeshError);
  CHECK_THROWS_AS(Mesh(p, {{0, 1, 1}}), MeshError);
  CHECK_THROWS_AS(Mesh(p, {{0, -1, 2}}), MeshError);
}

TEST_CASE("edge derivation is order independent and matches brute force") {
  std::mt19937 rng(11);
  const Mesh base = generate_icosphere(2);
  auto faces = base.faces();
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(faces.begin(), faces.end(), rng);
    for (auto& f : faces) std::rotate(f.begin(), f.begin() + (rng() % 3), f.end());
    const Mesh m(base.positions(), faces);
    CHECK(m.edges() == base.edges());
    const auto brute = oracle::brute_edges(faces);
    REQUIRE(brute.size() == m.edges().size());
    CHECK(std::equal(brute.begin(), brute.end(), m.edges().begin(), [](const auto& a, const auto& b) {
      return a.first == b[0] && a.second == b[1];
    }));
  }
}

TEST_CASE("adjacency tables are consistent") {
  for (const Mesh& m : {generate_grid(7), generate_icosphere(2)}) {
    std::size_t degree_sum = 0;
    for (Index v = 0; v < m.num_vertices(); ++v) {
      const auto ring = m.vertex_vertices(v);
      degree_sum += ring.size();
      CHECK(std::vector<Index>(ring.begin(), ring.end()) == oracle::brute_one_ring(m, v));
      for (Index u : ring) CHECK(m.find_edge(u, v) >= 0);
      for (Index e : m.vertex_edges(v)) CHECK((m.edges()[e][0] == v || m.edges()[e][1] == v));
      for (Index f : m.vertex_faces(v)) CHECK(std::count(m.faces()[f].begin(), m.faces()[f].end(), v) == 1);
    }
    CHECK(degree_sum == 2 * m.edges().size());
  }
}

TEST_CASE("patch partition bounds") {
  // 2 * 22^2 = 968 faces
  const Mesh m = generate_grid(23).with_patch_target(512);
  const auto& pa = m.patches();
  CHECK(pa.num_patches() >= 2);
  CHECK(pa.num_patches() <= 3);
  std::vector<int> seen(m.num_faces(), 0);
  for (int p = 0; p < pa.num_patches(); ++p) {
    const auto faces = pa.elements(ElementKind::Face, p);
    CHECK(faces.size() <= 1024u);
    for (Index f : faces) {
      ++seen[f];
      CHECK(pa.patch_of_face[f] == p);
    }
  }
  CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));

  const Mesh small(std::vector<Eigen::Vector3d>(5, Eigen::Vector3d::Zero()), {{0, 1, 2}, {0, 2, 3}, {0, 3, 4}});
  CHECK(small.patches().num_patches() == 1);
}

TEST_CASE("patch partition of 1024 faces gives two patches") {
  // 2 x 256 quad strip, exactly 1024 faces
  std::vector<Eigen::Vector3d> p;
  std::vector<std::array<Index, 3>> faces;
  const int cols = 257;  // 256 quads per row, 2 rows of quads
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < cols; ++j) p.emplace_back(j, i, 0);
  }
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < cols - 1; ++j) {
      const Index a = i * cols + j;
      faces.push_back({a, a + 1, a + cols + 1});
      faces.push_back({a, a + cols + 1, a + cols});
    }
  }
  const Mesh m(p, faces);
  REQUIRE(m.num_faces() == 1024);
  const PatchAssignment pa = partition_patches(m, 512);
  CHECK(pa.num_patches() == 2);
  for (int k = 0; k < pa.num_patches(); ++k) CHECK(pa.elements(ElementKind::Face, k).size() <= 1024u);
}

TEST_CASE("patch partition of disconnected mesh is total") {
  std::vector<Eigen::Vector3d> p(6, Eigen::Vector3d::Zero());
  const Mesh m(p, {{0, 1, 2}, {3, 4, 5}});
  const PatchAssignment pa = partition_patches(m, 512);
  std::vector<Index> all;
  for (int k = 0; k < pa.num_patches(); ++k) {
    for (Index f : pa.elements(ElementKind::Face, k)) all.push_back(f);
  }
  std::sort(all.begin(), all.end());
  CHECK(all == std::vector<Index>{0, 1});
  // every vertex and edge belongs to exactly one patch as well
  for (ElementKind kind : {ElementKind::Vertex, ElementKind::Edge}) {
    std::size_t total = 0;
    for (int k = 0; k < pa.num_patches(); ++k) total += pa.elements(kind, k).size();
    CHECK(total == static_cast<std::size_t>(m.num_elements(kind)));
  }
}

TEST_CASE("patches are face connected on a grid") {
  const Mesh m = generate_grid(40).with_patch_target(64);
  const auto& pa = m.patches();
  for (int k = 0; k < pa.num_patches(); ++k) {
    const auto faces = pa.elements(ElementKind::Face, k);
    std::vector<Index> stack{faces[0]};
    std::set<Index> reached{faces[0]};
    while (!stack.empty()) {
      const Index f = stack.back();
      stack.pop_back();
      for (int c = 0; c < 3; ++c) {
        const Index e = m.find_edge(m.faces()[f][c], m.faces()[f][(c + 1) % 3]);
        for (Index g : m.edge_faces(e)) {
          if (pa.patch_of_face[g] == k && reached.insert(g).second) stack.push_back(g);
        }
      }
    }
    CHECK(reached.size() == faces.size());
    CHECK(faces.size() <= 128u);
  }
}

TEST_CASE("loose edges") {
  const Mesh m({Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitX()}, {}, {{1, 0}});
  CHECK(m.num_edges() == 1);
  CHECK(m.edges()[0] == std::array<Index, 2>{0, 1});
  CHECK(m.patches().num_patches() >= 1);
}
