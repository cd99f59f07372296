#include "meshgrad/apps/param.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <numbers>
#include <sstream>
#include <unordered_map>

namespace meshgrad {

SymmetricDirichlet::SymmetricDirichlet(const Mesh& mesh) : mesh_(&mesh) {
  const auto& p = mesh.positions();
  rest_inv_.resize(mesh.num_faces());
  area_.resize(mesh.num_faces());
  for (Index f = 0; f < mesh.num_faces(); ++f) {
    const auto& [a, b, c] = mesh.faces()[f];
    const Eigen::Vector3d e1 = p[b] - p[a];
    const Eigen::Vector3d e2 = p[c] - p[a];
    const double l1 = e1.norm();
    const double twice_area = e1.cross(e2).norm();
    if (!(l1 > 0) || !(twice_area > 1e-14 * l1 * e2.norm())) {
      throw ProblemError("face " + std::to_string(f) + " is degenerate");
    }
    // rest frame: e1 along the x axis
    SmallMat<double, 2, 2> r;
    r(0, 0) = l1;
    r(0, 1) = e1.dot(e2) / l1;
    r(1, 0) = 0.0;
    r(1, 1) = twice_area / l1;
    const double det = r(0, 0) * r(1, 1);
    SmallMat<double, 2, 2> inv;
    inv(0, 0) = r(1, 1) / det;
    inv(0, 1) = -r(0, 1) / det;
    inv(1, 0) = 0.0;
    inv(1, 1) = r(0, 0) / det;
    rest_inv_[f] = inv;
    area_[f] = 0.5 * twice_area;
  }
}

double SymmetricDirichlet::energy(const Eigen::VectorXd& flat_uv) const {
  double total = 0.0;
  for (Index f = 0; f < mesh_->num_faces(); ++f) {
    const auto& v = mesh_->faces()[f];
    auto at = [&](Index i) { return SmallVec2<double>::from(Eigen::Vector2d(flat_uv.segment<2>(2 * i))); };
    total += face_energy<double>(f, at(v[0]), at(v[1]), at(v[2]));
  }
  return total;
}

double SymmetricDirichlet::energy(const std::vector<Eigen::Vector2d>& uv) const {
  return energy(flatten(uv));
}

double SymmetricDirichlet::min_det(const Eigen::VectorXd& flat_uv) const {
  double lo = std::numeric_limits<double>::infinity();
  for (Index f = 0; f < mesh_->num_faces(); ++f) {
    const auto& v = mesh_->faces()[f];
    const Eigen::Vector2d e1 = flat_uv.segment<2>(2 * v[1]) - flat_uv.segment<2>(2 * v[0]);
    const Eigen::Vector2d e2 = flat_uv.segment<2>(2 * v[2]) - flat_uv.segment<2>(2 * v[0]);
    const auto& r = rest_inv_[f];
    const double det = (e1.x() * e2.y() - e1.y() * e2.x()) * (r(0, 0) * r(1, 1) - r(0, 1) * r(1, 0));
    lo = std::min(lo, det);
  }
  return lo;
}

std::vector<Index> SymmetricDirichlet::flipped_faces(const Eigen::VectorXd& flat_uv) const {
  std::vector<Index> out;
  for (Index f = 0; f < mesh_->num_faces(); ++f) {
    const auto& v = mesh_->faces()[f];
    const Eigen::Vector2d e1 = flat_uv.segment<2>(2 * v[1]) - flat_uv.segment<2>(2 * v[0]);
    const Eigen::Vector2d e2 = flat_uv.segment<2>(2 * v[2]) - flat_uv.segment<2>(2 * v[0]);
    if (!(e1.x() * e2.y() - e1.y() * e2.x() > 0)) out.push_back(f);
  }
  return out;
}

void SymmetricDirichlet::require_flip_free(const Eigen::VectorXd& flat_uv) const {
  const auto bad = flipped_faces(flat_uv);
  if (bad.empty()) return;
  std::ostringstream msg;
  msg << "initial parameterization has " << bad.size() << " flipped face(s): ";
  for (std::size_t i = 0; i < bad.size() && i < 10; ++i) msg << (i ? ", " : "") << "face " << bad[i];
  if (bad.size() > 10) msg << ", ...";
  throw ProblemError(msg.str());
}

double SymmetricDirichlet::total_area() const {
  double a = 0.0;
  for (double x : area_) a += x;
  return a;
}

void SymmetricDirichlet::add_to(Problem<2>& problem) const {
  problem.add_term<Op::FV>([this](const ElementHandle& f, std::span<const Index>, const auto& x) {
    return face_energy(f.index, x[0], x[1], x[2]);
  });
}

std::vector<Index> boundary_loop(const Mesh& mesh) {
  const auto boundary = mesh.boundary_edges();
  if (boundary.empty()) throw MeshError("mesh has no boundary");
  std::vector<char> is_boundary(mesh.num_edges(), 0);
  for (Index e : boundary) is_boundary[e] = 1;

  std::unordered_map<Index, Index> next;
  for (const auto& f : mesh.faces()) {
    for (int k = 0; k < 3; ++k) {
      const Index u = f[k], v = f[(k + 1) % 3];
      const Index e = mesh.find_edge(u, v);
      if (e >= 0 && is_boundary[e]) {
        if (!next.emplace(u, v).second) throw MeshError("boundary is not a simple loop at vertex " + std::to_string(u));
      }
    }
  }
  Index start = next.begin()->first;
  for (const auto& [u, v] : next) start = std::min(start, u);

  std::vector<Index> loop{start};
  for (Index v = next.at(start); v != start; v = next.at(v)) {
    loop.push_back(v);
    if (loop.size() > next.size()) throw MeshError("boundary is not a simple loop");
  }
  if (loop.size() != next.size()) throw MeshError("mesh has more than one boundary loop");
  return loop;
}

std::vector<Eigen::Vector2d> tutte_embedding(const Mesh& mesh) {
  const auto loop = boundary_loop(mesh);
  const auto& p = mesh.positions();
  const Index n = mesh.num_vertices();
  std::vector<Eigen::Vector2d> uv(n, Eigen::Vector2d::Zero());

  std::vector<double> arc(loop.size() + 1, 0.0);
  for (std::size_t i = 0; i < loop.size(); ++i) {
    arc[i + 1] = arc[i] + (p[loop[(i + 1) % loop.size()]] - p[loop[i]]).norm();
  }
  std::vector<Index> slot(n, -1);
  for (std::size_t i = 0; i < loop.size(); ++i) {
    const double t = 2.0 * std::numbers::pi * arc[i] / arc.back();
    uv[loop[i]] = {std::cos(t), std::sin(t)};
    slot[loop[i]] = -2;
  }

  Index interior = 0;
  for (Index v = 0; v < n; ++v) {
    if (slot[v] == -1) slot[v] = interior++;
  }
  if (interior == 0) return uv;

  std::vector<Eigen::Triplet<double>> triplets;
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(interior, 2);
  for (Index v = 0; v < n; ++v) {
    if (slot[v] < 0) continue;
    const auto ring = query(mesh, Op::VV, {ElementKind::Vertex, v});
    triplets.emplace_back(slot[v], slot[v], static_cast<double>(ring.size()));
    for (const auto& h : ring) {
      if (slot[h.index] >= 0) {
        triplets.emplace_back(slot[v], slot[h.index], -1.0);
      } else {
        rhs.row(slot[v]) += uv[h.index].transpose();
      }
    }
  }
  Eigen::SparseMatrix<double> lap(interior, interior);
  lap.setFromTriplets(triplets.begin(), triplets.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(lap);
  if (solver.info() != Eigen::Success) throw MeshError("Tutte system factorization failed");
  const Eigen::MatrixXd sol = solver.solve(rhs);
  for (Index v = 0; v < n; ++v) {
    if (slot[v] >= 0) uv[v] = sol.row(slot[v]).transpose();
  }
  return uv;
}

std::vector<Eigen::Vector2d> planar_projection(const Mesh& mesh) {
  const auto& p = mesh.positions();
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& q : p) centroid += q;
  centroid /= static_cast<double>(p.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& q : p) cov += (q - centroid) * (q - centroid).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  const Eigen::Vector3d u = eig.eigenvectors().col(2);
  Eigen::Vector3d w = eig.eigenvectors().col(1);

  auto project = [&](const Eigen::Vector3d& axis) {
    std::vector<Eigen::Vector2d> uv(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) uv[i] = {(p[i] - centroid).dot(u), (p[i] - centroid).dot(axis)};
    return uv;
  };
  auto uv = project(w);
  Index positive = 0;
  for (const auto& f : mesh.faces()) {
    const Eigen::Vector2d e1 = uv[f[1]] - uv[f[0]];
    const Eigen::Vector2d e2 = uv[f[2]] - uv[f[0]];
    if (e1.x() * e2.y() - e1.y() * e2.x() > 0) ++positive;
  }
  if (2 * positive < mesh.num_faces()) uv = project(-w);
  return uv;
}

Eigen::VectorXd flatten(const std::vector<Eigen::Vector2d>& uv) {
  Eigen::VectorXd flat(2 * uv.size());
  for (std::size_t i = 0; i < uv.size(); ++i) flat.segment<2>(2 * i) = uv[i];
  return flat;
}

std::vector<Eigen::Vector2d> unflatten2(const Eigen::VectorXd& flat) {
  std::vector<Eigen::Vector2d> uv(flat.size() / 2);
  for (std::size_t i = 0; i < uv.size(); ++i) uv[i] = flat.segment<2>(2 * i);
  return uv;
}

ParamResult parameterize(const Mesh& mesh, const ParamConfig& config,
                         const std::function<void(const ProblemBase&)>& on_accept) {
  const SymmetricDirichlet energy(mesh);
  const auto init = config.init == ParamInit::Tutte ? tutte_embedding(mesh) : planar_projection(mesh);
  const Eigen::VectorXd x0 = flatten(init);
  energy.require_flip_free(x0);

  Problem<2> problem(mesh, EvalMode::GradientAndHessian);
  energy.add_to(problem);
  problem.x() = x0;

  SolverConfig cfg = config.solver;
  if (on_accept) {
    auto chained = cfg.on_accept;
    cfg.on_accept = [&, chained](ProblemBase& p) {
      if (chained) chained(p);
      on_accept(p);
    };
  }
  ParamResult result;
  result.report = config.matrix_free ? newton_cg_solve(problem, cfg) : newton_solve(problem, cfg);
  result.uv = unflatten2(problem.x());
  return result;
}

Mesh bumpy_disk(int n, double amplitude) {
  const Mesh grid = generate_grid(n, 1.0 / (n - 1));
  auto positions = grid.positions();
  for (auto& q : positions) {
    q.z() = amplitude * std::sin(2.0 * std::numbers::pi * q.x()) * std::cos(std::numbers::pi * q.y());
  }
  return Mesh(std::move(positions), grid.faces());
}

}  // namespace meshgrad
