#include "meshgrad/apps/sphere.hpp"

#include <cmath>
#include <sstream>

namespace meshgrad {

std::vector<Eigen::Vector3d> normalize_to_sphere(const Mesh& mesh) {
  auto p = mesh.positions();
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& q : p) centroid += q;
  centroid /= static_cast<double>(p.size());
  for (Index v = 0; v < mesh.num_vertices(); ++v) {
    const Eigen::Vector3d d = p[v] - centroid;
    if (!(d.norm() > 0)) throw MeshError("vertex " + std::to_string(v) + " lies at the centroid");
    p[v] = d.normalized();
  }
  return p;
}

SphericalParameterization::SphericalParameterization(const Mesh& mesh)
    : mesh_(&mesh), problem_(mesh, EvalMode::GradientAndHessian) {
  if (mesh.euler_characteristic() != 2 || !mesh.boundary_edges().empty()) {
    throw MeshError("spherical parameterization needs a closed genus-0 mesh (Euler characteristic " +
                    std::to_string(mesh.euler_characteristic()) + ")");
  }
  base_ = normalize_to_sphere(mesh);
  const auto bad = non_positive_faces();
  if (!bad.empty()) {
    std::ostringstream msg;
    msg << "infeasible spherical initialization; non-positive determinant on faces";
    for (std::size_t i = 0; i < bad.size() && i < 20; ++i) msg << ' ' << bad[i];
    if (bad.size() > 20) msg << " ...";
    throw ProblemError(msg.str());
  }
  rebuild_bases();

  problem_.add_term<Op::FV>([this](const ElementHandle&, std::span<const Index> verts, const auto& x) {
    return face_energy(retract(verts[0], x[0]), retract(verts[1], x[1]), retract(verts[2], x[2]));
  });
  problem_.x().setZero();
}

void SphericalParameterization::rebuild_bases() {
  b1_.resize(base_.size());
  b2_.resize(base_.size());
  for (std::size_t i = 0; i < base_.size(); ++i) {
    const Eigen::Vector3d& s = base_[i];
    Index axis = 0;
    s.cwiseAbs().minCoeff(&axis);
    const Eigen::Vector3d u = s.cross(Eigen::Vector3d::Unit(axis)).normalized();
    b1_[i] = u;
    b2_[i] = s.cross(u);
  }
}

void SphericalParameterization::set_points(std::vector<Eigen::Vector3d> points) {
  if (static_cast<Index>(points.size()) != mesh_->num_vertices()) {
    throw ProblemError("point count does not match vertex count");
  }
  for (auto& p : points) p.normalize();
  base_ = std::move(points);
  rebuild_bases();
  problem_.x().setZero();
}

void SphericalParameterization::rebase() {
  const Eigen::VectorXd& x = problem_.x();
  for (std::size_t i = 0; i < base_.size(); ++i) {
    const auto p = retract<double>(static_cast<Index>(i), {{x[2 * i], x[2 * i + 1]}});
    base_[i] = {p[0], p[1], p[2]};
  }
  rebuild_bases();
  problem_.x().setZero();
}

SolverReport SphericalParameterization::run(const SphereConfig& config,
                                            const std::function<void(const SphericalParameterization&)>& on_accept) {
  SolverConfig cfg = config.solver;
  cfg.max_iters = config.iters;
  auto chained = cfg.on_accept;
  cfg.on_accept = [&, chained](ProblemBase& p) {
    if (chained) chained(p);
    if (on_accept) on_accept(*this);
  };
  problem_.x().setZero();
  return lbfgs_solve(problem_, cfg, [this](ProblemBase&) { rebase(); });
}

double SphericalParameterization::energy() const {
  return problem_.eval_energy_only(Eigen::VectorXd::Zero(2 * base_.size()));
}

double SphericalParameterization::min_det() const {
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& f : mesh_->faces()) {
    lo = std::min(lo, base_[f[0]].dot(base_[f[1]].cross(base_[f[2]])));
  }
  return lo;
}

std::vector<Index> SphericalParameterization::non_positive_faces() const {
  std::vector<Index> out;
  for (Index f = 0; f < mesh_->num_faces(); ++f) {
    const auto& v = mesh_->faces()[f];
    if (!(base_[v[0]].dot(base_[v[1]].cross(base_[v[2]])) > 0)) out.push_back(f);
  }
  return out;
}

double SphericalParameterization::max_norm_error() const {
  double e = 0.0;
  for (const auto& p : base_) e = std::max(e, std::abs(p.norm() - 1.0));
  return e;
}

}  // namespace meshgrad
