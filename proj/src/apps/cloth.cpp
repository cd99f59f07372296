#include "meshgrad/apps/cloth.hpp"

#include <cmath>

namespace meshgrad {

std::vector<Index> grid_top_corners(int n) { return {(n - 1) * n, n * n - 1}; }

std::vector<double> lumped_masses(const Mesh& mesh, double density) {
  std::vector<double> mass(mesh.num_vertices(), 0.0);
  const auto& p = mesh.positions();
  for (const auto& f : mesh.faces()) {
    const double area = 0.5 * (p[f[1]] - p[f[0]]).cross(p[f[2]] - p[f[0]]).norm();
    for (Index v : f) mass[v] += density * area / 3.0;
  }
  return mass;
}

double hanging_spring_length(double k, double rest_length, double mass, double gravity) {
  const double l2 = rest_length * rest_length;
  auto residual = [&](double d) { return 2.0 * k * d * (d * d / l2 - 1.0) - mass * gravity; };
  double lo = rest_length;
  double hi = 2.0 * rest_length;
  while (residual(hi) < 0) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (residual(mid) < 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

ClothSimulation::ClothSimulation(Mesh mesh, ClothParams params)
    : mesh_(std::move(mesh)),
      params_(std::move(params)),
      x_(mesh_.positions()),
      v_(mesh_.num_vertices(), Eigen::Vector3d::Zero()),
      predicted_(x_),
      problem_(mesh_, EvalMode::GradientAndHessian) {
  if (!(params_.h > 0)) throw SolverError("cloth timestep must be positive");
  if (!(params_.k > 0)) throw SolverError("spring stiffness must be positive");
  mass_ = params_.masses ? *params_.masses : lumped_masses(mesh_, params_.mass_density);
  if (static_cast<Index>(mass_.size()) != mesh_.num_vertices()) {
    throw SolverError("mass vector does not match vertex count");
  }
  rest_.resize(mesh_.num_edges());
  for (Index e = 0; e < mesh_.num_edges(); ++e) {
    const auto& [i, j] = mesh_.edges()[e];
    rest_[e] = (x_[i] - x_[j]).norm();
  }
  problem_.set_fixed_vertices(params_.pinned);
  register_terms();
  prepare_step();
}

void ClothSimulation::register_terms() {
  const double h2 = params_.h * params_.h;

  // Inertia: 1/2 m_i |x_i - x~_i|^2
  problem_.add_term<Op::V>([this](const ElementHandle& v, std::span<const Index>, const auto& x) {
    const auto target = SmallVec<double, 3>::from(Eigen::Vector3d(predicted_[v.index]));
    return 0.5 * mass_[v.index] * squared_norm(x[0] - target);
  });

  problem_.add_term<Op::EV>([this, h2](const ElementHandle& e, std::span<const Index>, const auto& x) {
    const double l = rest_[e.index];
    const double l2 = l * l;
    const auto strain = squared_norm(x[0] - x[1]) / l2 - 1.0;
    return h2 * l2 * 0.5 * params_.k * strain * strain;
  });

  // Gravity measured from the predicted position: a constant shift that keeps
  // the potential small near the solution, where round-off would otherwise
  // swamp the last Newton decreases.
  problem_.add_term<Op::V>([this, h2](const ElementHandle& v, std::span<const Index>, const auto& x) {
    const auto g = SmallVec<double, 3>::from(params_.gravity);
    const auto target = SmallVec<double, 3>::from(Eigen::Vector3d(predicted_[v.index]));
    return -h2 * mass_[v.index] * dot(x[0] - target, g);
  });
}

void ClothSimulation::set_state(std::vector<Eigen::Vector3d> positions,
                                std::vector<Eigen::Vector3d> velocities) {
  if (static_cast<Index>(positions.size()) != mesh_.num_vertices() ||
      velocities.size() != positions.size()) {
    throw SolverError("cloth state does not match vertex count");
  }
  x_ = std::move(positions);
  v_ = std::move(velocities);
  prepare_step();
}

Eigen::VectorXd ClothSimulation::flat_positions() const {
  Eigen::VectorXd flat(3 * x_.size());
  for (std::size_t i = 0; i < x_.size(); ++i) flat.segment<3>(3 * i) = x_[i];
  return flat;
}

void ClothSimulation::prepare_step() {
  for (std::size_t i = 0; i < x_.size(); ++i) predicted_[i] = x_[i] + params_.h * v_[i];
  problem_.x() = flat_positions();
}

double ClothSimulation::incremental_potential(const Eigen::VectorXd& x) const {
  return problem_.eval_energy_only(x);
}

SolverReport ClothSimulation::step() {
  prepare_step();
  // grad_tol is a force residual; the potential's gradient carries h^2.
  SolverConfig cfg = params_.solver;
  cfg.grad_tol *= params_.h * params_.h;
  SolverReport report = newton_solve(problem_, cfg);
  if (report.termination == Termination::LineSearchFailed) {
    throw SolverError("cloth step: " + report.message);
  }
  const Eigen::VectorXd& x = problem_.x();
  for (std::size_t i = 0; i < x_.size(); ++i) {
    const Eigen::Vector3d next = x.segment<3>(3 * i);
    v_[i] = (next - x_[i]) / params_.h;
    x_[i] = next;
  }
  return report;
}

}  // namespace meshgrad
