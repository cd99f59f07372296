#pragma once

#include "meshgrad/mesh.hpp"
#include "meshgrad/problem.hpp"
#include "meshgrad/solvers.hpp"

#include <Eigen/Core>

#include <optional>
#include <vector>

namespace meshgrad {

struct ClothParams {
  double h = 0.01;      // timestep (s)
  double k = 1e4;       // spring stiffness
  double mass_density = 1.0;
  Eigen::Vector3d gravity{0.0, -9.8, 0.0};
  std::vector<Index> pinned;
  /// Per-vertex masses; when unset they are lumped from incident face areas.
  std::optional<std::vector<double>> masses;
  /// Newton settings; grad_tol is read as a force residual and scaled by h^2.
  SolverConfig solver;
};

/// Mass-spring cloth advanced by implicit Euler. Each step minimizes the
/// incremental potential
///   E(x) = 1/2 |x - x~|_M^2 + h^2 (sum_e P_e(x) - (x - x~)^T M g),  x~ = x_n + h v_n
/// with Newton's method, where P_e = l^2 k/2 (|x_i - x_j|^2 / l^2 - 1)^2 and
/// rest lengths l come from the input mesh. Pinned vertices are removed from
/// the system.
class ClothSimulation {
 public:
  ClothSimulation(Mesh mesh, ClothParams params);
  ClothSimulation(const ClothSimulation&) = delete;
  ClothSimulation& operator=(const ClothSimulation&) = delete;

  /// One implicit Euler step. Throws SolverError when the line search fails.
  SolverReport step();

  const Mesh& mesh() const { return mesh_; }
  const ClothParams& params() const { return params_; }
  const std::vector<Eigen::Vector3d>& positions() const { return x_; }
  const std::vector<Eigen::Vector3d>& velocities() const { return v_; }
  const std::vector<double>& masses() const { return mass_; }
  const std::vector<double>& rest_lengths() const { return rest_; }
  void set_state(std::vector<Eigen::Vector3d> positions, std::vector<Eigen::Vector3d> velocities);

  /// Problem for the upcoming step; its predicted position is x_n + h v_n.
  Problem<3>& problem() { return problem_; }
  /// Refreshes the inertia target from the current state.
  void prepare_step();

  /// Incremental potential of the upcoming step at `x` (flat, vertex-major).
  double incremental_potential(const Eigen::VectorXd& x) const;
  Eigen::VectorXd flat_positions() const;

  /// Time spent assembling gradients and Hessians, summed over all steps.
  double derivative_ms() const { return problem_.total_eval_ms(); }

 private:
  void register_terms();

  Mesh mesh_;
  ClothParams params_;
  std::vector<Eigen::Vector3d> x_, v_, predicted_;
  std::vector<double> mass_, rest_;
  Problem<3> problem_;
};

/// Default pins for generate_grid(n): the two corners of the top row.
std::vector<Index> grid_top_corners(int n);

/// Lumped vertex masses: density times one third of the incident face area.
std::vector<double> lumped_masses(const Mesh& mesh, double density);

/// Stretch d of a single vertical spring hanging a mass under gravity:
/// solves 2 k d (d^2 / l^2 - 1) = m g by bisection.
double hanging_spring_length(double k, double rest_length, double mass, double gravity);

}  // namespace meshgrad
