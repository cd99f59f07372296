#pragma once

#include "meshgrad/mesh.hpp"
#include "meshgrad/problem.hpp"
#include "meshgrad/small_matrix.hpp"
#include "meshgrad/solvers.hpp"

#include <Eigen/Core>

#include <functional>
#include <limits>
#include <vector>

namespace meshgrad {

struct SphereConfig {
  int iters = 200;
  SolverConfig solver;
};

/// Embeds a closed genus-0 mesh on the unit sphere by minimizing
///   sum_f -log det[p_i, p_j, p_k] + |p_i - p_j|^2 + |p_j - p_k|^2 + |p_k - p_i|^2
/// over tangent displacements x_i, with p_i = normalize(s_i + x_i1 b1_i + x_i2 b2_i).
/// After every accepted step the base points absorb the displacement and the
/// tangent bases are rebuilt, so x is zero at the start of each iteration.
class SphericalParameterization {
 public:
  /// Centers the vertices on their centroid and projects them onto the unit
  /// sphere. Throws MeshError unless the Euler characteristic is 2, and
  /// ProblemError listing faces whose initial determinant is not positive.
  explicit SphericalParameterization(const Mesh& mesh);
  SphericalParameterization(const SphericalParameterization&) = delete;
  SphericalParameterization& operator=(const SphericalParameterization&) = delete;

  /// L-BFGS with one retraction per iteration. `on_accept` sees the state
  /// after each retraction.
  SolverReport run(const SphereConfig& config,
                   const std::function<void(const SphericalParameterization&)>& on_accept = {});

  template <class S>
  SmallVec3<S> retract(Index v, const SmallVec2<S>& x) const {
    const auto q = SmallVec3<double>::from(base_[v]) + x[0] * SmallVec3<double>::from(b1_[v]) +
                   x[1] * SmallVec3<double>::from(b2_[v]);
    return normalized(q);
  }

  template <class S>
  static S face_energy(const SmallVec3<S>& a, const SmallVec3<S>& b, const SmallVec3<S>& c) {
    const S det = dot(a, cross(b, c));
    if (!(value_of(det) > 0)) return S(std::numeric_limits<double>::infinity());
    return -log(det) + squared_norm(a - b) + squared_norm(b - c) + squared_norm(c - a);
  }

  /// Moves every base point to R(s_i, x_i), zeroes x and rebuilds the bases.
  void rebase();

  const Mesh& mesh() const { return *mesh_; }
  Problem<2>& problem() { return problem_; }
  const std::vector<Eigen::Vector3d>& points() const { return base_; }
  const std::vector<Eigen::Vector3d>& tangent_u() const { return b1_; }
  const std::vector<Eigen::Vector3d>& tangent_v() const { return b2_; }
  void set_points(std::vector<Eigen::Vector3d> points);

  /// Energy of the current embedding (x = 0).
  double energy() const;
  /// Energy at tangent displacement `x` from the current bases.
  double energy_at(const Eigen::VectorXd& x) const { return problem_.eval_energy_only(x); }
  double min_det() const;
  std::vector<Index> non_positive_faces() const;
  /// Largest | |p_i| - 1 |.
  double max_norm_error() const;

 private:
  void rebuild_bases();

  const Mesh* mesh_;
  std::vector<Eigen::Vector3d> base_, b1_, b2_;
  Problem<2> problem_;
};

/// Projects `mesh` onto the unit sphere around its centroid.
std::vector<Eigen::Vector3d> normalize_to_sphere(const Mesh& mesh);

}  // namespace meshgrad
