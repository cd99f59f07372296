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

enum class ParamInit { Tutte, PlanarProject };

struct ParamConfig {
  ParamInit init = ParamInit::Tutte;
  /// Newton-CG through hvp when set, otherwise CG on the assembled Hessian.
  bool matrix_free = true;
  SolverConfig solver;
};

/// Area weighted symmetric Dirichlet energy of a UV map,
///   sum_t area_t (|J_t|_F^2 + |J_t^-1|_F^2),
/// with J_t mapping each triangle's isometrically flattened rest shape onto
/// its UV image. Triangles with det J_t <= 0 have infinite energy.
class SymmetricDirichlet {
 public:
  explicit SymmetricDirichlet(const Mesh& mesh);

  template <class S>
  S face_energy(Index f, const SmallVec2<S>& a, const SmallVec2<S>& b, const SmallVec2<S>& c) const {
    const auto& r = rest_inv_[f];
    const auto e = SmallMat<S, 2, 2>::from_columns(std::array<SmallVec2<S>, 2>{b - a, c - a});
    const auto j = e * r;
    const S det = determinant(j);
    if (!(value_of(det) > 0)) return S(std::numeric_limits<double>::infinity());
    const S fro = frobenius_squared(j);
    return area_[f] * (fro + fro / (det * det));
  }

  double energy(const std::vector<Eigen::Vector2d>& uv) const;
  double energy(const Eigen::VectorXd& flat_uv) const;
  /// Smallest det J_t over all faces.
  double min_det(const Eigen::VectorXd& flat_uv) const;
  /// Faces with det J_t <= 0.
  std::vector<Index> flipped_faces(const Eigen::VectorXd& flat_uv) const;
  /// Throws ProblemError naming the first flipped faces.
  void require_flip_free(const Eigen::VectorXd& flat_uv) const;

  double area(Index f) const { return area_[f]; }
  double total_area() const;
  /// 4 * total area: the value at any isometric map.
  double lower_bound() const { return 4.0 * total_area(); }

  /// Registers the FV term on a two-dimensional problem.
  void add_to(Problem<2>& problem) const;

 private:
  const Mesh* mesh_;
  std::vector<SmallMat<double, 2, 2>> rest_inv_;
  std::vector<double> area_;
};

/// Boundary loop of a disk mesh, oriented consistently with its faces.
std::vector<Index> boundary_loop(const Mesh& mesh);

/// Uniform-weight Tutte embedding with the boundary on the unit circle
/// (arc-length spacing). Requires a single boundary loop.
std::vector<Eigen::Vector2d> tutte_embedding(const Mesh& mesh);

/// Projection onto the best-fit plane, oriented so most faces are positive.
std::vector<Eigen::Vector2d> planar_projection(const Mesh& mesh);

Eigen::VectorXd flatten(const std::vector<Eigen::Vector2d>& uv);
std::vector<Eigen::Vector2d> unflatten2(const Eigen::VectorXd& flat);

struct ParamResult {
  std::vector<Eigen::Vector2d> uv;
  SolverReport report;
};

/// Minimizes the symmetric Dirichlet energy from the configured initial map.
/// `on_accept` observes every accepted iterate.
ParamResult parameterize(const Mesh& mesh, const ParamConfig& config,
                         const std::function<void(const ProblemBase&)>& on_accept = {});

/// generate_grid(n) lifted by a smooth height field, a curved disk.
Mesh bumpy_disk(int n, double amplitude = 0.15);

}  // namespace meshgrad
