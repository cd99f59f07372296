#pragma once

#include "meshgrad/mesh.hpp"
#include "meshgrad/solvers.hpp"

#include <Eigen/Core>

#include <functional>
#include <vector>

namespace meshgrad {

enum class SmoothMode { AD, Manual };

struct SmoothOptions {
  int threads = 0;  // 0: hardware concurrency
};

/// Sum over edges of |x_i - x_j|^2 at flat positions `x`.
double smoothing_energy(const Mesh& mesh, const Eigen::VectorXd& x);

/// Closed-form gradient 2 sum_{j in N(i)} (x_i - x_j), gathered per vertex.
Eigen::VectorXd smoothing_gradient(const Mesh& mesh, const Eigen::VectorXd& x);

using SmoothObserver = std::function<void(int iter, const Eigen::VectorXd& x)>;

struct SmoothResult {
  std::vector<Eigen::Vector3d> positions;
  SolverReport report;
};

/// `iters` gradient descent steps x <- x - lambda grad E on the squared edge
/// length energy, either through the AD edge term or the hand-written
/// gradient. The observer sees flat positions after every step.
SmoothResult smooth(const Mesh& mesh, double lambda, int iters, SmoothMode mode,
                    const SmoothOptions& options = {}, const SmoothObserver& observer = {});

/// Mean wall time (ms) of one AD gradient evaluation of the smoothing energy.
double benchmark_smoothing_gradient(const Mesh& mesh, int repetitions, int threads = 0);

/// Mean wall time (ms) of one closed-form gradient evaluation.
double benchmark_manual_gradient(const Mesh& mesh, int repetitions);

/// Copy of `mesh` with every vertex displaced by uniform noise in [-amplitude, amplitude]^3.
Mesh jitter(const Mesh& mesh, double amplitude, unsigned seed);

}  // namespace meshgrad
