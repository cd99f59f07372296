#pragma once

// Reference computations shared by the unit and acceptance tests: central
// finite differences, brute-force mesh adjacency and error metrics.

#include "meshgrad/mesh.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <random>
#include <set>
#include <utility>
#include <vector>

namespace oracle {

using meshgrad::Index;

using ScalarFn = std::function<double(const Eigen::VectorXd&)>;
using VectorFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

inline Eigen::VectorXd fd_gradient(const ScalarFn& f, const Eigen::VectorXd& x, double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    const double fp = f(xp);
    xp[i] = x[i] - h;
    const double fm = f(xp);
    xp[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Columns are central differences of `grad`.
inline Eigen::MatrixXd fd_jacobian(const VectorFn& grad, const Eigen::VectorXd& x, double h = 1e-5) {
  Eigen::MatrixXd j(x.size(), x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    const Eigen::VectorXd gp = grad(xp);
    xp[i] = x[i] - h;
    const Eigen::VectorXd gm = grad(xp);
    xp[i] = x[i];
    j.col(i) = (gp - gm) / (2.0 * h);
  }
  return j;
}

/// Dense second differences of a scalar function.
inline Eigen::MatrixXd fd_hessian(const ScalarFn& f, const Eigen::VectorXd& x, double h = 1e-4) {
  const Eigen::Index n = x.size();
  Eigen::MatrixXd hess(n, n);
  Eigen::VectorXd y = x;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      auto at = [&](double di, double dj) {
        y = x;
        y[i] += di;
        y[j] += dj;
        return f(y);
      };
      hess(i, j) = (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h);
    }
  }
  return hess;
}

/// max |a - b| / max(max |b|, floor)
template <class A, class B>
double rel_error(const A& a, const B& b, double floor = 1e-12) {
  const double scale = std::max(b.cwiseAbs().maxCoeff(), floor);
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

/// Edges derived by scanning every face independently.
inline std::set<std::pair<Index, Index>> brute_edges(const std::vector<std::array<Index, 3>>& faces) {
  std::set<std::pair<Index, Index>> edges;
  for (const auto& f : faces) {
    for (int k = 0; k < 3; ++k) {
      Index a = f[k], b = f[(k + 1) % 3];
      edges.insert({std::min(a, b), std::max(a, b)});
    }
  }
  return edges;
}

/// Sorted one-ring of `v` from a full edge scan.
inline std::vector<Index> brute_one_ring(const meshgrad::Mesh& mesh, Index v) {
  std::vector<Index> ring;
  for (const auto& [a, b] : mesh.edges()) {
    if (a == v) ring.push_back(b);
    if (b == v) ring.push_back(a);
  }
  std::sort(ring.begin(), ring.end());
  return ring;
}

/// Uniform random vector in [lo, hi].
inline Eigen::VectorXd random_vector(std::mt19937& rng, Eigen::Index n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

/// Scalar (row, col) positions whose magnitude exceeds `tol`.
inline std::vector<std::pair<Eigen::Index, Eigen::Index>> nonzeros(const Eigen::MatrixXd& m, double tol) {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (std::abs(m(i, j)) > tol) out.push_back({i, j});
    }
  }
  return out;
}

}  // namespace oracle
