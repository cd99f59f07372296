#include "meshgrad/apps/smooth.hpp"

#include "meshgrad/problem.hpp"

#include <chrono>
#include <random>

namespace meshgrad {

namespace {

using Clock = std::chrono::steady_clock;

Eigen::VectorXd flat_positions(const Mesh& mesh) {
  Eigen::VectorXd x(3 * mesh.num_vertices());
  for (Index v = 0; v < mesh.num_vertices(); ++v) x.segment<3>(3 * v) = mesh.positions()[v];
  return x;
}

std::vector<Eigen::Vector3d> to_points(const Eigen::VectorXd& x) {
  std::vector<Eigen::Vector3d> p(x.size() / 3);
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = x.segment<3>(3 * i);
  return p;
}

void add_edge_term(Problem<3>& problem) {
  problem.add_term<Op::EV>([](const ElementHandle&, std::span<const Index>, const auto& x) {
    return squared_norm(x[0] - x[1]);
  });
}

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

}  // namespace

double smoothing_energy(const Mesh& mesh, const Eigen::VectorXd& x) {
  double e = 0.0;
  for (const auto& [i, j] : mesh.edges()) e += (x.segment<3>(3 * i) - x.segment<3>(3 * j)).squaredNorm();
  return e;
}

Eigen::VectorXd smoothing_gradient(const Mesh& mesh, const Eigen::VectorXd& x) {
  Eigen::VectorXd g(x.size());
  for (Index v = 0; v < mesh.num_vertices(); ++v) {
    Eigen::Vector3d acc = Eigen::Vector3d::Zero();
    for (Index u : mesh.vertex_vertices(v)) acc += x.segment<3>(3 * v) - x.segment<3>(3 * u);
    g.segment<3>(3 * v) = 2.0 * acc;
  }
  return g;
}

SmoothResult smooth(const Mesh& mesh, double lambda, int iters, SmoothMode mode,
                    const SmoothOptions& options, const SmoothObserver& observer) {
  if (!(lambda > 0)) throw SolverError("smoothing step lambda must be positive");
  if (iters < 0) throw SolverError("iteration count must be non-negative");
  SmoothResult result;

  if (mode == SmoothMode::AD) {
    Problem<3> problem(mesh, EvalMode::GradientOnly);
    if (options.threads > 0) problem.set_threads(options.threads);
    add_edge_term(problem);
    problem.x() = flat_positions(mesh);
    int it = 0;
    result.report = gradient_descent_solve(problem, lambda, iters, [&](ProblemBase& p) {
      if (observer) observer(++it, p.x());
    });
    result.positions = to_points(problem.x());
    return result;
  }

  Eigen::VectorXd x = flat_positions(mesh);
  auto start = Clock::now();
  Eigen::VectorXd g = smoothing_gradient(mesh, x);
  result.report.iterations.push_back({0, smoothing_energy(mesh, x), g.lpNorm<Eigen::Infinity>(), 0.0, 0,
                                      ms_since(start), false});
  for (int it = 1; it <= iters; ++it) {
    start = Clock::now();
    x -= lambda * g;
    g = smoothing_gradient(mesh, x);
    const double e = smoothing_energy(mesh, x);
    result.report.iterations.push_back({it, e, g.lpNorm<Eigen::Infinity>(), lambda, 0, ms_since(start), false});
    if (observer) observer(it, x);
  }
  result.report.termination = Termination::MaxIters;
  result.positions = to_points(x);
  return result;
}

double benchmark_smoothing_gradient(const Mesh& mesh, int repetitions, int threads) {
  Problem<3> problem(mesh, EvalMode::GradientOnly);
  if (threads > 0) problem.set_threads(threads);
  add_edge_term(problem);
  problem.x() = flat_positions(mesh);
  problem.eval_terms();  // warm-up: selections and buffers
  const auto start = Clock::now();
  for (int r = 0; r < repetitions; ++r) problem.eval_terms();
  return ms_since(start) / repetitions;
}

double benchmark_manual_gradient(const Mesh& mesh, int repetitions) {
  const Eigen::VectorXd x = flat_positions(mesh);
  Eigen::VectorXd g = smoothing_gradient(mesh, x);
  const auto start = Clock::now();
  for (int r = 0; r < repetitions; ++r) g = smoothing_gradient(mesh, x);
  return ms_since(start) / repetitions;
}

Mesh jitter(const Mesh& mesh, double amplitude, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-amplitude, amplitude);
  auto p = mesh.positions();
  for (auto& q : p) q += Eigen::Vector3d(u(rng), u(rng), u(rng));
  return Mesh(std::move(p), mesh.faces());
}

}  // namespace meshgrad
