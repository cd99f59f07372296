#include "meshgrad/solvers.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <deque>
#include <fstream>
#include <iomanip>
#include <ostream>

namespace meshgrad {

const char* to_string(Termination t) {
  switch (t) {
    case Termination::Converged: return "converged";
    case Termination::MaxIters: return "max_iters";
    case Termination::LineSearchFailed: return "line_search_failed";
  }
  return "?";
}

void SolverConfig::validate() const {
  if (!(armijo_c > 0 && armijo_c < 1)) throw SolverError("armijo_c must lie in (0, 1)");
  if (!(backtrack_factor > 0 && backtrack_factor < 1)) {
    throw SolverError("backtrack_factor must lie in (0, 1)");
  }
  if (max_iters < 1 || max_backtracks < 1 || cg_max_iters < 1) {
    throw SolverError("iteration counts must be at least 1");
  }
  if (lbfgs_memory < 0) throw SolverError("lbfgs_memory must be non-negative");
  if (!(psd_floor > 0)) throw SolverError("psd_floor must be positive");
}

double SolverReport::total_ms() const {
  double total = 0.0;
  for (const auto& r : iterations) total += r.time_ms;
  return total;
}

void SolverReport::write_csv(std::ostream& out) const {
  out << "iter,energy,grad_inf_norm,step,inner_iters,time_ms\n";
  out << std::setprecision(17);
  for (const auto& r : iterations) {
    out << r.iter << ',' << r.energy << ',' << r.grad_inf_norm << ',' << r.step << ','
        << r.inner_iters << ',' << r.time_ms << '\n';
  }
}

void SolverReport::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw SolverError("cannot write report: " + path);
  write_csv(out);
}

LineSearchResult backtracking_line_search(const EnergyProbe& energy, const Eigen::VectorXd& x,
                                          const Eigen::VectorXd& d, const Eigen::VectorXd& g,
                                          double f0, const SolverConfig& cfg) {
  const double slope = g.dot(d);
  LineSearchResult out;
  if (!(slope < 0) || !std::isfinite(f0)) return out;
  double alpha = 1.0;
  for (int trial = 0; trial <= cfg.max_backtracks; ++trial) {
    const double f = energy(x + alpha * d);
    ++out.evaluations;
    if (std::isfinite(f) && f < f0 && f <= f0 + cfg.armijo_c * alpha * slope) {
      out.alpha = alpha;
      out.energy = f;
      out.success = true;
      return out;
    }
    alpha *= cfg.backtrack_factor;
  }
  return out;
}

CgResult cg_linear_solve(const LinearOperator& apply, const Eigen::VectorXd& b, double tol,
                         int max_iters, const LinearOperator& precondition) {
  CgResult out;
  out.x = Eigen::VectorXd::Zero(b.size());
  const double b_norm = b.norm();
  if (b_norm == 0.0) {
    out.converged = true;
    return out;
  }
  Eigen::VectorXd r = b;
  Eigen::VectorXd z(b.size());
  if (precondition) {
    precondition(r, z);
  } else {
    z = r;
  }
  Eigen::VectorXd p = z;
  Eigen::VectorXd ap(b.size());
  double rz = r.dot(z);
  Eigen::VectorXd best = out.x;
  double best_res = 1.0;

  for (int it = 0; it < max_iters; ++it) {
    apply(p, ap);
    ++out.iterations;
    const double curvature = p.dot(ap);
    if (!(curvature > 0)) {
      out.negative_curvature = true;
      if (it == 0) out.x = b;
      out.relative_residual = best_res;
      return out;
    }
    const double alpha = rz / curvature;
    out.x += alpha * p;
    r -= alpha * ap;
    const double res = r.norm() / b_norm;
    if (res < best_res) {
      best_res = res;
      best = out.x;
    }
    if (res <= tol) {
      out.converged = true;
      out.relative_residual = res;
      return out;
    }
    if (precondition) {
      precondition(r, z);
    } else {
      z = r;
    }
    const double rz_next = r.dot(z);
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  out.x = best;
  out.relative_residual = best_res;
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

double inf_norm(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

EnergyProbe energy_probe(const ProblemBase& problem) {
  return [&problem](const Eigen::VectorXd& x) { return problem.eval_energy_only(x); };
}

void require_finite_start(double f) {
  if (!std::isfinite(f)) throw SolverError("energy is not finite at the initial point");
}

LinearOperator block_jacobi(const BlockSparseMatrix& h) {
  const int n = h.block_dim();
  const Index rows = h.block_rows();
  std::vector<Eigen::MatrixXd> inverses(rows);
  for (Index i = 0; i < rows; ++i) {
    const Index slot = h.find_block(i, i);
    Eigen::MatrixXd block = slot >= 0 ? Eigen::MatrixXd(h.block(slot)) : Eigen::MatrixXd::Identity(n, n);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(block);
    const bool ok = ldlt.info() == Eigen::Success && ldlt.isPositive() &&
                    (ldlt.vectorD().array() > 0).all();
    inverses[i] = Eigen::MatrixXd::Identity(n, n);
    if (ok) inverses[i] = ldlt.solve(inverses[i]);
  }
  return [n, inverses = std::move(inverses)](const Eigen::VectorXd& in, Eigen::VectorXd& out) {
    out.resize(in.size());
    for (std::size_t i = 0; i < inverses.size(); ++i) {
      const auto base = static_cast<Eigen::Index>(i) * n;
      out.segment(base, n) = inverses[i] * in.segment(base, n);
    }
  };
}

struct Direction {
  Eigen::VectorXd d;
  int inner_iters = 0;
  bool fallback = false;
};

Direction dense_direction(const ProblemBase& problem) {
  Eigen::MatrixXd h = problem.hess().to_dense();
  // Rows of fixed or untouched vertices are empty; pin them to identity.
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    if (h.row(i).cwiseAbs().maxCoeff() == 0.0) h(i, i) = 1.0;
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
  Direction out;
  if (ldlt.info() != Eigen::Success) {
    out.fallback = true;
    return out;
  }
  out.d = ldlt.solve(-problem.grad());
  if (!out.d.allFinite()) out.fallback = true;
  return out;
}

// Shared outer loop of the two Newton variants.
template <class ComputeDirection>
SolverReport newton_loop(ProblemBase& problem, const SolverConfig& cfg, const EvalOptions& eval,
                         ComputeDirection&& direction) {
  cfg.validate();
  SolverReport report;
  auto start = Clock::now();
  double f = problem.eval_terms(eval);
  require_finite_start(f);
  report.iterations.push_back({0, f, inf_norm(problem.grad()), 0.0, 0, elapsed_ms(start), false});
  const EnergyProbe probe = energy_probe(problem);

  for (int it = 1;; ++it) {
    if (inf_norm(problem.grad()) <= cfg.grad_tol) {
      report.termination = Termination::Converged;
      break;
    }
    if (it > cfg.max_iters) {
      report.termination = Termination::MaxIters;
      break;
    }
    start = Clock::now();
    const Eigen::VectorXd g = problem.grad();
    Direction dir = direction();
    if (dir.fallback || !dir.d.allFinite() || !(g.dot(dir.d) < 0)) {
      dir.d = -g;
      dir.fallback = true;
    }
    const Eigen::VectorXd x = problem.x();
    const LineSearchResult ls = backtracking_line_search(probe, x, dir.d, g, f, cfg);
    if (!ls.success) {
      report.termination = Termination::LineSearchFailed;
      report.message = "line search failed at iteration " + std::to_string(it);
      break;
    }
    problem.x() = x + ls.alpha * dir.d;
    f = problem.eval_terms(eval);
    report.iterations.push_back(
        {it, f, inf_norm(problem.grad()), ls.alpha, dir.inner_iters, elapsed_ms(start), dir.fallback});
    if (cfg.on_accept) cfg.on_accept(problem);
  }
  return report;
}

}  // namespace

SolverReport newton_solve(ProblemBase& problem, const SolverConfig& cfg) {
  if (problem.mode() != EvalMode::GradientAndHessian) {
    throw SolverError("newton_solve needs a problem in GradientAndHessian mode");
  }
  const EvalOptions eval{cfg.psd_filter, cfg.psd_floor, false};
  return newton_loop(problem, cfg, eval, [&]() -> Direction {
    if (cfg.linear == LinearSolver::DirectDense) return dense_direction(problem);
    const BlockSparseMatrix& h = problem.hess();
    const LinearOperator apply = [&h](const Eigen::VectorXd& in, Eigen::VectorXd& out) {
      out = h.multiply(in);
    };
    const LinearOperator precond =
        cfg.preconditioner == Preconditioner::BlockJacobi ? block_jacobi(h) : LinearOperator{};
    const CgResult cg = cg_linear_solve(apply, -problem.grad(), cfg.cg_tol, cfg.cg_max_iters, precond);
    return {cg.x, cg.iterations, false};
  });
}

SolverReport newton_cg_solve(ProblemBase& problem, const SolverConfig& cfg) {
  const EvalOptions hvp_options{cfg.psd_filter, cfg.psd_floor, false};
  const EvalOptions eval{false, cfg.psd_floor, true};
  return newton_loop(problem, cfg, eval, [&]() -> Direction {
    const Eigen::VectorXd x = problem.x();
    const LinearOperator apply = [&](const Eigen::VectorXd& in, Eigen::VectorXd& out) {
      out = problem.hvp(x, in, hvp_options);
    };
    const CgResult cg = cg_linear_solve(apply, -problem.grad(), cfg.cg_tol, cfg.cg_max_iters);
    return {cg.x, cg.iterations, false};
  });
}

SolverReport lbfgs_solve(ProblemBase& problem, const SolverConfig& cfg,
                         const std::function<void(ProblemBase&)>& post_step) {
  cfg.validate();
  struct Pair {
    Eigen::VectorXd s, y;
    double rho;
  };
  std::deque<Pair> history;
  const EvalOptions eval{false, cfg.psd_floor, true};
  const EnergyProbe probe = energy_probe(problem);

  SolverReport report;
  auto start = Clock::now();
  double f = problem.eval_terms(eval);
  require_finite_start(f);
  Eigen::VectorXd g = problem.grad();
  report.iterations.push_back({0, f, inf_norm(g), 0.0, 0, elapsed_ms(start), false});

  std::vector<double> a;
  for (int it = 1;; ++it) {
    if (inf_norm(g) <= cfg.grad_tol) {
      report.termination = Termination::Converged;
      break;
    }
    if (it > cfg.max_iters) {
      report.termination = Termination::MaxIters;
      break;
    }
    start = Clock::now();

    // Two-loop recursion.
    Eigen::VectorXd q = g;
    a.assign(history.size(), 0.0);
    for (std::size_t i = history.size(); i-- > 0;) {
      a[i] = history[i].rho * history[i].s.dot(q);
      q -= a[i] * history[i].y;
    }
    const double gamma =
        history.empty() ? 1.0 : history.back().s.dot(history.back().y) / history.back().y.squaredNorm();
    Eigen::VectorXd r = gamma * q;
    for (std::size_t i = 0; i < history.size(); ++i) {
      const double b = history[i].rho * history[i].y.dot(r);
      r += (a[i] - b) * history[i].s;
    }
    Eigen::VectorXd d = -r;
    bool fallback = false;
    if (!d.allFinite() || !(g.dot(d) < 0)) {
      d = -g;
      history.clear();
      fallback = true;
    }

    const Eigen::VectorXd x = problem.x();
    const LineSearchResult ls = backtracking_line_search(probe, x, d, g, f, cfg);
    if (!ls.success) {
      report.termination = Termination::LineSearchFailed;
      report.message = "line search failed at iteration " + std::to_string(it);
      break;
    }
    const Eigen::VectorXd s = ls.alpha * d;
    problem.x() = x + s;
    if (post_step) post_step(problem);
    f = problem.eval_terms(eval);
    const Eigen::VectorXd g_next = problem.grad();
    const Eigen::VectorXd y = g_next - g;
    g = g_next;

    if (post_step && cfg.lbfgs_reset_on_rebase) {
      history.clear();
    } else if (cfg.lbfgs_memory > 0) {
      const double sy = s.dot(y);
      if (sy > 1e-12 * s.norm() * y.norm()) {
        history.push_back({s, y, 1.0 / sy});
        if (static_cast<int>(history.size()) > cfg.lbfgs_memory) history.pop_front();
      }
    }
    report.iterations.push_back({it, f, inf_norm(g), ls.alpha, 0, elapsed_ms(start), fallback});
    if (cfg.on_accept) cfg.on_accept(problem);
  }
  return report;
}

SolverReport gradient_descent_solve(ProblemBase& problem, double step, int iters,
                                    const std::function<void(ProblemBase&)>& on_step) {
  if (!(step >= 0)) throw SolverError("gradient descent step must be non-negative");
  const EvalOptions eval{false, 1e-9, true};
  SolverReport report;
  auto start = Clock::now();
  double f = problem.eval_terms(eval);
  report.iterations.push_back({0, f, inf_norm(problem.grad()), 0.0, 0, elapsed_ms(start), false});
  for (int it = 1; it <= iters; ++it) {
    start = Clock::now();
    problem.x() -= step * problem.grad();
    f = problem.eval_terms(eval);
    report.iterations.push_back({it, f, inf_norm(problem.grad()), step, 0, elapsed_ms(start), false});
    if (on_step) on_step(problem);
  }
  report.termination = Termination::MaxIters;
  return report;
}

}  // namespace meshgrad
