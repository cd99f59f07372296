#pragma once

#include "meshgrad/problem.hpp"

#include <Eigen/Core>

#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace meshgrad {

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class LinearSolver { DirectDense, CG };
enum class Preconditioner { None, BlockJacobi };
enum class Termination { Converged, MaxIters, LineSearchFailed };

const char* to_string(Termination t);

struct SolverConfig {
  int max_iters = 100;
  double grad_tol = 1e-6;  // on the infinity norm of the gradient
  double armijo_c = 1e-4;
  double backtrack_factor = 0.5;
  int max_backtracks = 64;
  double cg_tol = 1e-4;  // relative residual
  int cg_max_iters = 200;
  int lbfgs_memory = 8;
  double psd_floor = 1e-9;
  bool psd_filter = true;
  LinearSolver linear = LinearSolver::CG;
  Preconditioner preconditioner = Preconditioner::BlockJacobi;
  /// Drop the L-BFGS history whenever the post-step callback re-bases the
  /// variables, instead of carrying it over in the new coordinates.
  bool lbfgs_reset_on_rebase = false;
  /// Runs after every accepted step (after any L-BFGS post-step).
  std::function<void(ProblemBase&)> on_accept;

  void validate() const;
};

struct IterationRecord {
  int iter = 0;
  double energy = 0.0;
  double grad_inf_norm = 0.0;
  double step = 0.0;
  int inner_iters = 0;
  double time_ms = 0.0;
  bool steepest_fallback = false;
};

/// Row 0 describes the starting point; every later row is an accepted step.
struct SolverReport {
  std::vector<IterationRecord> iterations;
  Termination termination = Termination::MaxIters;
  std::string message;

  int accepted_steps() const { return iterations.empty() ? 0 : static_cast<int>(iterations.size()) - 1; }
  double initial_energy() const { return iterations.front().energy; }
  double final_energy() const { return iterations.back().energy; }
  double total_ms() const;

  /// Header: iter,energy,grad_inf_norm,step,inner_iters,time_ms
  void write_csv(std::ostream& out) const;
  void save_csv(const std::string& path) const;
};

struct LineSearchResult {
  double alpha = 0.0;
  double energy = 0.0;
  bool success = false;
  int evaluations = 0;
};

using EnergyProbe = std::function<double(const Eigen::VectorXd&)>;

/// Largest alpha in {1, b, b^2, ...} with f(x + alpha d) finite, below f0 and
/// within the Armijo bound f0 + c alpha g.d. Non-finite trial energies are
/// rejected like insufficient decrease.
LineSearchResult backtracking_line_search(const EnergyProbe& energy, const Eigen::VectorXd& x,
                                          const Eigen::VectorXd& d, const Eigen::VectorXd& g,
                                          double f0, const SolverConfig& cfg);

using LinearOperator = std::function<void(const Eigen::VectorXd& in, Eigen::VectorXd& out)>;

struct CgResult {
  Eigen::VectorXd x;
  int iterations = 0;  // operator applications
  double relative_residual = 0.0;
  bool converged = false;
  bool negative_curvature = false;
};

/// Conjugate gradients from x0 = 0. Stops at relative residual `tol`, after
/// `max_iters` (returning the iterate with the smallest residual), or on the
/// first direction with p.Ap <= 0, returning the current iterate (or b when
/// that happens in the first iteration).
CgResult cg_linear_solve(const LinearOperator& apply, const Eigen::VectorXd& b, double tol,
                         int max_iters, const LinearOperator& precondition = {});

/// Newton's method on the assembled sparse Hessian. Local Hessians are PSD
/// filtered when cfg.psd_filter is set.
SolverReport newton_solve(ProblemBase& problem, const SolverConfig& cfg);

/// Newton's method whose inner CG only touches the Hessian through hvp.
SolverReport newton_cg_solve(ProblemBase& problem, const SolverConfig& cfg);

/// L-BFGS with backtracking. `post_step` runs after each accepted update,
/// before the new gradient is evaluated, and may re-parameterize x.
SolverReport lbfgs_solve(ProblemBase& problem, const SolverConfig& cfg,
                         const std::function<void(ProblemBase&)>& post_step = {});

/// Fixed-step gradient descent x <- x - step * g, no line search. `on_step`
/// sees the problem after every update.
SolverReport gradient_descent_solve(ProblemBase& problem, double step, int iters,
                                    const std::function<void(ProblemBase&)>& on_step = {});

}  // namespace meshgrad
