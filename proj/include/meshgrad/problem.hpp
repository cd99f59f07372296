#pragma once

#include "meshgrad/active.hpp"
#include "meshgrad/block_sparse.hpp"
#include "meshgrad/mesh.hpp"
#include "meshgrad/small_matrix.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace meshgrad {

class ProblemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class EvalMode { GradientOnly, GradientAndHessian };

/// How concurrent contributions reach the global buffers. Atomic adds
/// directly into shared memory; Deterministic stages every element's local
/// result and scatters them in patch order, reproducible bit for bit.
enum class Accumulation { Atomic, Deterministic };

struct EvalOptions {
  /// Clamp each local Hessian's eigenvalues at `psd_floor` before scatter.
  bool project_psd = false;
  double psd_floor = 1e-9;
  /// Skip Hessian assembly even in GradientAndHessian mode.
  bool gradient_only = false;
};

/// Local variables of one element as seen by an energy callback: slot p holds
/// the Dim components of the p-th vertex of the element's neighborhood.
template <class S, int Dim, int Slots>
class LocalVariables {
 public:
  using Scalar = S;
  static constexpr int dim = Dim;

  explicit LocalVariables(int count) : count_(count) {}

  SmallVec<S, Dim> operator[](int slot) const {
    SmallVec<S, Dim> v;
    for (int c = 0; c < Dim; ++c) v[c] = values_[slot * Dim + c];
    return v;
  }
  const S& operator()(int slot, int component) const { return values_[slot * Dim + component]; }
  S& operator()(int slot, int component) { return values_[slot * Dim + component]; }

  /// Number of populated slots; VV neighborhoods may use fewer than Slots.
  int size() const { return count_; }

 private:
  std::array<S, Dim * Slots> values_{};
  int count_;
};

namespace detail {

class Executor;

/// Ordered vertex ids per element: the row support of each selection matrix.
struct SelectionMap {
  std::vector<Index> offsets{0};
  std::vector<Index> vertices;

  std::span<const Index> operator[](Index element) const {
    return {vertices.data() + offsets[element], vertices.data() + offsets[element + 1]};
  }
};

/// Type-erased energy term. Implementations evaluate one element at a time;
/// the problem owns gather, scatter and parallel scheduling.
class TermBase {
 public:
  TermBase(Op op, int dim, int slots) : op_(op), dim_(dim), slots_(slots) {}
  virtual ~TermBase() = default;

  Op op() const { return op_; }
  ElementKind kind() const { return source_kind(op_); }
  int slots() const { return slots_; }
  int local_size() const { return dim_ * slots_; }

  virtual double value(Index element, const double* x) const = 0;
  virtual double gradient(Index element, const double* x, double* g) const = 0;
  /// Fills g (K) and H (K x K, row-major).
  virtual double hessian(Index element, const double* x, double* g, double* h) const = 0;

  SelectionMap selection;
  // Per element, slots x slots block slots into the Hessian values (-1: skipped).
  std::vector<Index> block_slots;

 private:
  Op op_;
  int dim_;
  int slots_;
};

template <Op Neighborhood, int Dim, int Slots, class Fn>
class Term final : public TermBase {
 public:
  static constexpr int K = Dim * Slots;

  explicit Term(Fn fn) : TermBase(Neighborhood, Dim, Slots), fn_(std::move(fn)) {}

  double value(Index element, const double* x) const override {
    return run<double>(element, x, [](double v, int) { return v; });
  }

  double gradient(Index element, const double* x, double* g) const override {
    using A = ActiveScalar<K, false>;
    const A r = run<A>(element, x, [](double v, int i) { return A::variable(v, i); });
    for (int i = 0; i < K; ++i) g[i] = r.grad[i];
    return r.val;
  }

  double hessian(Index element, const double* x, double* g, double* h) const override {
    using A = ActiveScalar<K, true>;
    const A r = run<A>(element, x, [](double v, int i) { return A::variable(v, i); });
    for (int i = 0; i < K; ++i) {
      g[i] = r.grad[i];
      for (int j = 0; j < K; ++j) h[i * K + j] = r.hess(i, j);
    }
    return r.val;
  }

 private:
  template <class S, class Make>
  S run(Index element, const double* x, Make&& make) const {
    const auto verts = selection[element];
    const int count = static_cast<int>(verts.size());
    LocalVariables<S, Dim, Slots> vars(count);
    for (int p = 0; p < count; ++p) {
      for (int c = 0; c < Dim; ++c) {
        vars(p, c) = make(x[static_cast<std::size_t>(verts[p]) * Dim + c], p * Dim + c);
      }
    }
    return S(fn_(ElementHandle{source_kind(Neighborhood), element}, verts, vars));
  }

  Fn fn_;
};

}  // namespace detail

/// Global objective F(x) = sum over registered terms and their elements of
/// local energies, with variables living on mesh vertices.
///
/// The flat state vector is vertex-major: entry n * v + c is component c of
/// vertex v. Energy callbacks must be pure functions of their arguments; they
/// are invoked concurrently from several threads.
class ProblemBase {
 public:
  ProblemBase(const Mesh& mesh, int dim, EvalMode mode);
  virtual ~ProblemBase();
  ProblemBase(const ProblemBase&) = delete;
  ProblemBase& operator=(const ProblemBase&) = delete;

  const Mesh& mesh() const { return *mesh_; }
  int dim() const { return dim_; }
  EvalMode mode() const { return mode_; }
  Eigen::Index size() const { return x_.size(); }
  std::size_t num_terms() const { return terms_.size(); }

  Eigen::VectorXd& x() { return x_; }
  const Eigen::VectorXd& x() const { return x_; }
  const Eigen::VectorXd& grad() const { return grad_; }
  const BlockSparseMatrix& hess() const { return hess_; }
  double energy() const { return energy_; }

  /// Vertices whose variables are held constant. Their gradient entries and
  /// Hessian rows/columns are never assembled, and hvp leaves them at zero.
  void set_fixed_vertices(std::span<const Index> vertices);
  bool is_fixed(Index v) const { return !fixed_.empty() && fixed_[v] != 0; }
  /// 1.0 for free scalar entries, 0.0 for fixed ones.
  Eigen::VectorXd free_mask() const;

  void set_threads(int threads);
  int threads() const { return threads_; }
  void set_accumulation(Accumulation mode) { accumulation_ = mode; }
  Accumulation accumulation() const { return accumulation_; }

  /// Builds selection maps and the CSR Hessian pattern with per-element
  /// scatter slots, so assembly performs no searches.
  const BlockSparseMatrix& precompute_sparsity();
  bool has_sparsity() const { return pattern_ready_; }

  /// Zeroes and refills energy, gradient and (in GradientAndHessian mode) the
  /// Hessian at the current x. Non-finite local energies surface in the
  /// returned energy.
  double eval_terms(const EvalOptions& options = {});

  /// Energy at `x_trial` without derivatives; leaves problem state untouched.
  double eval_energy_only(const Eigen::VectorXd& x_trial) const;

  /// Sum over elements of S_j^T H_j S_j v without forming the global matrix.
  Eigen::VectorXd hvp(const Eigen::VectorXd& x, const Eigen::VectorXd& v,
                      const EvalOptions& options = {});

  void export_hessian(const std::string& path) const;
  void export_gradient(const std::string& path) const;

  std::int64_t hvp_count() const { return hvp_count_; }
  std::int64_t eval_count() const { return eval_count_; }
  /// Wall time of the most recent eval_terms call.
  double last_eval_ms() const { return last_eval_ms_; }
  /// Accumulated wall time of all eval_terms calls.
  double total_eval_ms() const { return total_eval_ms_; }

 protected:
  std::size_t register_term(std::unique_ptr<detail::TermBase> term);

 private:
  void build_selections() const;
  template <class Fn>
  void for_each_patch(Fn&& fn) const;
  std::span<const Index> patch_elements(const detail::TermBase& term, int patch) const;

  const Mesh* mesh_;
  int dim_;
  EvalMode mode_;
  Eigen::VectorXd x_;
  Eigen::VectorXd grad_;
  BlockSparseMatrix hess_;
  double energy_ = 0.0;
  bool hess_assembled_ = false;
  mutable bool selections_ready_ = false;
  bool pattern_ready_ = false;
  std::vector<std::unique_ptr<detail::TermBase>> terms_;
  std::vector<char> fixed_;
  int threads_ = 1;
  Accumulation accumulation_ = Accumulation::Atomic;
  std::unique_ptr<detail::Executor> executor_;
  std::int64_t hvp_count_ = 0;
  std::int64_t eval_count_ = 0;
  double last_eval_ms_ = 0.0;
  double total_eval_ms_ = 0.0;
};

/// Problem with `Dim` variables per vertex.
///
///   Problem<2> problem(mesh, EvalMode::GradientAndHessian);
///   problem.add_term<Op::FV>([&](const ElementHandle& f, std::span<const Index> verts,
///                                const auto& x) {
///     auto a = x[0]; ...
///     return energy;   // same scalar type as x's entries
///   });
///   problem.eval_terms();
///
/// Callbacks are generic over the scalar type: they run with plain doubles
/// for energy probes and with ActiveScalar<Dim * slots> for derivatives.
/// For Op::VV, slot 0 is the center vertex followed by its sorted one-ring,
/// and `MaxRing` bounds the ring size at compile time.
template <int Dim>
class Problem : public ProblemBase {
 public:
  static_assert(Dim >= 1);
  explicit Problem(const Mesh& mesh, EvalMode mode = EvalMode::GradientAndHessian)
      : ProblemBase(mesh, Dim, mode) {}

  template <Op Neighborhood, int MaxRing = 8, class Fn>
  std::size_t add_term(Fn fn) {
    if constexpr (Neighborhood == Op::VE || Neighborhood == Op::VF) {
      throw ProblemError(std::string("op ") + to_string(Neighborhood) +
                         " does not yield vertices; energy terms need a vertex neighborhood");
    } else {
      constexpr int slots = Neighborhood == Op::FV   ? 3
                            : Neighborhood == Op::EV ? 2
                            : Neighborhood == Op::V  ? 1
                                                     : 1 + MaxRing;
      return register_term(
          std::make_unique<detail::Term<Neighborhood, Dim, slots, Fn>>(std::move(fn)));
    }
  }

  /// Variant that checks the element kind a caller expects the term to run on.
  template <Op Neighborhood, int MaxRing = 8, class Fn>
  std::size_t add_term(ElementKind kind, Fn fn) {
    if (kind != source_kind(Neighborhood)) {
      throw ProblemError(std::string("op ") + to_string(Neighborhood) + " runs on " +
                         to_string(source_kind(Neighborhood)) + " elements, not " +
                         to_string(kind));
    }
    return add_term<Neighborhood, MaxRing>(std::move(fn));
  }
};

}  // namespace meshgrad
