#include "meshgrad/problem.hpp"

#include "meshgrad/linalg.hpp"

#include <oneapi/tbb/blocked_range.h>
#include <oneapi/tbb/parallel_for.h>
#include <oneapi/tbb/task_arena.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <thread>

namespace meshgrad {

namespace detail {

class Executor {
 public:
  explicit Executor(int threads) : arena(threads) {}
  tbb::task_arena arena;
};

}  // namespace detail

namespace {

// Pairwise summation; the split points depend only on the length.
double tree_sum(std::span<const double> v) {
  if (v.empty()) return 0.0;
  if (v.size() == 1) return v[0];
  const std::size_t half = v.size() / 2;
  return tree_sum(v.first(half)) + tree_sum(v.subspan(half));
}

class Adder {
 public:
  explicit Adder(bool atomic) : atomic_(atomic) {}
  void operator()(double& dst, double value) const {
    if (atomic_) {
      std::atomic_ref<double>(dst).fetch_add(value, std::memory_order_relaxed);
    } else {
      dst += value;
    }
  }

 private:
  bool atomic_;
};

struct LocalBuffers {
  explicit LocalBuffers(int k) : k(k), g(k), h(static_cast<std::size_t>(k) * k), hv(k) {}
  int k;
  std::vector<double> g;
  std::vector<double> h;
  std::vector<double> hv;
};

// Symmetrizes and optionally projects a row-major K x K local Hessian.
void condition_local_hessian(double* h, int k, const EvalOptions& options) {
  Eigen::Map<Eigen::MatrixXd> m(h, k, k);
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      const double s = 0.5 * (m(i, j) + m(j, i));
      m(i, j) = s;
      m(j, i) = s;
    }
  }
  if (options.project_psd) project_psd_inplace(m, options.psd_floor);
}

bool env_deterministic() {
  const char* flag = std::getenv("MESHGRAD_DETERMINISTIC");
  return flag != nullptr && std::string(flag) == "1";
}

}  // namespace

ProblemBase::ProblemBase(const Mesh& mesh, int dim, EvalMode mode)
    : mesh_(&mesh),
      dim_(dim),
      mode_(mode),
      x_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh.num_vertices()) * dim)),
      grad_(Eigen::VectorXd::Zero(x_.size())) {
  if (env_deterministic()) accumulation_ = Accumulation::Deterministic;
  set_threads(static_cast<int>(std::max(1u, std::thread::hardware_concurrency())));
}

ProblemBase::~ProblemBase() = default;

void ProblemBase::set_threads(int threads) {
  if (threads < 1) throw ProblemError("thread count must be at least 1");
  threads_ = threads;
  executor_ = std::make_unique<detail::Executor>(threads);
}

void ProblemBase::set_fixed_vertices(std::span<const Index> vertices) {
  fixed_.assign(mesh_->num_vertices(), 0);
  for (Index v : vertices) {
    if (v < 0 || v >= mesh_->num_vertices()) {
      throw ProblemError("fixed vertex " + std::to_string(v) + " out of range");
    }
    fixed_[v] = 1;
  }
  pattern_ready_ = false;
  hess_assembled_ = false;
}

Eigen::VectorXd ProblemBase::free_mask() const {
  Eigen::VectorXd mask = Eigen::VectorXd::Ones(x_.size());
  for (Index v = 0; v < static_cast<Index>(fixed_.size()); ++v) {
    if (fixed_[v]) mask.segment(static_cast<Eigen::Index>(v) * dim_, dim_).setZero();
  }
  return mask;
}

std::size_t ProblemBase::register_term(std::unique_ptr<detail::TermBase> term) {
  terms_.push_back(std::move(term));
  selections_ready_ = false;
  pattern_ready_ = false;
  hess_assembled_ = false;
  return terms_.size() - 1;
}

void ProblemBase::build_selections() const {
  if (selections_ready_) return;
  const Mesh& mesh = *mesh_;
  for (const auto& term : terms_) {
    auto& sel = term->selection;
    sel.offsets.assign(1, 0);
    sel.vertices.clear();
    const Index count = mesh.num_elements(term->kind());
    for (Index e = 0; e < count; ++e) {
      switch (term->op()) {
        case Op::FV:
          sel.vertices.insert(sel.vertices.end(), mesh.faces()[e].begin(), mesh.faces()[e].end());
          break;
        case Op::EV:
          sel.vertices.insert(sel.vertices.end(), mesh.edges()[e].begin(), mesh.edges()[e].end());
          break;
        case Op::V:
          sel.vertices.push_back(e);
          break;
        case Op::VV: {
          const auto ring = mesh.vertex_vertices(e);
          const int cap = std::min(term->slots() - 1, mesh.valence_cap());
          if (static_cast<int>(ring.size()) > cap) {
            throw ProblemError("vertex " + std::to_string(e) + " has valence " +
                               std::to_string(ring.size()) + ", above the term's cap of " +
                               std::to_string(cap));
          }
          sel.vertices.push_back(e);
          sel.vertices.insert(sel.vertices.end(), ring.begin(), ring.end());
          break;
        }
        default:
          throw ProblemError("unsupported neighborhood");
      }
      sel.offsets.push_back(static_cast<Index>(sel.vertices.size()));
    }
  }
  selections_ready_ = true;
}

const BlockSparseMatrix& ProblemBase::precompute_sparsity() {
  if (terms_.empty()) throw ProblemError("precompute_sparsity: no terms registered");
  build_selections();
  const Index nv = mesh_->num_vertices();

  // Count candidate pairs per row, then fill, sort and deduplicate.
  std::vector<Index> counts(static_cast<std::size_t>(nv) + 1, 0);
  for (const auto& term : terms_) {
    const auto& sel = term->selection;
    for (Index e = 0; e + 1 < static_cast<Index>(sel.offsets.size()); ++e) {
      const auto verts = sel[e];
      for (Index a : verts) {
        if (!is_fixed(a)) counts[a + 1] += static_cast<Index>(verts.size());
      }
    }
  }
  std::partial_sum(counts.begin(), counts.end(), counts.begin());
  std::vector<Index> raw(counts.back());
  std::vector<Index> cursor(counts.begin(), counts.end() - 1);
  for (const auto& term : terms_) {
    const auto& sel = term->selection;
    for (Index e = 0; e + 1 < static_cast<Index>(sel.offsets.size()); ++e) {
      const auto verts = sel[e];
      for (Index a : verts) {
        if (is_fixed(a)) continue;
        for (Index b : verts) raw[cursor[a]++] = b;
      }
    }
  }
  std::vector<Index> offsets(static_cast<std::size_t>(nv) + 1, 0);
  std::vector<Index> cols;
  cols.reserve(raw.size());
  for (Index r = 0; r < nv; ++r) {
    auto first = raw.begin() + counts[r];
    auto last = raw.begin() + counts[r + 1];
    std::sort(first, last);
    last = std::unique(first, last);
    for (auto it = first; it != last; ++it) {
      if (!is_fixed(*it)) cols.push_back(*it);
    }
    offsets[r + 1] = static_cast<Index>(cols.size());
  }
  hess_ = BlockSparseMatrix(dim_, std::move(offsets), std::move(cols));

  for (const auto& term : terms_) {
    const auto& sel = term->selection;
    const int slots = term->slots();
    const Index count = static_cast<Index>(sel.offsets.size()) - 1;
    term->block_slots.assign(static_cast<std::size_t>(count) * slots * slots, -1);
    for (Index e = 0; e < count; ++e) {
      const auto verts = sel[e];
      Index* out = term->block_slots.data() + static_cast<std::size_t>(e) * slots * slots;
      for (std::size_t p = 0; p < verts.size(); ++p) {
        for (std::size_t q = 0; q < verts.size(); ++q) {
          out[p * slots + q] = hess_.find_block(verts[p], verts[q]);
        }
      }
    }
  }
  pattern_ready_ = true;
  hess_assembled_ = false;
  return hess_;
}

std::span<const Index> ProblemBase::patch_elements(const detail::TermBase& term, int patch) const {
  return mesh_->patches().elements(term.kind(), patch);
}

template <class Fn>
void ProblemBase::for_each_patch(Fn&& fn) const {
  const int patches = mesh_->patches().num_patches();
  if (threads_ == 1) {
    for (int p = 0; p < patches; ++p) fn(p);
    return;
  }
  executor_->arena.execute([&] {
    tbb::parallel_for(tbb::blocked_range<int>(0, patches, 1), [&](const tbb::blocked_range<int>& r) {
      for (int p = r.begin(); p != r.end(); ++p) fn(p);
    });
  });
}

double ProblemBase::eval_terms(const EvalOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  if (terms_.empty()) throw ProblemError("eval_terms: no terms registered");
  const bool with_hessian = mode_ == EvalMode::GradientAndHessian && !options.gradient_only;
  if (with_hessian && !pattern_ready_) precompute_sparsity();
  build_selections();

  grad_.setZero();
  if (with_hessian) hess_.set_zero();
  const int n = dim_;
  const int patches = mesh_->patches().num_patches();
  const bool deterministic = accumulation_ == Accumulation::Deterministic;
  const Adder add(!deterministic && threads_ > 1);
  double* grad = grad_.data();
  double* hess = with_hessian ? hess_.values().data() : nullptr;
  const double* x = x_.data();

  auto scatter = [&](const detail::TermBase& term, Index e, const double* g, const double* h,
                     const Adder& adder) {
    const auto verts = term.selection[e];
    const int slots = term.slots();
    const int k = term.local_size();
    for (std::size_t p = 0; p < verts.size(); ++p) {
      if (is_fixed(verts[p])) continue;
      for (int c = 0; c < n; ++c) adder(grad[verts[p] * n + c], g[p * n + c]);
    }
    if (h == nullptr) return;
    const Index* slot = term.block_slots.data() + static_cast<std::size_t>(e) * slots * slots;
    for (std::size_t p = 0; p < verts.size(); ++p) {
      for (std::size_t q = 0; q < verts.size(); ++q) {
        const Index b = slot[p * slots + q];
        if (b < 0) continue;
        double* block = hess + static_cast<std::size_t>(b) * n * n;
        for (int r = 0; r < n; ++r) {
          for (int c = 0; c < n; ++c) adder(block[r * n + c], h[(p * n + r) * k + q * n + c]);
        }
      }
    }
  };

  std::vector<double> partial(terms_.size() * static_cast<std::size_t>(patches), 0.0);
  for (std::size_t t = 0; t < terms_.size(); ++t) {
    const detail::TermBase& term = *terms_[t];
    const int k = term.local_size();
    const std::size_t stride = static_cast<std::size_t>(k) + (with_hessian ? k * k : 0);
    std::vector<double> stage;
    if (deterministic) stage.resize(stride * mesh_->num_elements(term.kind()));

    for_each_patch([&](int patch) {
      LocalBuffers buf(k);
      double sum = 0.0;
      for (Index e : patch_elements(term, patch)) {
        double* g = deterministic ? stage.data() + stride * e : buf.g.data();
        double* h = with_hessian ? (deterministic ? g + k : buf.h.data()) : nullptr;
        if (with_hessian) {
          sum += term.hessian(e, x, g, h);
          condition_local_hessian(h, k, options);
        } else {
          sum += term.gradient(e, x, g);
        }
        if (!deterministic) scatter(term, e, g, h, add);
      }
      partial[t * patches + patch] = sum;
    });

    if (deterministic) {
      const Adder plain(false);
      for (int patch = 0; patch < patches; ++patch) {
        for (Index e : patch_elements(term, patch)) {
          const double* g = stage.data() + stride * e;
          scatter(term, e, g, with_hessian ? g + k : nullptr, plain);
        }
      }
    }
  }
  energy_ = tree_sum(partial);
  hess_assembled_ = with_hessian;
  ++eval_count_;
  last_eval_ms_ =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  total_eval_ms_ += last_eval_ms_;
  return energy_;
}

double ProblemBase::eval_energy_only(const Eigen::VectorXd& x_trial) const {
  if (x_trial.size() != x_.size()) throw ProblemError("eval_energy_only: length mismatch");
  if (terms_.empty()) return 0.0;
  build_selections();
  const int patches = mesh_->patches().num_patches();
  std::vector<double> partial(terms_.size() * static_cast<std::size_t>(patches), 0.0);
  const double* x = x_trial.data();
  for (std::size_t t = 0; t < terms_.size(); ++t) {
    const detail::TermBase& term = *terms_[t];
    for_each_patch([&](int patch) {
      double sum = 0.0;
      for (Index e : patch_elements(term, patch)) sum += term.value(e, x);
      partial[t * patches + patch] = sum;
    });
  }
  return tree_sum(partial);
}

Eigen::VectorXd ProblemBase::hvp(const Eigen::VectorXd& x_at, const Eigen::VectorXd& v,
                                 const EvalOptions& options) {
  if (x_at.size() != x_.size() || v.size() != x_.size()) {
    throw ProblemError("hvp: vector length mismatch");
  }
  if (terms_.empty()) throw ProblemError("hvp: no terms registered");
  build_selections();
  ++hvp_count_;

  const int n = dim_;
  const int patches = mesh_->patches().num_patches();
  const bool deterministic = accumulation_ == Accumulation::Deterministic;
  const Adder add(!deterministic && threads_ > 1);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(x_.size());
  double* result = out.data();
  const double* x = x_at.data();

  auto scatter = [&](const detail::TermBase& term, Index e, const double* hv, const Adder& adder) {
    const auto verts = term.selection[e];
    for (std::size_t p = 0; p < verts.size(); ++p) {
      if (is_fixed(verts[p])) continue;
      for (int c = 0; c < n; ++c) adder(result[verts[p] * n + c], hv[p * n + c]);
    }
  };

  for (const auto& term_ptr : terms_) {
    const detail::TermBase& term = *term_ptr;
    const int k = term.local_size();
    std::vector<double> stage;
    if (deterministic) stage.resize(static_cast<std::size_t>(k) * mesh_->num_elements(term.kind()));

    for_each_patch([&](int patch) {
      LocalBuffers buf(k);
      for (Index e : patch_elements(term, patch)) {
        term.hessian(e, x, buf.g.data(), buf.h.data());
        condition_local_hessian(buf.h.data(), k, options);
        const auto verts = term.selection[e];
        double* hv = deterministic ? stage.data() + static_cast<std::size_t>(k) * e : buf.hv.data();
        std::fill(hv, hv + k, 0.0);
        for (std::size_t q = 0; q < verts.size(); ++q) {
          if (is_fixed(verts[q])) continue;
          for (int c = 0; c < n; ++c) {
            const double vq = v[verts[q] * n + c];
            const int col = static_cast<int>(q) * n + c;
            for (int r = 0; r < k; ++r) hv[r] += buf.h[static_cast<std::size_t>(r) * k + col] * vq;
          }
        }
        if (!deterministic) scatter(term, e, hv, add);
      }
    });

    if (deterministic) {
      const Adder plain(false);
      for (int patch = 0; patch < patches; ++patch) {
        for (Index e : patch_elements(term, patch)) {
          scatter(term, e, stage.data() + static_cast<std::size_t>(k) * e, plain);
        }
      }
    }
  }
  return out;
}

void ProblemBase::export_hessian(const std::string& path) const {
  if (!hess_assembled_) throw ProblemError("no Hessian assembled");
  write_matrix_market(path, hess_);
}

void ProblemBase::export_gradient(const std::string& path) const { write_vector(path, grad_); }

}  // namespace meshgrad
