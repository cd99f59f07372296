#include "meshgrad/apps/cloth.hpp"
#include "meshgrad/apps/param.hpp"
#include "meshgrad/apps/smooth.hpp"
#include "meshgrad/apps/sphere.hpp"
#include "meshgrad/linalg.hpp"
#include "meshgrad/mesh.hpp"
#include "meshgrad/mesh_io.hpp"
#include "meshgrad/problem.hpp"
#include "meshgrad/solvers.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

namespace py = pybind11;
using namespace meshgrad;

namespace {

using Rows3 = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Rows2 = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;
using IRows3 = Eigen::Matrix<Index, Eigen::Dynamic, 3, Eigen::RowMajor>;
using IRows2 = Eigen::Matrix<Index, Eigen::Dynamic, 2, Eigen::RowMajor>;

Rows3 to_rows(const std::vector<Eigen::Vector3d>& p) {
  Rows3 out(p.size(), 3);
  for (std::size_t i = 0; i < p.size(); ++i) out.row(i) = p[i].transpose();
  return out;
}

Rows2 to_rows(const std::vector<Eigen::Vector2d>& p) {
  Rows2 out(p.size(), 2);
  for (std::size_t i = 0; i < p.size(); ++i) out.row(i) = p[i].transpose();
  return out;
}

std::vector<Eigen::Vector3d> from_rows(const Rows3& m) {
  std::vector<Eigen::Vector3d> out(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) out[i] = m.row(i).transpose();
  return out;
}

template <int N>
Eigen::Matrix<Index, Eigen::Dynamic, N, Eigen::RowMajor> index_rows(const std::vector<std::array<Index, N>>& a) {
  Eigen::Matrix<Index, Eigen::Dynamic, N, Eigen::RowMajor> out(a.size(), N);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (int k = 0; k < N; ++k) out(i, k) = a[i][k];
  return out;
}

Mesh make_mesh(const Rows3& positions, const IRows3& faces, std::optional<IRows2> extra_edges,
               int patch_target) {
  std::vector<std::array<Index, 3>> f(faces.rows());
  for (Eigen::Index i = 0; i < faces.rows(); ++i) f[i] = {faces(i, 0), faces(i, 1), faces(i, 2)};
  std::vector<std::array<Index, 2>> e;
  if (extra_edges) {
    for (Eigen::Index i = 0; i < extra_edges->rows(); ++i) e.push_back({(*extra_edges)(i, 0), (*extra_edges)(i, 1)});
  }
  return Mesh(from_rows(positions), std::move(f), std::move(e), patch_target);
}

// Squared edge lengths on a 3D embedding, the smoothing energy.
struct EdgeProblem : Problem<3> {
  explicit EdgeProblem(const Mesh& mesh) : Problem<3>(mesh) {
    add_term<Op::EV>([](const ElementHandle&, std::span<const Index>, const auto& x) {
      return squared_norm(x[0] - x[1]);
    });
    x() = Eigen::Map<const Eigen::VectorXd>(mesh.positions().front().data(), 3 * mesh.num_vertices());
  }
};

// Owns the energy so the term's captured pointer stays valid.
struct DirichletProblem : Problem<2> {
  SymmetricDirichlet energy;
  DirichletProblem(const Mesh& mesh, ParamInit init)
      : Problem<2>(mesh), energy(mesh) {
    energy.add_to(*this);
    x() = flatten(init == ParamInit::Tutte ? tutte_embedding(mesh) : planar_projection(mesh));
  }
};

py::dict report_dict(const SolverReport& r) {
  const auto n = r.iterations.size();
  Eigen::VectorXd energy(n), grad(n), step(n), time(n);
  Eigen::VectorXi inner(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& it = r.iterations[i];
    energy[i] = it.energy;
    grad[i] = it.grad_inf_norm;
    step[i] = it.step;
    inner[i] = it.inner_iters;
    time[i] = it.time_ms;
  }
  py::dict d;
  d["termination"] = to_string(r.termination);
  d["message"] = r.message;
  d["accepted_steps"] = r.accepted_steps();
  d["energy"] = energy;
  d["grad_inf_norm"] = grad;
  d["step"] = step;
  d["inner_iters"] = inner;
  d["time_ms"] = time;
  return d;
}

EvalOptions eval_options(bool project_psd, double psd_floor, bool gradient_only = false) {
  EvalOptions o;
  o.project_psd = project_psd;
  o.psd_floor = psd_floor;
  o.gradient_only = gradient_only;
  return o;
}

}  // namespace

PYBIND11_MODULE(_meshgrad, m) {
  m.doc() = "Per-element automatic differentiation for mesh energies";
  m.attr("__version__") = "0.1.0";

  py::register_exception<MeshError>(m, "MeshError", PyExc_ValueError);
  py::register_exception<ProblemError>(m, "ProblemError", PyExc_ValueError);
  py::register_exception<SolverError>(m, "SolverError", PyExc_RuntimeError);

  py::enum_<Op>(m, "Op")
      .value("V", Op::V).value("VV", Op::VV).value("VE", Op::VE).value("VF", Op::VF)
      .value("EV", Op::EV).value("FV", Op::FV);
  py::enum_<ElementKind>(m, "ElementKind")
      .value("Vertex", ElementKind::Vertex).value("Edge", ElementKind::Edge).value("Face", ElementKind::Face);

  py::class_<Mesh>(m, "Mesh")
      .def(py::init(&make_mesh), py::arg("positions"), py::arg("faces"),
           py::arg("extra_edges") = py::none(), py::arg("patch_target") = kDefaultPatchFaces)
      .def_property_readonly("num_vertices", &Mesh::num_vertices)
      .def_property_readonly("num_edges", &Mesh::num_edges)
      .def_property_readonly("num_faces", &Mesh::num_faces)
      .def_property_readonly("positions", [](const Mesh& x) { return to_rows(x.positions()); })
      .def_property_readonly("faces", [](const Mesh& x) { return index_rows<3>(x.faces()); })
      .def_property_readonly("edges", [](const Mesh& x) { return index_rows<2>(x.edges()); })
      .def_property_readonly("euler_characteristic", &Mesh::euler_characteristic)
      .def("boundary_edges", &Mesh::boundary_edges)
      .def("find_edge", &Mesh::find_edge)
      .def("query", [](const Mesh& x, Op op, Index element) {
        const ElementHandle h{source_kind(op), element};
        std::vector<Index> out;
        for (const auto& r : query(x, op, h)) out.push_back(r.index);
        return out;
      }, py::arg("op"), py::arg("element"),
         "Ids of the neighborhood of `element` under `op`; the element kind follows from the op.")
      .def("__repr__", [](const Mesh& x) {
        return "<Mesh " + std::to_string(x.num_vertices()) + " vertices, " +
               std::to_string(x.num_faces()) + " faces>";
      });

  m.def("generate_grid", &generate_grid, py::arg("n"), py::arg("spacing") = 1.0);
  m.def("generate_icosphere", &generate_icosphere, py::arg("subdivisions"));
  m.def("bumpy_disk", &bumpy_disk, py::arg("n"), py::arg("amplitude") = 0.15);
  m.def("jitter", &jitter, py::arg("mesh"), py::arg("amplitude"), py::arg("seed"));
  m.def("load_obj", &load_obj, py::arg("path"));
  m.def("save_obj", [](const std::string& path, const Mesh& mesh, std::optional<Rows3> positions) {
    if (positions) {
      const auto p = from_rows(*positions);
      save_obj(path, p, mesh.faces());
    } else {
      save_obj(path, mesh);
    }
  }, py::arg("path"), py::arg("mesh"), py::arg("positions") = py::none());

  m.def("project_psd", [](const Eigen::MatrixXd& h, double floor) { return project_psd(h, floor); },
        py::arg("h"), py::arg("floor") = 1e-9);
  m.def("jacobi_eigen", [](const Eigen::MatrixXd& a, double tol) {
    auto e = jacobi_eigen(a, tol);
    return py::make_tuple(e.values, e.vectors);
  }, py::arg("a"), py::arg("tol") = 1e-12);

  py::class_<ProblemBase>(m, "Problem")
      .def_property_readonly("dim", &ProblemBase::dim)
      .def_property_readonly("size", &ProblemBase::size)
      .def_property("x", [](const ProblemBase& p) { return Eigen::VectorXd(p.x()); },
                    [](ProblemBase& p, const Eigen::VectorXd& x) {
                      if (x.size() != p.size()) throw ProblemError("x has the wrong length");
                      p.x() = x;
                    })
      .def("eval", [](ProblemBase& p, bool project_psd, double psd_floor) {
        const double e = p.eval_terms(eval_options(project_psd, psd_floor));
        return py::make_tuple(e, Eigen::VectorXd(p.grad()), p.hess().to_sparse());
      }, py::arg("project_psd") = false, py::arg("psd_floor") = 1e-9,
         "Energy, gradient and the assembled sparse Hessian at x.")
      .def("gradient", [](ProblemBase& p) {
        const double e = p.eval_terms(eval_options(false, 1e-9, true));
        return py::make_tuple(e, Eigen::VectorXd(p.grad()));
      })
      .def("energy_at", &ProblemBase::eval_energy_only, py::arg("x"))
      .def("hvp", [](ProblemBase& p, const Eigen::VectorXd& x, const Eigen::VectorXd& v, bool project_psd,
                     double psd_floor) { return p.hvp(x, v, eval_options(project_psd, psd_floor)); },
           py::arg("x"), py::arg("v"), py::arg("project_psd") = false, py::arg("psd_floor") = 1e-9)
      .def("set_fixed_vertices", [](ProblemBase& p, std::vector<Index> v) { p.set_fixed_vertices(v); })
      .def("set_threads", &ProblemBase::set_threads)
      .def("set_deterministic", [](ProblemBase& p, bool on) {
        p.set_accumulation(on ? Accumulation::Deterministic : Accumulation::Atomic);
      })
      .def("export_hessian", &ProblemBase::export_hessian)
      .def_property_readonly("eval_count", &ProblemBase::eval_count)
      .def_property_readonly("hvp_count", &ProblemBase::hvp_count);

  m.def("edge_length_problem", [](const Mesh& mesh) -> std::unique_ptr<ProblemBase> {
    return std::make_unique<EdgeProblem>(mesh);
  }, py::arg("mesh"), py::keep_alive<0, 1>(),
     "Sum of squared edge lengths over the mesh positions.");
  m.def("symmetric_dirichlet_problem", [](const Mesh& mesh, const std::string& init) -> std::unique_ptr<ProblemBase> {
    if (init != "tutte" && init != "planar") throw ProblemError("init must be 'tutte' or 'planar'");
    return std::make_unique<DirichletProblem>(mesh, init == "tutte" ? ParamInit::Tutte : ParamInit::PlanarProject);
  }, py::arg("mesh"), py::arg("init") = "tutte", py::keep_alive<0, 1>());

  py::class_<SolverConfig>(m, "SolverConfig")
      .def(py::init<>())
      .def_readwrite("max_iters", &SolverConfig::max_iters)
      .def_readwrite("grad_tol", &SolverConfig::grad_tol)
      .def_readwrite("armijo_c", &SolverConfig::armijo_c)
      .def_readwrite("backtrack_factor", &SolverConfig::backtrack_factor)
      .def_readwrite("max_backtracks", &SolverConfig::max_backtracks)
      .def_readwrite("cg_tol", &SolverConfig::cg_tol)
      .def_readwrite("cg_max_iters", &SolverConfig::cg_max_iters)
      .def_readwrite("lbfgs_memory", &SolverConfig::lbfgs_memory)
      .def_readwrite("psd_floor", &SolverConfig::psd_floor)
      .def_readwrite("psd_filter", &SolverConfig::psd_filter)
      .def_property("linear",
                    [](const SolverConfig& c) { return c.linear == LinearSolver::CG ? "cg" : "dense"; },
                    [](SolverConfig& c, const std::string& s) {
                      if (s != "cg" && s != "dense") throw SolverError("linear must be 'cg' or 'dense'");
                      c.linear = s == "cg" ? LinearSolver::CG : LinearSolver::DirectDense;
                    })
      .def_property("block_jacobi",
                    [](const SolverConfig& c) { return c.preconditioner == Preconditioner::BlockJacobi; },
                    [](SolverConfig& c, bool on) {
                      c.preconditioner = on ? Preconditioner::BlockJacobi : Preconditioner::None;
                    });

  auto solver = [](auto fn) {
    return [fn](ProblemBase& p, const SolverConfig& cfg) { return report_dict(fn(p, cfg)); };
  };
  m.def("newton", solver([](ProblemBase& p, const SolverConfig& c) { return newton_solve(p, c); }),
        py::arg("problem"), py::arg("config") = SolverConfig());
  m.def("newton_cg", solver([](ProblemBase& p, const SolverConfig& c) { return newton_cg_solve(p, c); }),
        py::arg("problem"), py::arg("config") = SolverConfig());
  m.def("lbfgs", solver([](ProblemBase& p, const SolverConfig& c) { return lbfgs_solve(p, c); }),
        py::arg("problem"), py::arg("config") = SolverConfig());
  m.def("gradient_descent", [](ProblemBase& p, double step, int iters) {
    return report_dict(gradient_descent_solve(p, step, iters));
  }, py::arg("problem"), py::arg("step"), py::arg("iters"));

  py::class_<ClothSimulation>(m, "Cloth")
      .def(py::init([](const Mesh& mesh, double h, double k, double density, Eigen::Vector3d gravity,
                       std::vector<Index> pinned, std::optional<SolverConfig> solver) {
             ClothParams p;
             p.h = h;
             p.k = k;
             p.mass_density = density;
             p.gravity = gravity;
             p.pinned = std::move(pinned);
             if (solver) p.solver = *solver;
             return std::make_unique<ClothSimulation>(mesh, std::move(p));
           }),
           py::arg("mesh"), py::arg("h") = 0.01, py::arg("k") = 1e4, py::arg("density") = 1.0,
           py::arg("gravity") = Eigen::Vector3d(0.0, -9.8, 0.0), py::arg("pinned") = std::vector<Index>{},
           py::arg("solver") = py::none())
      .def("step", [](ClothSimulation& c) { return report_dict(c.step()); })
      .def_property_readonly("positions", [](const ClothSimulation& c) { return to_rows(c.positions()); })
      .def_property_readonly("velocities", [](const ClothSimulation& c) { return to_rows(c.velocities()); })
      .def_property_readonly("masses", &ClothSimulation::masses)
      .def_property_readonly("derivative_ms", &ClothSimulation::derivative_ms)
      .def_property_readonly("problem", &ClothSimulation::problem, py::return_value_policy::reference_internal)
      .def("set_state", [](ClothSimulation& c, const Rows3& x, const Rows3& v) {
        c.set_state(from_rows(x), from_rows(v));
      });
  m.def("grid_top_corners", &grid_top_corners, py::arg("n"));
  m.def("hanging_spring_length", &hanging_spring_length, py::arg("k"), py::arg("rest_length"),
        py::arg("mass"), py::arg("gravity"));

  m.def("tutte_embedding", [](const Mesh& mesh) { return to_rows(tutte_embedding(mesh)); });
  m.def("parameterize", [](const Mesh& mesh, const std::string& init, bool matrix_free,
                           std::optional<SolverConfig> solver) {
    ParamConfig cfg;
    if (init != "tutte" && init != "planar") throw ProblemError("init must be 'tutte' or 'planar'");
    cfg.init = init == "tutte" ? ParamInit::Tutte : ParamInit::PlanarProject;
    cfg.matrix_free = matrix_free;
    if (solver) cfg.solver = *solver;
    auto r = parameterize(mesh, cfg);
    SymmetricDirichlet sd(mesh);
    py::dict d = report_dict(r.report);
    d["lower_bound"] = sd.lower_bound();
    return py::make_tuple(to_rows(r.uv), d);
  }, py::arg("mesh"), py::arg("init") = "tutte", py::arg("matrix_free") = true, py::arg("solver") = py::none());

  py::class_<SphericalParameterization>(m, "SphereEmbedding")
      .def(py::init<const Mesh&>(), py::arg("mesh"), py::keep_alive<1, 2>())
      .def("run", [](SphericalParameterization& s, int iters, int memory) {
        SphereConfig cfg;
        cfg.iters = iters;
        cfg.solver.lbfgs_memory = memory;
        return report_dict(s.run(cfg));
      }, py::arg("iters") = 200, py::arg("memory") = 8)
      .def_property_readonly("points", [](const SphericalParameterization& s) { return to_rows(s.points()); })
      .def_property_readonly("energy", &SphericalParameterization::energy)
      .def_property_readonly("min_det", &SphericalParameterization::min_det)
      .def_property_readonly("max_norm_error", &SphericalParameterization::max_norm_error)
      .def_property_readonly("problem", &SphericalParameterization::problem,
                             py::return_value_policy::reference_internal);

  m.def("smooth", [](const Mesh& mesh, double lam, int iters, const std::string& mode, int threads) {
    if (mode != "ad" && mode != "manual") throw ProblemError("mode must be 'ad' or 'manual'");
    SmoothOptions opt;
    opt.threads = threads;
    auto r = smooth(mesh, lam, iters, mode == "ad" ? SmoothMode::AD : SmoothMode::Manual, opt);
    return py::make_tuple(to_rows(r.positions), report_dict(r.report));
  }, py::arg("mesh"), py::arg("lam"), py::arg("iters"), py::arg("mode") = "ad", py::arg("threads") = 0);
  m.def("smoothing_gradient", [](const Mesh& mesh, const Eigen::VectorXd& x) {
    return smoothing_gradient(mesh, x);
  }, py::arg("mesh"), py::arg("x"));
  m.def("benchmark_gradient", [](const Mesh& mesh, int reps, int threads) {
    return py::make_tuple(benchmark_smoothing_gradient(mesh, reps, threads), benchmark_manual_gradient(mesh, reps));
  }, py::arg("mesh"), py::arg("reps") = 5, py::arg("threads") = 0,
     "Mean milliseconds per gradient: (ad, manual).");
}
