// meshgrad command-line driver: cloth, param, sphere, smooth, bench.

#include "meshgrad/apps/cloth.hpp"
#include "meshgrad/apps/param.hpp"
#include "meshgrad/apps/smooth.hpp"
#include "meshgrad/apps/sphere.hpp"
#include "meshgrad/mesh_io.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

using namespace meshgrad;

namespace {

struct Common {
  std::string out;
  std::string report;
  std::string dump_hessian;
  int threads = 0;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--out", c.out, "Write the result mesh (OBJ)");
  app->add_option("--report", c.report, "Write the solver report (CSV)");
  app->add_option("--dump-hessian", c.dump_hessian, "Write the final Hessian (MatrixMarket)");
  app->add_option("--threads", c.threads, "Worker threads (0: hardware concurrency)")->check(CLI::NonNegativeNumber);
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
}

void print_summary(const SolverReport& r) {
  std::printf("final energy %.12g\niterations %d (%s)\ntotal %.3f ms\n", r.final_energy(), r.accepted_steps(),
              to_string(r.termination), r.total_ms());
}

std::vector<Eigen::Vector3d> lift_uv(const std::vector<Eigen::Vector2d>& uv) {
  std::vector<Eigen::Vector3d> out;
  out.reserve(uv.size());
  for (const auto& p : uv) out.emplace_back(p.x(), p.y(), 0.0);
  return out;
}

// ---- cloth ----

struct ClothArgs {
  int grid = 10;
  int steps = 100;
  double h = 0.01;
  double k = 1e4;
  double density = 1.0;
  std::vector<double> gravity{0.0, -9.8, 0.0};
  std::vector<Index> pinned;
  Common common;
};

int run_cloth(const ClothArgs& a) {
  ClothParams params;
  params.h = a.h;
  params.k = a.k;
  params.mass_density = a.density;
  params.gravity = Eigen::Vector3d(a.gravity[0], a.gravity[1], a.gravity[2]);
  params.pinned = a.pinned.empty() ? grid_top_corners(a.grid) : a.pinned;
  ClothSimulation sim(generate_grid(a.grid, 1.0 / (a.grid - 1)), params);
  sim.problem().set_threads(resolve_threads(a.common.threads));

  std::ofstream csv;
  if (!a.common.report.empty()) {
    csv.open(a.common.report);
    if (!csv) throw std::runtime_error("cannot write report: " + a.common.report);
    csv << "step,newton_iters,energy,grad_inf_norm,derivative_ms,total_ms\n";
  }
  SolverReport last;
  int newton = 0;
  double total_ms = 0.0;
  for (int s = 0; s < a.steps; ++s) {
    const double before = sim.derivative_ms();
    last = sim.step();
    const double deriv = sim.derivative_ms() - before;
    newton += last.accepted_steps();
    total_ms += last.total_ms();
    if (csv) {
      const auto& end = last.iterations.back();
      csv << s << ',' << last.accepted_steps() << ',' << end.energy << ',' << end.grad_inf_norm << ',' << deriv << ','
          << last.total_ms() << '\n';
    }
  }
  if (!a.common.out.empty()) save_obj(a.common.out, sim.positions(), sim.mesh().faces());
  if (!a.common.dump_hessian.empty()) {
    sim.problem().eval_terms();
    sim.problem().export_hessian(a.common.dump_hessian);
  }
  std::printf("steps %d, Newton iterations %d\n", a.steps, newton);
  std::printf("derivative time per step %.4f ms\n", a.steps > 0 ? sim.derivative_ms() / a.steps : 0.0);
  std::printf("final energy %.12g\ntotal %.3f ms\n", last.iterations.empty() ? 0.0 : last.final_energy(), total_ms);
  return 0;
}

// ---- param ----

struct ParamArgs {
  std::string mesh;
  std::string init = "tutte";
  int iters = 100;
  double cg_tol = 1e-4;
  int cg_iters = 200;
  bool assembled = false;
  Common common;
};

int run_param(const ParamArgs& a) {
  const Mesh mesh = load_obj(a.mesh);
  ParamConfig cfg;
  cfg.init = a.init == "planar" ? ParamInit::PlanarProject : ParamInit::Tutte;
  cfg.matrix_free = !a.assembled;
  cfg.solver.max_iters = a.iters;
  cfg.solver.cg_tol = a.cg_tol;
  cfg.solver.cg_max_iters = a.cg_iters;
  const ParamResult r = parameterize(mesh, cfg);
  if (!a.common.report.empty()) r.report.save_csv(a.common.report);
  if (!a.common.out.empty()) save_obj(a.common.out, lift_uv(r.uv), mesh.faces());
  if (!a.common.dump_hessian.empty()) {
    const SymmetricDirichlet sd(mesh);
    Problem<2> p(mesh);
    sd.add_to(p);
    p.x() = flatten(r.uv);
    p.eval_terms();
    p.export_hessian(a.common.dump_hessian);
  }
  print_summary(r.report);
  std::printf("lower bound %.12g\n", SymmetricDirichlet(mesh).lower_bound());
  return 0;
}

// ---- sphere ----

struct SphereArgs {
  std::string mesh;
  int icosphere = -1;
  int iters = 200;
  int memory = 8;
  Common common;
};

int run_sphere(const SphereArgs& a) {
  if (a.mesh.empty() && a.icosphere < 0) throw CLI::RequiredError("--mesh or --icosphere");
  const Mesh mesh = a.mesh.empty() ? generate_icosphere(a.icosphere) : load_obj(a.mesh);
  SphericalParameterization sp(mesh);
  sp.problem().set_threads(resolve_threads(a.common.threads));
  SphereConfig cfg;
  cfg.iters = a.iters;
  cfg.solver.lbfgs_memory = a.memory;
  const SolverReport r = sp.run(cfg);
  if (!a.common.report.empty()) r.save_csv(a.common.report);
  if (!a.common.out.empty()) save_obj(a.common.out, sp.points(), mesh.faces());
  if (!a.common.dump_hessian.empty()) {
    sp.problem().eval_terms();
    sp.problem().export_hessian(a.common.dump_hessian);
  }
  print_summary(r);
  std::printf("min det %.6g, max norm error %.3g\n", sp.min_det(), sp.max_norm_error());
  return 0;
}

// ---- smooth ----

struct SmoothArgs {
  std::string mesh;
  double lambda = 0.01;
  int iters = 100;
  std::string mode = "ad";
  Common common;
};

int run_smooth(const SmoothArgs& a) {
  const Mesh mesh = load_obj(a.mesh);
  SmoothOptions options;
  options.threads = resolve_threads(a.common.threads);
  const SmoothResult r =
      smooth(mesh, a.lambda, a.iters, a.mode == "manual" ? SmoothMode::Manual : SmoothMode::AD, options);
  if (!a.common.report.empty()) r.report.save_csv(a.common.report);
  if (!a.common.out.empty()) save_obj(a.common.out, r.positions, mesh.faces());
  if (!a.common.dump_hessian.empty()) {
    Problem<3> p(mesh);
    p.add_term<Op::EV>([](const ElementHandle&, std::span<const Index>, const auto& x) {
      return squared_norm(x[0] - x[1]);
    });
    for (std::size_t i = 0; i < r.positions.size(); ++i) p.x().segment<3>(3 * i) = r.positions[i];
    p.eval_terms();
    p.export_hessian(a.common.dump_hessian);
  }
  print_summary(r.report);
  return 0;
}

// ---- bench ----

struct BenchArgs {
  std::vector<int> sizes{64, 128, 256, 512};
  int reps = 10;
  int threads = 0;
};

int run_bench(const BenchArgs& a) {
  const int threads = resolve_threads(a.threads);
  std::printf("%8s %10s %14s %14s %8s\n", "grid", "vertices", "ad_ms", "manual_ms", "ratio");
  double prev = 0.0;
  for (int n : a.sizes) {
    const Mesh m = generate_grid(n);
    const double t = benchmark_smoothing_gradient(m, a.reps, threads);
    const double manual = benchmark_manual_gradient(m, a.reps);
    if (prev > 0) {
      std::printf("%8d %10lld %14.4f %14.4f %8.3f\n", n, static_cast<long long>(m.num_vertices()), t, manual, t / prev);
    } else {
      std::printf("%8d %10lld %14.4f %14.4f %8s\n", n, static_cast<long long>(m.num_vertices()), t, manual, "-");
    }
    prev = t;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentiable energies on triangle meshes"};
  app.require_subcommand(1);

  ClothArgs cloth;
  auto* c = app.add_subcommand("cloth", "Mass-spring cloth with implicit Euler");
  c->set_help_flag("--help", "Print this help message and exit");  // frees --h for the time step
  c->add_option("--grid", cloth.grid, "Vertices per grid side")->check(CLI::Range(2, 1 << 14));
  c->add_option("--steps", cloth.steps, "Time steps")->check(CLI::NonNegativeNumber);
  c->add_option("--h", cloth.h, "Time step (s)")->check(CLI::PositiveNumber);
  c->add_option("--k", cloth.k, "Spring stiffness")->check(CLI::PositiveNumber);
  c->add_option("--density", cloth.density, "Mass per unit area")->check(CLI::PositiveNumber);
  c->add_option("--gravity", cloth.gravity, "Gravity vector")->expected(3);
  c->add_option("--pin", cloth.pinned, "Pinned vertex ids (default: top corners)");
  add_common(c, cloth.common);

  ParamArgs param;
  auto* p = app.add_subcommand("param", "Symmetric Dirichlet UV parameterization");
  p->add_option("--mesh", param.mesh, "Disk-topology OBJ")->required();
  p->add_option("--init", param.init, "Initial map")->check(CLI::IsMember({"tutte", "planar"}));
  p->add_option("--iters", param.iters, "Newton iterations")->check(CLI::NonNegativeNumber);
  p->add_option("--cg-tol", param.cg_tol, "Relative CG tolerance")->check(CLI::PositiveNumber);
  p->add_option("--cg-iters", param.cg_iters, "CG iterations per Newton step")->check(CLI::PositiveNumber);
  p->add_flag("--assembled", param.assembled, "CG on the assembled Hessian instead of Hessian-vector products");
  add_common(p, param.common);

  SphereArgs sphere;
  auto* s = app.add_subcommand("sphere", "Spherical parameterization of a genus-0 mesh");
  s->add_option("--mesh", sphere.mesh, "Closed genus-0 OBJ");
  s->add_option("--icosphere", sphere.icosphere, "Use a generated icosphere with this many subdivisions")
      ->check(CLI::Range(0, 8));
  s->add_option("--iters", sphere.iters, "L-BFGS iterations")->check(CLI::NonNegativeNumber);
  s->add_option("--memory", sphere.memory, "L-BFGS history length")->check(CLI::NonNegativeNumber);
  add_common(s, sphere.common);

  SmoothArgs sm;
  auto* m = app.add_subcommand("smooth", "Gradient descent on squared edge lengths");
  m->add_option("--mesh", sm.mesh, "Input OBJ")->required();
  m->add_option("--lambda", sm.lambda, "Step size")->check(CLI::PositiveNumber);
  m->add_option("--iters", sm.iters, "Iterations")->check(CLI::NonNegativeNumber);
  m->add_option("--mode", sm.mode, "Gradient source")->check(CLI::IsMember({"ad", "manual"}));
  add_common(m, sm.common);

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "Time the smoothing gradient across grid sizes");
  b->add_option("--sizes", bench.sizes, "Grid sides")->check(CLI::Range(2, 1 << 14));
  b->add_option("--reps", bench.reps, "Repetitions per size")->check(CLI::PositiveNumber);
  b->add_option("--threads", bench.threads, "Worker threads (0: hardware concurrency)")
      ->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 2;
  }

  try {
    if (c->parsed()) return run_cloth(cloth);
    if (p->parsed()) return run_param(param);
    if (s->parsed()) return run_sphere(sphere);
    if (m->parsed()) return run_smooth(sm);
    return run_bench(bench);
  } catch (const CLI::RequiredError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
