#pragma once

// Small instances of the four application energies, each paired with a
// sampler of feasible random states.

#include "meshgrad/apps/cloth.hpp"
#include "meshgrad/apps/param.hpp"
#include "meshgrad/apps/smooth.hpp"
#include "meshgrad/apps/sphere.hpp"
#include "meshgrad/problem.hpp"

#include <Eigen/Core>

#include <cmath>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace fixture {

using namespace meshgrad;

struct AppCase {
  std::string name;
  std::shared_ptr<void> owner;
  ProblemBase* problem = nullptr;
  std::function<Eigen::VectorXd(std::mt19937&)> sample;
};

inline Eigen::VectorXd noise(std::mt19937& rng, Eigen::Index n, double amp) {
  std::uniform_real_distribution<double> u(-amp, amp);
  Eigen::VectorXd v(n);
  for (auto& e : v) e = u(rng);
  return v;
}

inline Eigen::VectorXd flat3(const std::vector<Eigen::Vector3d>& p) {
  Eigen::VectorXd x(3 * p.size());
  for (std::size_t i = 0; i < p.size(); ++i) x.segment<3>(3 * i) = p[i];
  return x;
}

inline AppCase cloth_case(int n = 6) {
  ClothParams params;
  params.pinned = grid_top_corners(n);
  auto sim = std::make_shared<ClothSimulation>(generate_grid(n, 1.0 / (n - 1)), params);
  // nonzero velocities so the inertia target differs from the rest state
  std::mt19937 rng(7);
  std::vector<Eigen::Vector3d> v(sim->mesh().num_vertices());
  for (auto& vi : v) vi = noise(rng, 3, 0.5);
  sim->set_state(sim->positions(), v);
  const Eigen::VectorXd rest = flat3(sim->mesh().positions());
  AppCase c{"cloth", sim, &sim->problem(), nullptr};
  c.sample = [rest](std::mt19937& r) { return Eigen::VectorXd(rest + noise(r, rest.size(), 0.08)); };
  return c;
}

inline AppCase param_case(int n = 6) {
  struct Owner {
    Mesh mesh;
    SymmetricDirichlet energy;
    Problem<2> problem;
    explicit Owner(Mesh m) : mesh(std::move(m)), energy(mesh), problem(mesh) { energy.add_to(problem); }
  };
  auto owner = std::make_shared<Owner>(bumpy_disk(n, 0.2));
  const Eigen::VectorXd base = flatten(tutte_embedding(owner->mesh));
  AppCase c{"param", owner, &owner->problem, nullptr};
  const Owner* o = owner.get();
  c.sample = [o, base](std::mt19937& r) {
    for (;;) {
      Eigen::VectorXd x = base + noise(r, base.size(), 0.03);
      if (o->energy.flipped_faces(x).empty()) return x;
    }
  };
  return c;
}

inline AppCase sphere_case(int subdivisions = 0) {
  struct Owner {
    Mesh mesh;
    SphericalParameterization sphere;
    explicit Owner(Mesh m) : mesh(std::move(m)), sphere(mesh) {}
  };
  auto owner = std::make_shared<Owner>(generate_icosphere(subdivisions));
  AppCase c{"sphere", owner, &owner->sphere.problem(), nullptr};
  const Owner* o = owner.get();
  c.sample = [o](std::mt19937& r) {
    for (;;) {
      Eigen::VectorXd x = noise(r, 2 * o->mesh.num_vertices(), 0.15);
      if (std::isfinite(o->sphere.energy_at(x))) return x;
    }
  };
  return c;
}

inline AppCase smooth_case(int n = 5) {
  struct Owner {
    Mesh mesh;
    Problem<3> problem;
    explicit Owner(Mesh m) : mesh(std::move(m)), problem(mesh) {
      problem.add_term<Op::EV>([](const ElementHandle&, std::span<const Index>, const auto& x) {
        return squared_norm(x[0] - x[1]);
      });
    }
  };
  auto owner = std::make_shared<Owner>(jitter(generate_grid(n), 0.2, 3));
  const Eigen::VectorXd rest = flat3(owner->mesh.positions());
  AppCase c{"smooth", owner, &owner->problem, nullptr};
  c.sample = [rest](std::mt19937& r) { return Eigen::VectorXd(rest + noise(r, rest.size(), 0.3)); };
  return c;
}

inline std::vector<AppCase> all_cases() { return {cloth_case(), param_case(), sphere_case(), smooth_case()}; }

/// Gradient of `problem` at `x`, leaving problem.x() at `x`.
inline Eigen::VectorXd ad_gradient(ProblemBase& problem, const Eigen::VectorXd& x) {
  problem.x() = x;
  problem.eval_terms({false, 1e-9, true});
  return problem.grad();
}

}  // namespace fixture
