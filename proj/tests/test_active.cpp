#include "doctest.h"
#include "oracles.hpp"

#include "meshgrad/active.hpp"
#include "meshgrad/linalg.hpp"
#include "meshgrad/small_matrix.hpp"

#include <Eigen/Eigenvalues>

#include <random>

using namespace meshgrad;

namespace {

template <int K>
using A = ActiveScalar<K, true>;

bool bitwise_symmetric(const Eigen::MatrixXd& h) {
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    for (Eigen::Index j = 0; j < h.cols(); ++j) {
      if (h(i, j) != h(j, i)) return false;
    }
  }
  return true;
}

// Exercises every elementary function in one expression.
template <class S>
S composite(const S& x, const S& y, const S& z) {
  return sqrt(x * x + y * y + 1.0) * exp(0.3 * z) + log(2.0 + sin(x * y)) - cos(z) / (1.5 + y * y) +
         pow(x - z, 3) + abs(y - 2.0);
}

}  // namespace

TEST_CASE("lift seeds unit gradients") {
  const std::array<double, 1> one{2.0};
  const auto a = lift<1>(std::span<const double, 1>(one));
  CHECK(a[0].val == 2.0);
  CHECK(a[0].grad[0] == 1.0);
  CHECK(a[0].hess(0, 0) == 0.0);

  const std::array<double, 3> v{1.0, 2.0, 3.0};
  const auto b = lift<3>(std::span<const double, 3>(v));
  CHECK(b[1].grad == Eigen::Vector3d(0, 1, 0));
  CHECK(b[0].grad + b[1].grad + b[2].grad == Eigen::Vector3d::Ones());
  CHECK(b[2].hess.isZero());
}

TEST_CASE("passive constants carry no derivatives") {
  const A<3> c(4.0);
  CHECK(c.grad.isZero());
  CHECK(c.hess.isZero());
  const auto e = exp(A<1>(0.0));
  CHECK(e.val == 1.0);
  CHECK(e.grad[0] == 0.0);
  CHECK(e.hess(0, 0) == 0.0);
}

TEST_CASE("product and quotient") {
  const auto x = A<2>::variable(2.0, 0);
  const auto y = A<2>::variable(3.0, 1);
  const auto p = x * y;
  CHECK(p.val == 6.0);
  CHECK(p.grad == Eigen::Vector2d(3, 2));
  CHECK(p.hess == (Eigen::Matrix2d() << 0, 1, 1, 0).finished());

  const auto a = A<2>::variable(1.0, 0) + 0.0;
  CHECK(a.val == 1.0);
  CHECK(a.grad == Eigen::Vector2d(1, 0));

  const auto q = A<1>::variable(1.0, 0) / A<1>(2.0);
  CHECK(q.val == 0.5);
  CHECK(q.grad[0] == 0.5);
  CHECK(q.hess(0, 0) == 0.0);
}

TEST_CASE("elementary functions") {
  const auto l = log(A<1>::variable(1.0, 0));
  CHECK(l.val == 0.0);
  CHECK(l.grad[0] == 1.0);
  CHECK(l.hess(0, 0) == -1.0);

  const auto s = sqrt(A<1>::variable(4.0, 0));
  CHECK(s.val == 2.0);
  CHECK(s.grad[0] == 0.25);
  CHECK(s.hess(0, 0) == doctest::Approx(-0.03125).epsilon(1e-15));

  const auto ab = abs(A<1>::variable(0.0, 0));
  CHECK(ab.grad[0] == 0.0);

  const auto p1 = pow(A<1>::variable(3.0, 0), 1);
  CHECK(p1.val == 3.0);
  CHECK(p1.grad[0] == 1.0);
  CHECK(p1.hess(0, 0) == 0.0);
  const auto p0 = pow(A<1>::variable(3.0, 0), 0);
  CHECK(p0.val == 1.0);
  CHECK(p0.grad[0] == 0.0);
}

TEST_CASE("out of domain inputs propagate non-finite values") {
  CHECK_FALSE(std::isfinite(log(A<1>::variable(-1.0, 0)).val));
  CHECK_FALSE(std::isfinite((A<1>::variable(1.0, 0) / A<1>(0.0)).val));
  CHECK_FALSE(std::isfinite(sqrt(A<1>::variable(-4.0, 0)).val));
}

TEST_CASE("elementary functions match finite differences") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(0.2, 3.0);
  using F = std::function<double(double)>;
  struct Case {
    const char* name;
    F passive;
    std::function<A<1>(const A<1>&)> active;
  };
  const std::vector<Case> cases{
      {"sqrt", [](double x) { return std::sqrt(x); }, [](const A<1>& x) { return sqrt(x); }},
      {"log", [](double x) { return std::log(x); }, [](const A<1>& x) { return log(x); }},
      {"exp", [](double x) { return std::exp(x); }, [](const A<1>& x) { return exp(x); }},
      {"sin", [](double x) { return std::sin(x); }, [](const A<1>& x) { return sin(x); }},
      {"cos", [](double x) { return std::cos(x); }, [](const A<1>& x) { return cos(x); }},
      {"abs", [](double x) { return std::abs(x - 1.0); }, [](const A<1>& x) { return abs(x - 1.0); }},
      {"pow3", [](double x) { return std::pow(x, 3); }, [](const A<1>& x) { return pow(x, 3); }},
      {"pow-2", [](double x) { return std::pow(x, -2); }, [](const A<1>& x) { return pow(x, -2); }},
      {"neg", [](double x) { return -x; }, [](const A<1>& x) { return -x; }},
      {"recip", [](double x) { return 1.0 / x; }, [](const A<1>& x) { return 1.0 / x; }},
  };
  for (const auto& c : cases) {
    const std::string name = c.name;
    CAPTURE(name);
    for (int trial = 0; trial < 100; ++trial) {
      const double x = u(rng);
      if (std::abs(x - 1.0) < 1e-3) continue;
      const auto r = c.active(A<1>::variable(x, 0));
      const Eigen::VectorXd x0 = Eigen::VectorXd::Constant(1, x);
      const auto fd = oracle::fd_gradient([&](const Eigen::VectorXd& v) { return c.passive(v[0]); }, x0);
      CHECK(r.val == c.passive(x));
      CHECK(std::abs(r.grad[0] - fd[0]) <= 1e-6 * std::max(1.0, std::abs(fd[0])));
      const auto fdd = oracle::fd_gradient(
          [&](const Eigen::VectorXd& v) { return c.active(A<1>::variable(v[0], 0)).grad[0]; }, x0);
      CHECK(std::abs(r.hess(0, 0) - fdd[0]) <= 1e-5 * std::max(1.0, std::abs(fdd[0])));
    }
  }
}

TEST_CASE("composite function gradient and Hessian") {
  std::mt19937 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::VectorXd x = oracle::random_vector(rng, 3, -1.0, 1.0);
    auto passive = [](const Eigen::VectorXd& v) { return composite(v[0], v[1], v[2]); };
    auto active = [](const Eigen::VectorXd& v) {
      return composite(A<3>::variable(v[0], 0), A<3>::variable(v[1], 1), A<3>::variable(v[2], 2));
    };
    const auto r = active(x);
    CHECK(r.val == passive(x));
    const Eigen::VectorXd fd = oracle::fd_gradient(passive, x);
    CHECK(oracle::rel_error(Eigen::VectorXd(r.grad), fd) <= 1e-6);
    const Eigen::MatrixXd fdh = oracle::fd_jacobian(
        [&](const Eigen::VectorXd& v) { return Eigen::VectorXd(active(v).grad); }, x);
    CHECK(oracle::rel_error(Eigen::MatrixXd(r.hess), fdh) <= 1e-5);
    CHECK(bitwise_symmetric(r.hess));

    // first-order mode agrees exactly with second-order mode
    using G = ActiveScalar<3, false>;
    const auto g = composite(G::variable(x[0], 0), G::variable(x[1], 1), G::variable(x[2], 2));
    CHECK(g.val == r.val);
    CHECK(g.grad == r.grad);
  }
}

TEST_CASE("composition associativity") {
  std::mt19937 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::VectorXd v = oracle::random_vector(rng, 3, -2.0, 2.0);
    const auto a = A<3>::variable(v[0], 0) * A<3>::variable(v[1], 1);
    const auto b = sin(A<3>::variable(v[1], 1));
    const auto c = exp(A<3>::variable(v[2], 2)) * A<3>::variable(v[0], 0);
    const auto l = (a + b) + c;
    const auto r = a + (b + c);
    CHECK(l.val == doctest::Approx(r.val).epsilon(1e-15));
    CHECK(oracle::rel_error(Eigen::Vector3d(l.grad), Eigen::Vector3d(r.grad)) <= 1e-14);
    CHECK(oracle::rel_error(Eigen::Matrix3d(l.hess), Eigen::Matrix3d(r.hess)) <= 1e-14);
  }
}

TEST_CASE("small vectors and matrices") {
  const SmallVec3<double> e1{{1, 0, 0}}, e2{{0, 1, 0}}, e3{{0, 0, 1}};
  const auto m = SmallMat<double, 3, 3>::from_columns(std::array<SmallVec3<double>, 3>{e1, e2, e3});
  CHECK(determinant(m) == 1.0);
  const auto c = cross(e1, e2);
  CHECK(c[2] == 1.0);
  CHECK(norm(SmallVec2<double>{{3, 4}}) == 5.0);

  const auto id = small_inverse_det(SmallMat<double, 2, 2>::identity());
  CHECK(id.det == 1.0);
  CHECK(id.inverse(0, 0) == 1.0);
  CHECK(id.inverse(0, 1) == 0.0);

  // d det / dx on [[x, 0], [0, 1]] at x = 2
  SmallMat<A<1>, 2, 2> mx;
  mx(0, 0) = A<1>::variable(2.0, 0);
  mx(1, 1) = 1.0;
  const auto r = small_inverse_det(mx);
  CHECK(r.det.val == 2.0);
  CHECK(r.det.grad[0] == 1.0);
  CHECK(r.inverse(0, 0).val == 0.5);
  CHECK(r.inverse(0, 0).grad[0] == -0.25);
}

TEST_CASE("small inverse property") {
  std::mt19937 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Vector4d e = oracle::random_vector(rng, 4, -2.0, 2.0);
    SmallMat<double, 2, 2> m;
    m(0, 0) = e[0];
    m(0, 1) = e[1];
    m(1, 0) = e[2];
    m(1, 1) = e[3];
    if (std::abs(determinant(m)) < 1e-2) continue;
    const auto r = small_inverse_det(m);
    const auto prod = r.inverse * m;
    const double scale = std::sqrt(frobenius_squared(m) * frobenius_squared(r.inverse));
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) CHECK(std::abs(prod(i, j) - (i == j ? 1.0 : 0.0)) <= 1e-12 * scale);
    }
  }
}

TEST_CASE("project_psd examples") {
  const Eigen::Matrix2d d = Eigen::Vector2d(2, 3).asDiagonal();
  CHECK(project_psd(d, 1e-9) == Eigen::MatrixXd(d));

  Eigen::Matrix2d h;
  h << 0, 2, 2, 0;
  const Eigen::MatrixXd p = project_psd(h, 1e-9);
  CHECK(oracle::rel_error(p, Eigen::MatrixXd(Eigen::Matrix2d::Ones())) <= 1e-9);

  const Eigen::MatrixXd neg = Eigen::MatrixXd::Constant(1, 1, -5.0);
  CHECK(project_psd(neg, 1e-9)(0, 0) == doctest::Approx(1e-9).epsilon(1e-12));
}

TEST_CASE("project_psd properties on random indefinite matrices") {
  std::mt19937 rng(33);
  for (int k : {1, 2, 3, 6, 9, 12}) {
    for (int trial = 0; trial < 40; ++trial) {
      Eigen::MatrixXd m = Eigen::MatrixXd::NullaryExpr(k, k, [&] { return std::normal_distribution<double>()(rng); });
      m = (m + m.transpose()).eval();
      const double floor = 1e-6;
      const Eigen::MatrixXd p = project_psd(m, floor);
      CHECK(bitwise_symmetric(p));
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(p);
      CHECK(ref.eigenvalues().minCoeff() >= floor - 1e-12 * std::max(1.0, m.norm()));

      // eigenvalues above the floor are preserved
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> orig(m);
      const Eigen::VectorXd expect = orig.eigenvalues().cwiseMax(floor);
      CHECK((ref.eigenvalues() - expect).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, m.norm()));
    }
  }
}

TEST_CASE("jacobi eigen decomposition reconstructs the input") {
  std::mt19937 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Random(6, 6);
    m = (m + m.transpose()).eval();
    const SymmetricEigen e = jacobi_eigen(m);
    const Eigen::MatrixXd r = e.vectors * e.values.asDiagonal() * e.vectors.transpose();
    CHECK(oracle::rel_error(r, m) <= 1e-12);
    CHECK(e.sweeps <= 50);
    CHECK((e.vectors.transpose() * e.vectors - Eigen::MatrixXd::Identity(6, 6)).norm() <= 1e-12);
  }
}
