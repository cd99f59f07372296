#include "meshgrad/linalg.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <stdexcept>

namespace meshgrad {

SymmetricEigen jacobi_eigen(const Eigen::Ref<const Eigen::MatrixXd>& input, double tol,
                            int max_sweeps) {
  if (input.rows() != input.cols()) throw std::invalid_argument("jacobi_eigen: matrix not square");
  const Eigen::Index n = input.rows();
  Eigen::MatrixXd a = input;
  SymmetricEigen out;
  out.vectors = Eigen::MatrixXd::Identity(n, n);
  const double scale = a.norm();

  auto off_norm = [&] {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i != j) s += a(i, j) * a(i, j);
      }
    }
    return std::sqrt(s);
  };

  for (; out.sweeps < max_sweeps; ++out.sweeps) {
    if (off_norm() <= tol * scale) break;
    for (Eigen::Index p = 0; p + 1 < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = out.vectors(k, p);
          const double vkq = out.vectors(k, q);
          out.vectors(k, p) = c * vkp - s * vkq;
          out.vectors(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  out.values = a.diagonal();
  return out;
}

void project_psd_inplace(Eigen::Ref<Eigen::MatrixXd> h, double floor) {
  // H - floor I admits a Cholesky factor exactly when every eigenvalue is
  // above the floor, in which case clamping is the identity.
  const Eigen::Index n = h.rows();
  Eigen::LLT<Eigen::MatrixXd> llt(h - floor * Eigen::MatrixXd::Identity(n, n));
  if (llt.info() == Eigen::Success) return;
  const SymmetricEigen eig = jacobi_eigen(h);
  if (eig.values.minCoeff() >= floor) return;
  const Eigen::VectorXd clamped = eig.values.cwiseMax(floor);
  const Eigen::MatrixXd r = eig.vectors * clamped.asDiagonal() * eig.vectors.transpose();
  h = 0.5 * (r + r.transpose());
}

Eigen::MatrixXd project_psd(const Eigen::Ref<const Eigen::MatrixXd>& h, double floor) {
  Eigen::MatrixXd out = h;
  project_psd_inplace(out, floor);
  return out;
}

}  // namespace meshgrad
