#pragma once

#include <Eigen/Core>

namespace meshgrad {

struct SymmetricEigen {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;  // columns
  int sweeps = 0;
};

/// Cyclic Jacobi eigendecomposition of a small symmetric matrix. Sweeps stop
/// once the off-diagonal Frobenius norm falls below `tol` times the norm of
/// the input, or after `max_sweeps`.
SymmetricEigen jacobi_eigen(const Eigen::Ref<const Eigen::MatrixXd>& a, double tol = 1e-12,
                            int max_sweeps = 50);

/// Q max(L, floor) Q^T for symmetric H = Q L Q^T. Matrices whose
/// eigenvalues are all at least `floor` are returned unchanged, and the
/// result is exactly symmetric.
Eigen::MatrixXd project_psd(const Eigen::Ref<const Eigen::MatrixXd>& h, double floor);

/// In-place variant used by the assembly loops on stack-sized buffers.
void project_psd_inplace(Eigen::Ref<Eigen::MatrixXd> h, double floor);

}  // namespace meshgrad
