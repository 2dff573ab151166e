#pragma once

#include <Eigen/Dense>
#include <complex>

#include "qanneal/errors.hpp"

namespace qanneal {

using Complex = std::complex<double>;

// Eigendecomposition of a real symmetric matrix, eigenvalues ascending.
struct EigSystem {
  Eigen::VectorXd evals;
  Eigen::MatrixXd evecs;  // columns are orthonormal eigenvectors
};

inline EigSystem eig_sym(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("symmetric eigendecomposition failed to converge");
  }
  return EigSystem{solver.eigenvalues(), solver.eigenvectors()};
}

// y = M x for real M and complex x, via two real matrix-vector products
// (avoids materializing a complex copy of M).
inline Eigen::VectorXcd real_mat_apply(const Eigen::MatrixXd& m,
                                       const Eigen::VectorXcd& x) {
  Eigen::VectorXcd y(m.rows());
  y.real() = m * x.real();
  y.imag() = m * x.imag();
  return y;
}

// y = M^T x for real M and complex x.
inline Eigen::VectorXcd real_mat_apply_transposed(const Eigen::MatrixXd& m,
                                                  const Eigen::VectorXcd& x) {
  Eigen::VectorXcd y(m.cols());
  y.real() = m.transpose() * x.real();
  y.imag() = m.transpose() * x.imag();
  return y;
}

// y_i = diag_i * x_i for real diag and complex x.
inline Eigen::VectorXcd diag_apply(const Eigen::VectorXd& diag,
                                   const Eigen::VectorXcd& x) {
  Eigen::VectorXcd y(x.size());
  y.real() = diag.cwiseProduct(x.real());
  y.imag() = diag.cwiseProduct(x.imag());
  return y;
}

}  // namespace qanneal
