#pragma once

#include "tsnmf/linalg.hpp"

namespace tsnmf {

/// Primal pair of the factorization M ~ X Y with X (n x k) and Y (k x m).
template <typename Scalar>
struct FactorState {
  Matrix<Scalar> X;
  Matrix<Scalar> Y;

  Index n() const { return X.rows(); }
  Index m() const { return Y.cols(); }
  Index k() const { return X.cols(); }
};

/// x = vec(X^T): row i of X occupies entries [i*k, (i+1)*k).
template <typename Derived>
Vector<typename Derived::Scalar> vec_xt(const Eigen::MatrixBase<Derived>& x_mat) {
  Matrix<typename Derived::Scalar> xt = x_mat.transpose();
  return Eigen::Map<const Vector<typename Derived::Scalar>>(xt.data(), xt.size());
}

/// y = vec(Y).
template <typename Derived>
Vector<typename Derived::Scalar> vec_y(const Eigen::MatrixBase<Derived>& y_mat) {
  Matrix<typename Derived::Scalar> y = y_mat;
  return Eigen::Map<const Vector<typename Derived::Scalar>>(y.data(), y.size());
}

/// Inverse of vec_xt: the n x k matrix X.
template <typename Scalar>
Matrix<Scalar> unvec_xt(const Vector<Scalar>& x, Index n, Index k) {
  return Eigen::Map<const Matrix<Scalar>>(x.data(), k, n).transpose();
}

template <typename Scalar>
Matrix<Scalar> unvec_y(const Vector<Scalar>& y, Index k, Index m) {
  return Eigen::Map<const Matrix<Scalar>>(y.data(), k, m);
}

template <typename Scalar>
void check_shapes(const FactorState<Scalar>& state, const Matrix<Scalar>& m) {
  if (state.X.cols() != state.Y.rows() || state.X.rows() != m.rows() || state.Y.cols() != m.cols())
    throw std::invalid_argument("factor shapes are inconsistent with M");
}

}  // namespace tsnmf
