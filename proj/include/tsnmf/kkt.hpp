#pragma once

#include <cmath>

#include "tsnmf/factor_state.hpp"

namespace tsnmf {

/// 1/2 ||X Y - M||_F^2
template <typename Scalar>
Scalar objective(const FactorState<Scalar>& state, const Matrix<Scalar>& m) {
  check_shapes(state, m);
  return Scalar(0.5) * (state.X * state.Y - m).squaredNorm();
}

template <typename Scalar>
struct Gradients {
  Vector<Scalar> gra_x;  // vec(Y (XY - M)^T), length n*k
  Vector<Scalar> gra_y;  // vec(X^T (XY - M)), length m*k
};

template <typename Scalar>
Gradients<Scalar> gradients_from_residual(const FactorState<Scalar>& state, const Matrix<Scalar>& residual) {
  Gradients<Scalar> g;
  const Matrix<Scalar> gx = state.Y * residual.transpose();  // k x n, already vec(X^T) ordered
  const Matrix<Scalar> gy = state.X.transpose() * residual;  // k x m
  g.gra_x = Eigen::Map<const Vector<Scalar>>(gx.data(), gx.size());
  g.gra_y = Eigen::Map<const Vector<Scalar>>(gy.data(), gy.size());
  return g;
}

template <typename Scalar>
Gradients<Scalar> assemble_gradients(const FactorState<Scalar>& state, const Matrix<Scalar>& m) {
  check_shapes(state, m);
  return gradients_from_residual(state, Matrix<Scalar>(state.X * state.Y - m));
}

/// Violation of the mu-perturbed KKT system: the larger of the Euclidean
/// norms of the stationarity residual (graX - r, graY - s) and the
/// complementarity residual (x.*r - mu, y.*s - mu). mu = 0 gives the
/// global stopping metric.
template <typename Scalar>
Scalar kkt_error(const Vector<Scalar>& x, const Vector<Scalar>& y, const Vector<Scalar>& r,
                 const Vector<Scalar>& s, const Vector<Scalar>& gra_x, const Vector<Scalar>& gra_y,
                 Scalar mu) {
  const Scalar stationarity = std::sqrt((gra_x - r).squaredNorm() + (gra_y - s).squaredNorm());
  const Scalar comp = std::sqrt((x.cwiseProduct(r).array() - mu).matrix().squaredNorm() +
                                (y.cwiseProduct(s).array() - mu).matrix().squaredNorm());
  return std::max(stationarity, comp);
}

/// KKT violation of a primal-only iterate, with duals reconstructed as
/// r = max(graX, 0), s = max(graY, 0).
template <typename Scalar>
Scalar kkt_error_primal_only(const FactorState<Scalar>& state, const Matrix<Scalar>& m) {
  const auto g = assemble_gradients(state, m);
  const Vector<Scalar> r = g.gra_x.cwiseMax(Scalar(0));
  const Vector<Scalar> s = g.gra_y.cwiseMax(Scalar(0));
  return kkt_error<Scalar>(vec_xt(state.X), vec_y(state.Y), r, s, g.gra_x, g.gra_y, Scalar(0));
}

}  // namespace tsnmf
