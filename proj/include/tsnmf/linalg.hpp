#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "tsnmf/errors.hpp"

namespace tsnmf {

using Index = Eigen::Index;

// Column-major throughout. With this layout vec(A) is just A's storage, so
// x = vec(X^T) is the storage of the k x n matrix X^T.
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Derived>
void require_finite(const Eigen::DenseBase<Derived>& a, const char* what) {
  if (!a.allFinite()) throw NonFiniteInput(what);
}

namespace detail {

template <typename Derived>
bool is_symmetric(const Eigen::MatrixBase<Derived>& a, typename Derived::Scalar rel_tol) {
  if (a.rows() != a.cols()) return false;
  const auto scale = std::max<typename Derived::Scalar>(a.cwiseAbs().maxCoeff(), 1);
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

}  // namespace detail

/// Lower Cholesky factor L with L L^T = A. No pivoting and no
/// regularization; a non-positive pivot is reported as NotPositiveDefinite.
template <typename Derived>
Matrix<typename Derived::Scalar> cholesky_factor(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  if (!detail::is_symmetric(a, Scalar(1e-12)))
    throw std::invalid_argument("cholesky_factor: matrix is not symmetric");
  Eigen::LLT<Matrix<Scalar>, Eigen::Lower> llt(a);
  if (llt.info() != Eigen::Success) throw NotPositiveDefinite();
  // LLT reports success on a singular semidefinite input with a zero pivot.
  Matrix<Scalar> l = llt.matrixL();
  if ((l.diagonal().array() <= Scalar(0)).any() || !l.allFinite()) throw NotPositiveDefinite();
  return l;
}

/// Solves L Z = B, or L^T Z = B when `transposed`, for lower-triangular L.
template <typename DerivedL, typename DerivedB>
Matrix<typename DerivedL::Scalar> solve_triangular(const Eigen::MatrixBase<DerivedL>& l,
                                                   const Eigen::MatrixBase<DerivedB>& b,
                                                   bool transposed) {
  using Scalar = typename DerivedL::Scalar;
  if (l.rows() != l.cols() || l.rows() != b.rows())
    throw std::invalid_argument("solve_triangular: shape mismatch");
  for (Index i = 0; i < l.rows(); ++i)
    if (l(i, i) == Scalar(0)) throw SingularTriangular(i);
  Matrix<Scalar> z = b;
  if (transposed)
    l.template triangularView<Eigen::Lower>().transpose().solveInPlace(z);
  else
    l.template triangularView<Eigen::Lower>().solveInPlace(z);
  return z;
}

template <typename DerivedA, typename DerivedB>
Vector<typename DerivedA::Scalar> spd_solve(const Eigen::MatrixBase<DerivedA>& a,
                                            const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  if (a.rows() != a.cols() || a.rows() != b.rows())
    throw std::invalid_argument("spd_solve: shape mismatch");
  Eigen::LLT<Matrix<Scalar>, Eigen::Lower> llt(a);
  if (llt.info() != Eigen::Success) throw NotPositiveDefinite();
  if ((llt.matrixLLT().diagonal().array() <= Scalar(0)).any()) throw NotPositiveDefinite();
  return llt.solve(b);
}

/// Cholesky factors of a block-diagonal SPD matrix with equal k x k blocks.
/// The factors are packed side by side in a k x (k * num_blocks) matrix.
template <typename Scalar>
class BlockDiagFactor {
 public:
  BlockDiagFactor() = default;
  BlockDiagFactor(Index block_dim, Index num_blocks)
      : block_dim_(block_dim), num_blocks_(num_blocks), factors_(block_dim, block_dim * num_blocks) {}

  Index block_dim() const { return block_dim_; }
  Index num_blocks() const { return num_blocks_; }

  auto factor(Index b) const { return factors_.middleCols(b * block_dim_, block_dim_); }
  auto factor(Index b) { return factors_.middleCols(b * block_dim_, block_dim_); }

  // L_b Z = B
  template <typename Derived>
  void solve_lower_in_place(Index b, Eigen::MatrixBase<Derived>& rhs) const {
    factor(b).template triangularView<Eigen::Lower>().solveInPlace(rhs);
  }
  template <typename Derived>
  void solve_lower_in_place(Index b, Eigen::MatrixBase<Derived>&& rhs) const {
    factor(b).template triangularView<Eigen::Lower>().solveInPlace(rhs);
  }
  // L_b^T Z = B
  template <typename Derived>
  void solve_upper_in_place(Index b, Eigen::MatrixBase<Derived>& rhs) const {
    factor(b).template triangularView<Eigen::Lower>().adjoint().solveInPlace(rhs);
  }
  template <typename Derived>
  void solve_upper_in_place(Index b, Eigen::MatrixBase<Derived>&& rhs) const {
    factor(b).template triangularView<Eigen::Lower>().adjoint().solveInPlace(rhs);
  }

  /// Solves the whole block-diagonal system for a stacked vector of length
  /// k * num_blocks.
  Vector<Scalar> solve(const Vector<Scalar>& rhs) const {
    Vector<Scalar> z = rhs;
    for (Index b = 0; b < num_blocks_; ++b) {
      auto seg = z.segment(b * block_dim_, block_dim_);
      solve_lower_in_place(b, seg);
      solve_upper_in_place(b, seg);
    }
    return z;
  }

 private:
  Index block_dim_ = 0;
  Index num_blocks_ = 0;
  Matrix<Scalar> factors_;
};

/// Factors the blocks packed side by side in a k x (k * N) matrix.
template <typename Scalar>
BlockDiagFactor<Scalar> block_diag_factor(const Matrix<Scalar>& packed_blocks) {
  const Index k = packed_blocks.rows();
  if (k == 0 || packed_blocks.cols() % k != 0)
    throw std::invalid_argument("block_diag_factor: packed blocks must be k x (k*N)");
  const Index count = packed_blocks.cols() / k;
  BlockDiagFactor<Scalar> out(k, count);
  for (Index b = 0; b < count; ++b) {
    try {
      out.factor(b) = cholesky_factor(packed_blocks.middleCols(b * k, k));
    } catch (const NotPositiveDefinite&) {
      throw NotPositiveDefinite(b);
    }
  }
  return out;
}

template <typename Scalar>
BlockDiagFactor<Scalar> block_diag_factor(const std::vector<Matrix<Scalar>>& blocks) {
  if (blocks.empty()) throw std::invalid_argument("block_diag_factor: no blocks");
  const Index k = blocks.front().rows();
  Matrix<Scalar> packed(k, k * static_cast<Index>(blocks.size()));
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (blocks[b].rows() != k || blocks[b].cols() != k)
      throw std::invalid_argument("block_diag_factor: blocks must share one k x k shape");
    packed.middleCols(static_cast<Index>(b) * k, k) = blocks[b];
  }
  return block_diag_factor(packed);
}

}  // namespace tsnmf
