#pragma once

// Reference computations used only by the tests. They are deliberately
// slow and direct: dense matrices, QR/LU instead of the normal equations,
// no block structure.

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "tsnmf/ipm.hpp"
#include "tsnmf/rng.hpp"

namespace tsnmf::oracle {

inline Matrix<double> normal_matrix(Rng& rng, Index rows, Index cols) {
  Matrix<double> a(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) a(i, j) = rng.normal();
  return a;
}

inline Matrix<double> uniform_matrix(Rng& rng, Index rows, Index cols, double lo = 0, double hi = 1) {
  Matrix<double> a(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) a(i, j) = lo + (hi - lo) * rng.uniform();
  return a;
}

inline Vector<double> uniform_vector(Rng& rng, Index size, double lo, double hi) {
  return uniform_matrix(rng, size, 1, lo, hi).col(0);
}

struct BruteNnls {
  Vector<double> x;
  double objective = std::numeric_limits<double>::infinity();
};

// min 1/2 ||C x - d||^2, x >= 0, by trying every passive subset: solve the
// unconstrained problem on the subset with a rank-revealing QR and keep the
// best nonnegative candidate. The optimum is always among them.
inline BruteNnls brute_force_nnls(const Matrix<double>& c, const Vector<double>& d) {
  const Index nv = c.cols();
  BruteNnls best;
  for (unsigned mask = 0; mask < (1u << nv); ++mask) {
    std::vector<Index> cols;
    for (Index i = 0; i < nv; ++i)
      if (mask & (1u << i)) cols.push_back(i);
    Vector<double> x = Vector<double>::Zero(nv);
    if (!cols.empty()) {
      Matrix<double> sub(c.rows(), static_cast<Index>(cols.size()));
      for (std::size_t a = 0; a < cols.size(); ++a) sub.col(static_cast<Index>(a)) = c.col(cols[a]);
      const Vector<double> z = sub.colPivHouseholderQr().solve(d);
      if ((z.array() < 0).any()) continue;
      for (std::size_t a = 0; a < cols.size(); ++a) x(cols[a]) = z(static_cast<Index>(a));
    }
    const double f = 0.5 * (c * x - d).squaredNorm();
    if (f < best.objective) {
      best.objective = f;
      best.x = x;
    }
  }
  return best;
}

// The full 2(nk + mk) Newton system in the unknowns (dx, dy, dr, ds):
//   [Q1+rho I  C^T      -I      0 ] [dx]   [r - graX   ]
//   [C         Q2+rho I  0     -I ] [dy] = [s - graY   ]
//   [Diag(r)   0        Diag(x) 0 ] [dr]   [mu - x.*r  ]
//   [0         Diag(s)   0  Diag(y)] [ds]   [mu - y.*s  ]
// Q1, Q2, C are built entry by entry from the second derivatives of
// 1/2 ||X Y - M||^2 in the x = vec(X^T), y = vec(Y) ordering.
inline NewtonDirection<double> dense_newton(const IpmState<double>& st, const Matrix<double>& m_data,
                                            bool full_hessian) {
  const Index n = st.n, m = st.m, k = st.k, nk = n * k, mk = m * k;
  Matrix<double> x_mat(n, k), y_mat(k, m);
  for (Index i = 0; i < n; ++i)
    for (Index l = 0; l < k; ++l) x_mat(i, l) = st.x(i * k + l);
  for (Index j = 0; j < m; ++j)
    for (Index l = 0; l < k; ++l) y_mat(l, j) = st.y(j * k + l);
  const Matrix<double> res = x_mat * y_mat - m_data;

  const Index dim = 2 * (nk + mk);
  Matrix<double> a = Matrix<double>::Zero(dim, dim);
  Vector<double> b(dim);
  // d2f / dX(i,l) dX(i,p) = sum_j Y(l,j) Y(p,j)
  for (Index i = 0; i < n; ++i)
    for (Index l = 0; l < k; ++l)
      for (Index p = 0; p < k; ++p) a(i * k + l, i * k + p) = y_mat.row(l).dot(y_mat.row(p));
  // d2f / dY(l,j) dY(p,j) = sum_i X(i,l) X(i,p)
  for (Index j = 0; j < m; ++j)
    for (Index l = 0; l < k; ++l)
      for (Index p = 0; p < k; ++p) a(nk + j * k + l, nk + j * k + p) = x_mat.col(l).dot(x_mat.col(p));
  // d2f / dY(l,j) dX(i,p) = X(i,l) Y(p,j) + [l == p] res(i,j)
  for (Index j = 0; j < m; ++j)
    for (Index i = 0; i < n; ++i)
      for (Index l = 0; l < k; ++l)
        for (Index p = 0; p < k; ++p) {
          double v = x_mat(i, l) * y_mat(p, j);
          if (full_hessian && l == p) v += res(i, j);
          a(nk + j * k + l, i * k + p) = v;
          a(i * k + p, nk + j * k + l) = v;
        }
  for (Index q = 0; q < nk + mk; ++q) a(q, q) += st.rho;
  for (Index q = 0; q < nk; ++q) a(q, nk + mk + q) = -1;
  for (Index q = 0; q < mk; ++q) a(nk + q, 2 * nk + mk + q) = -1;
  for (Index q = 0; q < nk; ++q) {
    a(nk + mk + q, q) = st.r(q);
    a(nk + mk + q, nk + mk + q) = st.x(q);
  }
  for (Index q = 0; q < mk; ++q) {
    a(2 * nk + mk + q, nk + q) = st.s(q);
    a(2 * nk + mk + q, 2 * nk + mk + q) = st.y(q);
  }

  Vector<double> gx(nk), gy(mk);
  const Matrix<double> gx_mat = res * y_mat.transpose();  // n x k
  const Matrix<double> gy_mat = x_mat.transpose() * res;  // k x m
  for (Index i = 0; i < n; ++i)
    for (Index l = 0; l < k; ++l) gx(i * k + l) = gx_mat(i, l);
  for (Index j = 0; j < m; ++j)
    for (Index l = 0; l < k; ++l) gy(j * k + l) = gy_mat(l, j);
  b << st.r - gx, st.s - gy, (st.mu - st.x.cwiseProduct(st.r).array()).matrix(),
      (st.mu - st.y.cwiseProduct(st.s).array()).matrix();

  const Vector<double> z = a.fullPivLu().solve(b);
  NewtonDirection<double> d;
  d.dx = z.segment(0, nk);
  d.dy = z.segment(nk, mk);
  d.dr = z.segment(nk + mk, nk);
  d.ds = z.segment(2 * nk + mk, mk);
  return d;
}

// E(x, y, r, s; mu) written out coordinate by coordinate.
inline double kkt_error_direct(const Vector<double>& x, const Vector<double>& y, const Vector<double>& r,
                               const Vector<double>& s, const Vector<double>& gx, const Vector<double>& gy,
                               double mu) {
  double st = 0, comp = 0;
  for (Index i = 0; i < x.size(); ++i) {
    st += (gx(i) - r(i)) * (gx(i) - r(i));
    comp += (x(i) * r(i) - mu) * (x(i) * r(i) - mu);
  }
  for (Index j = 0; j < y.size(); ++j) {
    st += (gy(j) - s(j)) * (gy(j) - s(j));
    comp += (y(j) * s(j) - mu) * (y(j) * s(j) - mu);
  }
  return std::max(std::sqrt(st), std::sqrt(comp));
}

// Central differences of f along every coordinate of v.
template <typename F>
Vector<double> central_difference(F&& f, const Vector<double>& v, double h) {
  Vector<double> g(v.size());
  Vector<double> w = v;
  for (Index i = 0; i < v.size(); ++i) {
    const double step = h * std::max(1.0, std::abs(v(i)));
    w(i) = v(i) + step;
    const double up = f(w);
    w(i) = v(i) - step;
    const double down = f(w);
    w(i) = v(i);
    g(i) = (up - down) / (2 * step);
  }
  return g;
}

inline double rel_error(const Vector<double>& got, const Vector<double>& want) {
  const double scale = std::max(want.norm(), std::numeric_limits<double>::min());
  return (got - want).norm() / scale;
}

// Random strictly positive primal-dual point of the given shape.
inline IpmState<double> random_state(Rng& rng, Index n, Index m, Index k, double rho, double mu) {
  IpmState<double> st;
  st.n = n;
  st.m = m;
  st.k = k;
  st.x = uniform_vector(rng, n * k, 0.1, 1.1);
  st.y = uniform_vector(rng, m * k, 0.1, 1.1);
  st.r = uniform_vector(rng, n * k, 0.1, 1.1);
  st.s = uniform_vector(rng, m * k, 0.1, 1.1);
  st.mu = mu;
  st.rho = rho;
  return st;
}

}  // namespace tsnmf::oracle
