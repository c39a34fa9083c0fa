#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tsnmf/kkt.hpp"
#include "tsnmf/timer.hpp"

namespace tsnmf {

struct IpmParams {
  double tau = 0.9;         // fraction-to-the-boundary
  double eta = 0.5;         // Armijo sufficient-decrease constant
  double sigma_cap = 0.99;  // upper bound on the centering parameter
  double sigma_c = 0.01;    // switch to the full Hessian when sigma <= sigma_c
  double eps_tol = 1e-6;    // stop when E(.;0) <= eps_tol
  int max_iterations = 500; // total inner iterations
  // Inner iterations allowed per value of mu before the outer update is
  // forced; 0 means no limit (the inner loop then runs until E(.;mu) <= mu).
  int max_inner_iterations = 5;
  double time_cap_s = std::numeric_limits<double>::infinity();
  int max_backtracks = 60;
  bool allow_full_hessian = true;  // false: Gauss-Newton coupling only

  void validate() const {
    if (!(tau > 0 && tau < 1)) throw std::invalid_argument("tau must lie in (0,1)");
    if (!(eta > 0 && eta < 1)) throw std::invalid_argument("eta must lie in (0,1)");
    if (!(sigma_cap > 0 && sigma_cap < 1)) throw std::invalid_argument("sigma_cap must lie in (0,1)");
    if (!(eps_tol > 0)) throw std::invalid_argument("eps_tol must be positive");
    if (max_iterations < 0) throw std::invalid_argument("max_iterations must be nonnegative");
    if (max_inner_iterations < 0) throw std::invalid_argument("max_inner_iterations must be nonnegative");
  }
};

/// Primal-dual iterate. x = vec(X^T), y = vec(Y), r = vec(R^T), s = vec(S).
template <typename Scalar>
struct IpmState {
  Index n = 0, m = 0, k = 0;
  Vector<Scalar> x, y, r, s;
  Scalar mu = 0;
  Scalar rho = 0;
  bool use_full_hessian = false;

  FactorState<Scalar> factors() const { return {unvec_xt(x, n, k), unvec_y(y, k, m)}; }

  Scalar min_entry() const {
    return std::min({x.minCoeff(), y.minCoeff(), r.minCoeff(), s.minCoeff()});
  }

  void validate() const {
    if (x.size() != n * k || r.size() != n * k || y.size() != m * k || s.size() != m * k)
      throw std::invalid_argument("IpmState: vector lengths do not match (n, m, k)");
    if (!(min_entry() > Scalar(0))) throw NonPositiveInput("IpmState: iterate is not strictly positive");
  }
};

template <typename Scalar>
struct NewtonDirection {
  Vector<Scalar> dx, dy, dr, ds;
};

enum class Coupling { GaussNewton, Full };

/// The (dx, dy) system left after eliminating dr and ds:
///   [R1  C^T] [dx]   [mu/x - graX]
///   [C   R2 ] [dy] = [mu/y - graY]
/// R1 and R2 are kept as packed k x k blocks; the coupling is regenerated
/// block row by block row from X, Y and the residual.
template <typename Scalar>
struct ReducedSystem {
  Index n = 0, m = 0, k = 0;
  Coupling coupling = Coupling::GaussNewton;
  Matrix<Scalar> r1;        // k x (k n)
  Matrix<Scalar> r2;        // k x (k m)
  Matrix<Scalar> xt;        // X^T, k x n
  Matrix<Scalar> y;         // k x m
  Matrix<Scalar> residual;  // X Y - M, n x m
  Gradients<Scalar> grad;
  Vector<Scalar> rhs_x, rhs_y;  // -grad(phi)

  /// Block row i of C^T (k x mk); block j is y_j x_i^T, plus
  /// (X_i Y_j - M_ij) I for the full coupling.
  void coupling_row(Index i, Eigen::Ref<Matrix<Scalar>> out) const {
    for (Index j = 0; j < m; ++j) {
      auto blk = out.middleCols(j * k, k);
      blk.noalias() = y.col(j) * xt.col(i).transpose();
      if (coupling == Coupling::Full) blk.diagonal().array() += residual(i, j);
    }
  }
};

template <typename Scalar>
ReducedSystem<Scalar> assemble_reduced_system(const IpmState<Scalar>& st, const Matrix<Scalar>& m_data,
                                              bool full_hessian) {
  ReducedSystem<Scalar> sys;
  sys.n = st.n;
  sys.m = st.m;
  sys.k = st.k;
  const Index n = st.n, m = st.m, k = st.k;
  sys.coupling = full_hessian ? Coupling::Full : Coupling::GaussNewton;
  sys.xt = Eigen::Map<const Matrix<Scalar>>(st.x.data(), k, n);
  sys.y = Eigen::Map<const Matrix<Scalar>>(st.y.data(), k, m);
  if (m_data.rows() != n || m_data.cols() != m) throw std::invalid_argument("M shape does not match state");
  sys.residual.noalias() = sys.xt.transpose() * sys.y;
  sys.residual -= m_data;

  const Matrix<Scalar> gram_y = sys.y * sys.y.transpose();
  const Matrix<Scalar> gram_x = sys.xt * sys.xt.transpose();
  const Vector<Scalar> dx_diag = st.r.cwiseQuotient(st.x);
  const Vector<Scalar> dy_diag = st.s.cwiseQuotient(st.y);
  sys.r1 = gram_y.replicate(1, n);
  for (Index i = 0; i < n; ++i)
    sys.r1.middleCols(i * k, k).diagonal() += (dx_diag.segment(i * k, k).array() + st.rho).matrix();
  sys.r2 = gram_x.replicate(1, m);
  for (Index j = 0; j < m; ++j)
    sys.r2.middleCols(j * k, k).diagonal() += (dy_diag.segment(j * k, k).array() + st.rho).matrix();

  FactorState<Scalar> fs{sys.xt.transpose(), sys.y};
  sys.grad = gradients_from_residual(fs, sys.residual);
  sys.rhs_x = st.mu * st.x.cwiseInverse() - sys.grad.gra_x;
  sys.rhs_y = st.mu * st.y.cwiseInverse() - sys.grad.gra_y;
  return sys;
}

/// Block elimination of the reduced system. With R1 = L L^T block by block
/// (P = L^T), the Schur complement S = R2 - (C P^-1)(C P^-1)^T is formed in
/// row-block chunks and Cholesky-factored; any right-hand side then costs
/// O(nmk) flops.
template <typename Scalar>
class NewtonSolver {
 public:
  explicit NewtonSolver(ReducedSystem<Scalar> sys, Index chunk_blocks = 256) : sys_(std::move(sys)) {
    const Index n = sys_.n, m = sys_.m, k = sys_.k, mk = m * k;
    p_ = block_diag_factor(sys_.r1);

    Matrix<Scalar> schur = Matrix<Scalar>::Zero(mk, mk);
    for (Index j = 0; j < m; ++j) schur.block(j * k, j * k, k, k) = sys_.r2.middleCols(j * k, k);

    const Index chunk = std::max<Index>(1, std::min(chunk_blocks, n));
    Matrix<Scalar> v(chunk * k, mk);
    for (Index start = 0; start < n; start += chunk) {
      const Index count = std::min(chunk, n - start);
      for (Index c = 0; c < count; ++c) {
        auto rows = v.middleRows(c * k, k);
        sys_.coupling_row(start + c, rows);
        p_.solve_lower_in_place(start + c, rows);
      }
      schur.template selfadjointView<Eigen::Lower>().rankUpdate(v.topRows(count * k).transpose(), Scalar(-1));
    }
    schur_.compute(schur);
    if (schur_.info() != Eigen::Success || !(schur_.matrixLLT().diagonal().array() > Scalar(0)).all() ||
        !schur_.matrixLLT().allFinite())
      throw SchurNotPositiveDefinite();
  }

  const ReducedSystem<Scalar>& system() const { return sys_; }

  /// Solves [R1 C^T; C R2] (dx, dy) = (b1, b2).
  std::pair<Vector<Scalar>, Vector<Scalar>> solve(const Vector<Scalar>& b1, const Vector<Scalar>& b2) const {
    const Index n = sys_.n, m = sys_.m, k = sys_.k;
    // u_i = R1_i^{-1} b1_i
    Matrix<Scalar> u = Eigen::Map<const Matrix<Scalar>>(b1.data(), k, n);
    for (Index i = 0; i < n; ++i) {
      auto col = u.col(i);
      p_.solve_lower_in_place(i, col);
      p_.solve_upper_in_place(i, col);
    }
    // b2 - C R1^{-1} b1; block j of C u is (X^T U^T) y_j (+ (U Res)_j).
    Matrix<Scalar> cu = (sys_.xt * u.transpose()) * sys_.y;
    if (sys_.coupling == Coupling::Full) cu.noalias() += u * sys_.residual;
    Vector<Scalar> rhs2 = b2 - Eigen::Map<const Vector<Scalar>>(cu.data(), cu.size());
    Vector<Scalar> dy = schur_.solve(rhs2);

    // dx = R1^{-1} (b1 - C^T dy); block i of C^T dy is (Y DY^T) x_i (+ (DY Res^T)_i).
    const Eigen::Map<const Matrix<Scalar>> dy_mat(dy.data(), k, m);
    Matrix<Scalar> ct_dy = (sys_.y * dy_mat.transpose()) * sys_.xt;
    if (sys_.coupling == Coupling::Full) ct_dy.noalias() += dy_mat * sys_.residual.transpose();
    Matrix<Scalar> w = Eigen::Map<const Matrix<Scalar>>(b1.data(), k, n) - ct_dy;
    for (Index i = 0; i < n; ++i) {
      auto col = w.col(i);
      p_.solve_lower_in_place(i, col);
      p_.solve_upper_in_place(i, col);
    }
    Vector<Scalar> dx = Eigen::Map<const Vector<Scalar>>(w.data(), w.size());
    return {std::move(dx), std::move(dy)};
  }

 private:
  ReducedSystem<Scalar> sys_;
  BlockDiagFactor<Scalar> p_;
  Eigen::LLT<Matrix<Scalar>, Eigen::Lower> schur_;
};

/// Direction for barrier parameter `mu` at `st` with gradients `grad`,
/// reusing the factorization held by `solver`. dr and ds come from the
/// complementarity rows: x.*dr + r.*dx = mu - x.*r.
template <typename Scalar>
NewtonDirection<Scalar> newton_direction(const NewtonSolver<Scalar>& solver, const IpmState<Scalar>& st,
                                         const Gradients<Scalar>& grad, Scalar mu) {
  NewtonDirection<Scalar> d;
  const Vector<Scalar> b1 = mu * st.x.cwiseInverse() - grad.gra_x;
  const Vector<Scalar> b2 = mu * st.y.cwiseInverse() - grad.gra_y;
  std::tie(d.dx, d.dy) = solver.solve(b1, b2);
  d.dr = (mu * st.x.cwiseInverse() - st.r - st.r.cwiseQuotient(st.x).cwiseProduct(d.dx)).eval();
  d.ds = (mu * st.y.cwiseInverse() - st.s - st.s.cwiseQuotient(st.y).cwiseProduct(d.dy)).eval();
  return d;
}

template <typename Scalar>
NewtonDirection<Scalar> solve_newton(const NewtonSolver<Scalar>& solver, const IpmState<Scalar>& st) {
  return newton_direction(solver, st, solver.system().grad, st.mu);
}

namespace detail {

// Largest alpha in (0, 1] with v + alpha dv >= (1 - tau) v.
template <typename Scalar>
Scalar max_step(const Vector<Scalar>& v, const Vector<Scalar>& dv, Scalar tau) {
  Scalar alpha = 1;
  for (Index i = 0; i < v.size(); ++i)
    if (dv(i) < Scalar(0)) alpha = std::min(alpha, -tau * v(i) / dv(i));
  return alpha;
}

}  // namespace detail

/// Fraction-to-the-boundary step limits (alpha1_max for (x, y),
/// alpha2_max for (r, s)).
template <typename Scalar>
std::pair<Scalar, Scalar> fraction_to_boundary(const IpmState<Scalar>& st, const NewtonDirection<Scalar>& d,
                                               Scalar tau) {
  if (!(tau > 0 && tau <= 1)) throw std::invalid_argument("fraction_to_boundary: tau must lie in (0,1]");
  const Scalar a1 = std::min(detail::max_step(st.x, d.dx, tau), detail::max_step(st.y, d.dy, tau));
  const Scalar a2 = std::min(detail::max_step(st.r, d.dr, tau), detail::max_step(st.s, d.ds, tau));
  return {a1, a2};
}

/// Barrier merit 1/2 ||mat(x)^T mat(y) - M||^2 - mu sum log x - mu sum log y.
template <typename Scalar>
Scalar merit_phi(const Vector<Scalar>& x, const Vector<Scalar>& y, const Matrix<Scalar>& m_data, Index k,
                 Scalar mu) {
  if (!(x.size() ? x.minCoeff() > Scalar(0) : true) || !(y.size() ? y.minCoeff() > Scalar(0) : true))
    throw NonPositiveInput("merit_phi: x and y must be strictly positive");
  const Index n = x.size() / k, m = y.size() / k;
  const Eigen::Map<const Matrix<Scalar>> xt(x.data(), k, n);
  const Eigen::Map<const Matrix<Scalar>> ym(y.data(), k, m);
  const Scalar f = Scalar(0.5) * (xt.transpose() * ym - m_data).squaredNorm();
  if (mu == Scalar(0)) return f;
  return f - mu * (x.array().log().sum() + y.array().log().sum());
}

/// grad(phi) = (graX - mu/x, graY - mu/y).
template <typename Scalar>
std::pair<Vector<Scalar>, Vector<Scalar>> merit_gradient(const Gradients<Scalar>& g, const Vector<Scalar>& x,
                                                         const Vector<Scalar>& y, Scalar mu) {
  return {g.gra_x - mu * x.cwiseInverse(), g.gra_y - mu * y.cwiseInverse()};
}

/// phi(x + a dx, y + a dy) - phi(x, y), evaluated without the cancellation
/// of subtracting two nearly equal merit values.
template <typename Scalar>
Scalar merit_change(const IpmState<Scalar>& st, const NewtonDirection<Scalar>& d, const Matrix<Scalar>& residual,
                    Scalar alpha, Scalar mu) {
  const Index n = st.n, m = st.m, k = st.k;
  const Eigen::Map<const Matrix<Scalar>> xt(st.x.data(), k, n);
  const Eigen::Map<const Matrix<Scalar>> ym(st.y.data(), k, m);
  const Eigen::Map<const Matrix<Scalar>> dxt(d.dx.data(), k, n);
  const Eigen::Map<const Matrix<Scalar>> dym(d.dy.data(), k, m);
  // (X + a dX)(Y + a dY) - XY = a (dX Y + X dY) + a^2 dX dY
  Matrix<Scalar> dres = alpha * (dxt.transpose() * ym);
  dres.noalias() += alpha * (xt.transpose() * dym);
  dres.noalias() += (alpha * alpha) * (dxt.transpose() * dym);
  Scalar change = residual.cwiseProduct(dres).sum() + Scalar(0.5) * dres.squaredNorm();
  if (mu != Scalar(0)) {
    const Scalar logs = (alpha * d.dx.cwiseQuotient(st.x)).array().log1p().sum() +
                        (alpha * d.dy.cwiseQuotient(st.y)).array().log1p().sum();
    change -= mu * logs;
  }
  return change;
}

template <typename Scalar>
struct ArmijoResult {
  Scalar alpha1 = 0;
  int t = 0;
  Scalar merit_change = 0;  // phi(accepted) - phi(current)
};

/// Backtracks alpha1 = alpha1_max / 2^t until
///   phi(x + alpha1 dx, y + alpha1 dy) <= phi(x, y) + eta alpha1 slope
/// with slope = (dx, dy)^T grad(phi).
template <typename Scalar>
ArmijoResult<Scalar> armijo_search(const IpmState<Scalar>& st, const NewtonDirection<Scalar>& d,
                                   const Matrix<Scalar>& residual, Scalar alpha1_max, Scalar mu, Scalar eta,
                                   Scalar slope, int max_backtracks = 60) {
  ArmijoResult<Scalar> res;
  Scalar alpha = alpha1_max;
  for (int t = 0; t <= max_backtracks; ++t, alpha *= Scalar(0.5)) {
    const Scalar change = merit_change(st, d, residual, alpha, mu);
    if (change <= eta * alpha * slope) {
      res.alpha1 = alpha;
      res.t = t;
      res.merit_change = change;
      return res;
    }
  }
  throw LineSearchStall("Armijo backtracking exceeded " + std::to_string(max_backtracks) + " halvings");
}

/// sigma = min((mu_aff / mu_current)^3, cap).
template <typename Scalar>
Scalar sigma_from_mu(Scalar mu_aff, Scalar mu_current, Scalar cap) {
  const Scalar ratio = mu_aff / mu_current;
  return std::min(ratio * ratio * ratio, cap);
}

template <typename Scalar>
struct PredictorResult {
  Scalar sigma = 0;
  Scalar mu_aff = 0;
  Scalar mu_current = 0;
  Scalar alpha1_aff = 0;
  Scalar alpha2_aff = 0;
};

/// Affine-scaling probe: the mu = 0 direction on the factorization in
/// `solver`, its longest feasible steps (tau = 1), and the centering
/// parameter derived from the complementarity reached along it.
template <typename Scalar>
PredictorResult<Scalar> predictor_sigma(const IpmState<Scalar>& st, const NewtonSolver<Scalar>& solver,
                                        const Gradients<Scalar>& grad, Scalar sigma_cap) {
  const auto d = newton_direction(solver, st, grad, Scalar(0));
  PredictorResult<Scalar> p;
  std::tie(p.alpha1_aff, p.alpha2_aff) = fraction_to_boundary(st, d, Scalar(1));
  const auto count = static_cast<Scalar>(st.x.size() + st.y.size());
  p.mu_aff = ((st.x + p.alpha1_aff * d.dx).dot(st.r + p.alpha2_aff * d.dr) +
              (st.y + p.alpha1_aff * d.dy).dot(st.s + p.alpha2_aff * d.ds)) /
             count;
  p.mu_current = (st.x.dot(st.r) + st.y.dot(st.s)) / count;
  p.sigma = sigma_from_mu(std::max(p.mu_aff, Scalar(0)), p.mu_current, sigma_cap);
  return p;
}

/// Use the full Hessian for the next inner loop iff sigma <= sigma_c.
inline bool hessian_switch_policy(double sigma, double sigma_c) { return sigma <= sigma_c; }

/// A full-Hessian direction that is not a descent direction for phi drops
/// the flag (and the direction is recomputed with the Gauss-Newton coupling).
inline bool keep_full_hessian(bool flag, double slope) { return flag && slope < 0; }

enum class IpmStatus { Converged, IterationCap, TimeCap, LineSearchStall, Error };

inline const char* to_string(IpmStatus s) {
  switch (s) {
    case IpmStatus::Converged: return "converged";
    case IpmStatus::IterationCap: return "iteration_cap";
    case IpmStatus::TimeCap: return "time_cap";
    case IpmStatus::LineSearchStall: return "line_search_stall";
    case IpmStatus::Error: return "error";
  }
  return "unknown";
}

struct IpmRecord {
  int iteration = 0;  // inner iteration count after this step
  int outer = 0;
  double wall_time = 0;
  double kkt0 = 0;      // E(.;0) at the accepted point
  double kkt_mu = 0;    // E(.;mu) at the accepted point
  double mu = 0;
  double alpha1 = 0;
  double alpha2 = 0;
  int t = 0;
  double phi_before = 0;
  double phi_after = 0;
  double merit_change = 0;  // phi_after - phi_before, cancellation-free
  double slope = 0;         // (dx, dy)^T grad(phi) at the step origin
  double eta = 0;
  double objective = 0;
  bool full_hessian = false;  // direction used the full coupling
  bool fell_back = false;     // full-Hessian direction rejected this step
};

struct IpmOuterRecord {
  int outer = 0;
  double mu_before = 0;
  double mu_after = 0;
  double sigma = 0;
  bool full_hessian_next = false;
};

template <typename Scalar>
struct IpmResult {
  IpmState<Scalar> state;
  IpmStatus status = IpmStatus::Error;
  std::string message;
  int iterations = 0;
  int outer_iterations = 0;
  double final_kkt = 0;
  std::vector<IpmRecord> trace;
  std::vector<IpmOuterRecord> outer_trace;
};

template <typename Scalar>
using IpmObserver = std::function<void(const IpmState<Scalar>&, const IpmRecord&)>;

/// Nested-loop line-search primal-dual interior point method. The inner
/// loop holds mu fixed until E(.;mu) <= mu; the outer loop shrinks mu by the
/// predictor's sigma. The whole run stops as soon as E(.;0) <= eps_tol or a
/// cap is reached; the final iterate is always returned.
template <typename Scalar>
IpmResult<Scalar> run_ipm(const Matrix<Scalar>& m_data, const IpmState<Scalar>& init, const IpmParams& params,
                          const Stopwatch* clock = nullptr, const IpmObserver<Scalar>& observer = {}) {
  params.validate();
  init.validate();
  require_finite(m_data, "M");
  Stopwatch own;
  const Stopwatch& sw = clock ? *clock : own;
  const double t0 = sw.seconds();
  const auto tau = Scalar(params.tau);
  const auto eta = Scalar(params.eta);

  IpmResult<Scalar> res;
  res.state = init;
  IpmState<Scalar>& st = res.state;

  auto gradients_at = [&](const IpmState<Scalar>& s) {
    const Eigen::Map<const Matrix<Scalar>> xt(s.x.data(), s.k, s.n);
    const Eigen::Map<const Matrix<Scalar>> ym(s.y.data(), s.k, s.m);
    Matrix<Scalar> residual = xt.transpose() * ym - m_data;
    FactorState<Scalar> fs{xt.transpose(), ym};
    return std::make_pair(gradients_from_residual(fs, residual), std::move(residual));
  };
  auto error_at = [&](const IpmState<Scalar>& s, const Gradients<Scalar>& g, Scalar mu) {
    return kkt_error<Scalar>(s.x, s.y, s.r, s.s, g.gra_x, g.gra_y, mu);
  };

  Gradients<Scalar> grad;
  Matrix<Scalar> residual;
  std::tie(grad, residual) = gradients_at(st);
  Scalar e0 = error_at(st, grad, Scalar(0));
  std::optional<NewtonSolver<Scalar>> solver;

  auto finish = [&](IpmStatus status, std::string message = {}) {
    res.status = status;
    res.message = std::move(message);
    res.final_kkt = static_cast<double>(e0);
    return res;
  };

  if (e0 <= Scalar(params.eps_tol)) return finish(IpmStatus::Converged);

  while (true) {
    if (res.outer_iterations >= params.max_iterations) return finish(IpmStatus::IterationCap);
    const Scalar eps_mu = st.mu;
    bool solved_this_round = false;
    int inner = 0;

    while (error_at(st, grad, st.mu) > eps_mu &&
           (params.max_inner_iterations == 0 || inner < params.max_inner_iterations)) {
      ++inner;
      if (res.iterations >= params.max_iterations) return finish(IpmStatus::IterationCap);
      if (sw.seconds() - t0 >= params.time_cap_s) return finish(IpmStatus::TimeCap);

      IpmRecord rec;
      NewtonDirection<Scalar> dir;
      Scalar slope = 0;
      auto slope_of = [&](const NewtonDirection<Scalar>& d) {
        const auto [gx, gy] = merit_gradient(grad, st.x, st.y, st.mu);
        return d.dx.dot(gx) + d.dy.dot(gy);
      };

      bool have_direction = false;
      if (st.use_full_hessian) {
        try {
          solver.emplace(assemble_reduced_system(st, m_data, true));
          dir = solve_newton(*solver, st);
          slope = slope_of(dir);
          have_direction = keep_full_hessian(true, static_cast<double>(slope));
        } catch (const SchurNotPositiveDefinite&) {
          have_direction = false;
        }
        if (have_direction) {
          rec.full_hessian = true;
        } else {
          st.use_full_hessian = false;
          rec.fell_back = true;
        }
      }
      try {
        if (!have_direction) {
          solver.emplace(assemble_reduced_system(st, m_data, false));
          dir = solve_newton(*solver, st);
          slope = slope_of(dir);
        }
      } catch (const Error& e) {
        return finish(IpmStatus::Error, e.what());
      }
      solved_this_round = true;

      const auto [a1max, a2max] = fraction_to_boundary(st, dir, tau);
      ArmijoResult<Scalar> ls;
      try {
        ls = armijo_search(st, dir, residual, a1max, st.mu, eta, slope, params.max_backtracks);
      } catch (const LineSearchStall& e) {
        return finish(IpmStatus::LineSearchStall, e.what());
      }

      rec.phi_before = static_cast<double>(merit_phi(st.x, st.y, m_data, st.k, st.mu));
      const Scalar floor = Scalar(1) - tau;
      st.x = (st.x + ls.alpha1 * dir.dx).cwiseMax(floor * st.x);
      st.y = (st.y + ls.alpha1 * dir.dy).cwiseMax(floor * st.y);
      st.r = (st.r + a2max * dir.dr).cwiseMax(floor * st.r);
      st.s = (st.s + a2max * dir.ds).cwiseMax(floor * st.s);
      ++res.iterations;

      std::tie(grad, residual) = gradients_at(st);
      e0 = error_at(st, grad, Scalar(0));

      rec.iteration = res.iterations;
      rec.outer = res.outer_iterations;
      rec.kkt0 = static_cast<double>(e0);
      rec.kkt_mu = static_cast<double>(error_at(st, grad, st.mu));
      rec.mu = static_cast<double>(st.mu);
      rec.alpha1 = static_cast<double>(ls.alpha1);
      rec.alpha2 = static_cast<double>(a2max);
      rec.t = ls.t;
      rec.phi_after = static_cast<double>(merit_phi(st.x, st.y, m_data, st.k, st.mu));
      rec.merit_change = static_cast<double>(ls.merit_change);
      rec.slope = static_cast<double>(slope);
      rec.eta = params.eta;
      rec.objective = static_cast<double>(Scalar(0.5) * residual.squaredNorm());
      rec.wall_time = sw.seconds();
      res.trace.push_back(rec);
      if (observer) observer(st, rec);

      if (e0 <= Scalar(params.eps_tol)) return finish(IpmStatus::Converged);
    }

    // The predictor reuses the last factorization of this round; a round
    // without steps refactors at the current point.
    try {
      if (!solved_this_round || !solver) solver.emplace(assemble_reduced_system(st, m_data, false));
    } catch (const Error& e) {
      return finish(IpmStatus::Error, e.what());
    }
    const auto pred = predictor_sigma(st, *solver, grad, Scalar(params.sigma_cap));
    IpmOuterRecord orec;
    orec.outer = res.outer_iterations;
    orec.mu_before = static_cast<double>(st.mu);
    orec.sigma = static_cast<double>(pred.sigma);
    // sigma = 0 would end the barrier; keep mu positive and decreasing.
    st.mu *= std::max(pred.sigma, std::numeric_limits<Scalar>::epsilon());
    st.use_full_hessian = params.allow_full_hessian && hessian_switch_policy(static_cast<double>(pred.sigma),
                                                                             params.sigma_c);
    orec.mu_after = static_cast<double>(st.mu);
    orec.full_hessian_next = st.use_full_hessian;
    res.outer_trace.push_back(orec);
    ++res.outer_iterations;
    if (sw.seconds() - t0 >= params.time_cap_s) return finish(IpmStatus::TimeCap);
  }
}

}  // namespace tsnmf
