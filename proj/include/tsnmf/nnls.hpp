#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <vector>

#include "tsnmf/linalg.hpp"

namespace tsnmf {

/// Warm-start state carried from one NNLS solve to the next. `passive` is
/// sorted ascending. `cached_factor` is the lower Cholesky factor of the
/// passive block of C^T C and is only meaningful while `cached_signature`
/// equals `passive` and C has not changed.
template <typename Scalar>
struct ActiveSetCarry {
  std::vector<Index> passive;
  std::optional<Matrix<Scalar>> cached_factor;
  std::vector<Index> cached_signature;

  bool factor_valid() const { return cached_factor.has_value() && cached_signature == passive; }
  bool empty() const { return passive.empty(); }
};

template <typename Scalar>
struct NnlsSolution {
  Vector<Scalar> x;
  std::vector<Index> passive;
  Scalar residual_norm = 0;
  int iterations = 0;      // active-set changes
  int ls_solves = 0;       // passive-set least-squares solves
  int factorizations = 0;  // Cholesky factorizations actually computed
  bool warm_accepted = false;
  Matrix<Scalar> factor;   // factor of the final passive block; empty when passive is empty

  ActiveSetCarry<Scalar> carry() const {
    ActiveSetCarry<Scalar> c;
    c.passive = passive;
    if (!passive.empty()) {
      c.cached_factor = factor;
      c.cached_signature = passive;
    }
    return c;
  }
};

template <typename Scalar>
Scalar default_tol_kkt(const Vector<Scalar>& ctd) {
  const Scalar inf_norm = ctd.size() ? ctd.cwiseAbs().maxCoeff() : Scalar(0);
  return Scalar(1e-12) * std::max(Scalar(1), inf_norm);
}

/// Normal-equation form of a family of NNLS problems sharing one C: holds
/// G = C^T C plus a cache of passive-block Cholesky factors, so every
/// right-hand side landing on an already-seen passive set skips the
/// factorization.
template <typename Scalar>
class GramSystem {
 public:
  explicit GramSystem(Matrix<Scalar> gram) : gram_(std::move(gram)) {
    if (gram_.rows() != gram_.cols()) throw std::invalid_argument("GramSystem: gram must be square");
  }

  const Matrix<Scalar>& gram() const { return gram_; }
  Index num_vars() const { return gram_.rows(); }

  const Matrix<Scalar>& factor(const std::vector<Index>& passive, int& factorizations) {
    auto it = cache_.find(passive);
    if (it != cache_.end()) return it->second;
    const auto p = static_cast<Index>(passive.size());
    Matrix<Scalar> sub(p, p);
    for (Index a = 0; a < p; ++a)
      for (Index b = 0; b < p; ++b) sub(a, b) = gram_(passive[a], passive[b]);
    Eigen::LLT<Matrix<Scalar>, Eigen::Lower> llt(sub);
    Matrix<Scalar> l = llt.matrixL();
    if (llt.info() != Eigen::Success || (l.diagonal().array() <= Scalar(0)).any() || !l.allFinite())
      throw RankDeficientPassiveSet("passive columns of C are rank deficient");
    ++factorizations;
    return cache_.emplace(passive, std::move(l)).first->second;
  }

  void seed(const std::vector<Index>& passive, const Matrix<Scalar>& l) { cache_.emplace(passive, l); }
  std::size_t cached_sets() const { return cache_.size(); }

 private:
  Matrix<Scalar> gram_;
  std::map<std::vector<Index>, Matrix<Scalar>> cache_;
};

namespace detail {

template <typename Scalar>
struct PassiveSolve {
  Vector<Scalar> z;  // full length, zero off the passive set
  const Matrix<Scalar>* factor = nullptr;
};

template <typename Scalar>
PassiveSolve<Scalar> solve_on_passive(GramSystem<Scalar>& sys, const Vector<Scalar>& ctd,
                                      const std::vector<Index>& passive, NnlsSolution<Scalar>& stats) {
  PassiveSolve<Scalar> out;
  out.z = Vector<Scalar>::Zero(sys.num_vars());
  if (passive.empty()) return out;
  const auto p = static_cast<Index>(passive.size());
  out.factor = &sys.factor(passive, stats.factorizations);
  Vector<Scalar> rhs(p);
  for (Index a = 0; a < p; ++a) rhs(a) = ctd(passive[a]);
  out.factor->template triangularView<Eigen::Lower>().solveInPlace(rhs);
  out.factor->template triangularView<Eigen::Lower>().transpose().solveInPlace(rhs);
  for (Index a = 0; a < p; ++a) out.z(passive[a]) = rhs(a);
  ++stats.ls_solves;
  return out;
}

template <typename Scalar>
bool dual_feasible(const Vector<Scalar>& w, const std::vector<Index>& passive, Scalar tol) {
  std::vector<char> in_passive(static_cast<std::size_t>(w.size()), 0);
  for (Index i : passive) in_passive[static_cast<std::size_t>(i)] = 1;
  for (Index i = 0; i < w.size(); ++i) {
    if (in_passive[static_cast<std::size_t>(i)]) {
      if (std::abs(w(i)) > tol) return false;
    } else if (w(i) > tol) {
      return false;
    }
  }
  return true;
}

inline void validate_passive(const std::vector<Index>& passive, Index num_vars) {
  for (std::size_t a = 0; a < passive.size(); ++a) {
    if (passive[a] < 0 || passive[a] >= num_vars)
      throw std::invalid_argument("ActiveSetCarry: passive index out of range");
    if (a > 0 && passive[a] <= passive[a - 1])
      throw std::invalid_argument("ActiveSetCarry: passive indices must be sorted and unique");
  }
}

}  // namespace detail

/// Lawson-Hanson active-set NNLS on the normal equations:
///   min 1/2 x^T G x - ctd^T x + dtd/2  s.t. x >= 0.
/// `warm` (optional) seeds the passive set. If the seeded least-squares
/// solution is feasible and dual feasible it is returned after a single
/// solve; if it is strictly feasible the iteration continues from it;
/// otherwise the solve restarts cold.
template <typename Scalar>
NnlsSolution<Scalar> nnls_solve_gram(GramSystem<Scalar>& sys, const Vector<Scalar>& ctd, Scalar dtd,
                                     const ActiveSetCarry<Scalar>* warm, Scalar tol_kkt) {
  const Index nv = sys.num_vars();
  if (ctd.size() != nv) throw std::invalid_argument("nnls: rhs length does not match C");
  require_finite(ctd, "nnls right-hand side");
  const Matrix<Scalar>& g = sys.gram();
  const int cap = 3 * static_cast<int>(nv);

  NnlsSolution<Scalar> sol;
  Vector<Scalar> x = Vector<Scalar>::Zero(nv);
  std::vector<Index> passive;

  auto residual = [&](const Vector<Scalar>& v) -> Vector<Scalar> { return ctd - g * v; };

  if (warm != nullptr && !warm->passive.empty()) {
    detail::validate_passive(warm->passive, nv);
    if (warm->factor_valid()) sys.seed(warm->passive, *warm->cached_factor);
    auto ws = detail::solve_on_passive(sys, ctd, warm->passive, sol);
    bool feasible = true;
    for (Index i : warm->passive) feasible = feasible && ws.z(i) >= Scalar(0);
    if (feasible) {
      // Exact zeros leave the restricted minimizer unchanged, so they can
      // be dropped from the passive set.
      for (Index i : warm->passive)
        if (ws.z(i) > Scalar(0)) passive.push_back(i);
      x = ws.z;
      if (passive.size() == warm->passive.size() &&
          detail::dual_feasible<Scalar>(residual(x), passive, tol_kkt))
        sol.warm_accepted = true;
    }
    if (!feasible) {
      x.setZero();
      passive.clear();
    }
  }

  if (!sol.warm_accepted) {
    std::vector<char> in_passive(static_cast<std::size_t>(nv), 0);
    for (Index i : passive) in_passive[static_cast<std::size_t>(i)] = 1;
    std::vector<char> excluded(static_cast<std::size_t>(nv), 0);
    Vector<Scalar> w = residual(x);

    while (true) {
      Index t = -1;
      Scalar best = tol_kkt;
      for (Index i = 0; i < nv; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        if (!in_passive[ui] && !excluded[ui] && w(i) > best) {
          best = w(i);
          t = i;
        }
      }
      if (t < 0) break;

      std::vector<Index> trial = passive;
      trial.insert(std::upper_bound(trial.begin(), trial.end(), t), t);
      auto z = detail::solve_on_passive(sys, ctd, trial, sol).z;
      if (z(t) <= Scalar(0)) {
        // Positive only through rounding: the new variable cannot move off
        // its bound. Skip it for this selection round.
        excluded[static_cast<std::size_t>(t)] = 1;
        continue;
      }
      passive = std::move(trial);
      in_passive[static_cast<std::size_t>(t)] = 1;
      if (++sol.iterations > cap) throw MaxIterationsExceeded("nnls: active-set iteration cap exceeded");

      // Feasibility loop: walk from x toward z until the first passive
      // variable hits zero (minimum ratio, smallest index on ties).
      while (true) {
        Index blocking = -1;
        Scalar alpha = 1;
        for (Index i : passive) {
          if (z(i) <= Scalar(0)) {
            const Scalar ratio = x(i) / (x(i) - z(i));
            if (blocking < 0 || ratio < alpha) {
              alpha = ratio;
              blocking = i;
            }
          }
        }
        if (blocking < 0) break;
        x += alpha * (z - x);
        x(blocking) = 0;
        std::vector<Index> kept;
        for (Index i : passive) {
          if (x(i) > Scalar(0)) {
            kept.push_back(i);
          } else {
            x(i) = 0;
            in_passive[static_cast<std::size_t>(i)] = 0;
            if (++sol.iterations > cap)
              throw MaxIterationsExceeded("nnls: active-set iteration cap exceeded");
          }
        }
        passive = std::move(kept);
        z = detail::solve_on_passive(sys, ctd, passive, sol).z;
      }
      x = z;
      w = residual(x);
      std::fill(excluded.begin(), excluded.end(), 0);
    }
  }

  sol.x = x;
  sol.passive = passive;
  const Scalar sq = x.dot(g * x) - Scalar(2) * ctd.dot(x) + dtd;
  sol.residual_norm = std::sqrt(std::max(Scalar(0), sq));
  if (!passive.empty()) sol.factor = sys.factor(passive, sol.factorizations);
  return sol;
}

/// min 1/2 ||C x - d||^2 s.t. x >= 0. `tol_kkt <= 0` selects the default
/// scale-relative tolerance.
template <typename Scalar>
NnlsSolution<Scalar> nnls_solve(const Matrix<Scalar>& c, const Vector<Scalar>& d,
                                const ActiveSetCarry<Scalar>* warm = nullptr, Scalar tol_kkt = 0) {
  if (c.rows() != d.size()) throw std::invalid_argument("nnls: C rows must equal length of d");
  require_finite(c, "nnls matrix C");
  require_finite(d, "nnls vector d");
  const Vector<Scalar> ctd = c.transpose() * d;
  if (tol_kkt <= Scalar(0)) tol_kkt = default_tol_kkt(ctd);
  GramSystem<Scalar> sys(c.transpose() * c);
  auto sol = nnls_solve_gram(sys, ctd, d.squaredNorm(), warm, tol_kkt);
  sol.residual_norm = (c * sol.x - d).norm();
  return sol;
}

/// True iff the least-squares solution on candidate.passive is feasible and
/// dual feasible for (C, d), i.e. the candidate's active set is optimal.
template <typename Scalar>
bool warm_start_validate(const NnlsSolution<Scalar>& candidate, const Matrix<Scalar>& c,
                         const Vector<Scalar>& d, Scalar tol_kkt = 0) {
  const Vector<Scalar> ctd = c.transpose() * d;
  if (tol_kkt <= Scalar(0)) tol_kkt = default_tol_kkt(ctd);
  GramSystem<Scalar> sys(c.transpose() * c);
  detail::validate_passive(candidate.passive, sys.num_vars());
  NnlsSolution<Scalar> stats;
  Vector<Scalar> z;
  try {
    z = detail::solve_on_passive(sys, ctd, candidate.passive, stats).z;
  } catch (const RankDeficientPassiveSet&) {
    return false;
  }
  for (Index i : candidate.passive)
    if (z(i) < Scalar(0)) return false;
  return detail::dual_feasible<Scalar>(ctd - sys.gram() * z, candidate.passive, tol_kkt);
}

}  // namespace tsnmf
