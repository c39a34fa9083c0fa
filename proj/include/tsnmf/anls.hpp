#pragma once

#include <limits>
#include <vector>

#include "tsnmf/kkt.hpp"
#include "tsnmf/nnls.hpp"
#include "tsnmf/timer.hpp"

namespace tsnmf {

struct Stage1Config {
  double eps_stol = 1e-3;  // relative step tolerance
  int max_sweeps = 200;
  double tol_kkt = 0;      // NNLS dual tolerance; <= 0 selects the per-rhs default
  bool warm_start = true;
  double time_cap_s = std::numeric_limits<double>::infinity();
  // When > 0, also stop once the primal-only KKT error drops to this value.
  double target_kkt = 0;
  // Record the primal-only KKT error in the trace (one gradient per half-sweep).
  bool record_kkt = true;

  void validate() const {
    if (!(eps_stol >= 0)) throw std::invalid_argument("eps_stol must be nonnegative");
    if (max_sweeps < 1) throw std::invalid_argument("max_sweeps must be >= 1");
  }
};

/// Counters accumulated over the NNLS solves of one or more half-sweeps.
struct NnlsStats {
  long solves = 0;
  long ls_solves = 0;
  long factorizations = 0;
  long warm_accepted = 0;
  long active_set_changes = 0;
};

struct Stage1Record {
  int sweep = 0;
  char half = 'X';  // which block was just updated
  double wall_time = 0;
  double objective = 0;
  double kkt_error = 0;  // primal-only; NaN when not recorded
  double step = 0;       // relative step of the full sweep, only on 'Y' rows
};

enum class Stage1Status { StepTolerance, KktTolerance, SweepCap, TimeCap };

inline const char* to_string(Stage1Status s) {
  switch (s) {
    case Stage1Status::StepTolerance: return "step_tolerance";
    case Stage1Status::KktTolerance: return "kkt_tolerance";
    case Stage1Status::SweepCap: return "sweep_cap";
    case Stage1Status::TimeCap: return "time_cap";
  }
  return "unknown";
}

template <typename Scalar>
struct Stage1Result {
  FactorState<Scalar> state;
  std::vector<Stage1Record> trace;
  Stage1Status status = Stage1Status::SweepCap;
  int sweeps = 0;
  double last_step = 0;
  NnlsStats nnls;
};

namespace detail {

// Solves min ||C z - d_j|| over z >= 0 for every column j of `ctd`, with C
// represented by its Gram matrix. Warm starts follow the rhs order: on the
// first pass each rhs is seeded by its predecessor; afterwards each rhs is
// seeded by its own passive set from the previous pass.
template <typename Scalar>
Matrix<Scalar> solve_columns(const Matrix<Scalar>& gram, const Matrix<Scalar>& ctd, const Vector<Scalar>& dtd,
                             std::vector<ActiveSetCarry<Scalar>>& carry, const Stage1Config& cfg,
                             NnlsStats& stats, const char* axis) {
  const Index count = ctd.cols();
  GramSystem<Scalar> sys(gram);
  Matrix<Scalar> out(gram.rows(), count);
  const bool first_pass = carry.size() != static_cast<std::size_t>(count);
  if (first_pass) carry.assign(static_cast<std::size_t>(count), ActiveSetCarry<Scalar>{});

  for (Index j = 0; j < count; ++j) {
    const Vector<Scalar> b = ctd.col(j);
    const Scalar tol = cfg.tol_kkt > 0 ? Scalar(cfg.tol_kkt) : default_tol_kkt(b);
    ActiveSetCarry<Scalar> seed;
    const ActiveSetCarry<Scalar>* warm = nullptr;
    if (cfg.warm_start) {
      // Factors cached by a previous pass belong to a different C.
      if (!first_pass)
        seed.passive = carry[static_cast<std::size_t>(j)].passive;
      else if (j > 0)
        seed.passive = carry[static_cast<std::size_t>(j - 1)].passive;
      warm = &seed;
    }
    NnlsSolution<Scalar> sol;
    try {
      sol = nnls_solve_gram(sys, b, dtd(j), warm, tol);
    } catch (const Error& e) {
      throw SubproblemError(axis, j, e.what());
    }
    out.col(j) = sol.x;
    carry[static_cast<std::size_t>(j)].passive = sol.passive;
    ++stats.solves;
    stats.ls_solves += sol.ls_solves;
    stats.factorizations += sol.factorizations;
    stats.warm_accepted += sol.warm_accepted ? 1 : 0;
    stats.active_set_changes += sol.iterations;
  }
  return out;
}

}  // namespace detail

/// Replaces every row of X by the NNLS solution with C = Y^T, d = M(i,:)^T.
template <typename Scalar>
FactorState<Scalar> update_X(const FactorState<Scalar>& state, const Matrix<Scalar>& m,
                             std::vector<ActiveSetCarry<Scalar>>& carry, const Stage1Config& cfg = {},
                             NnlsStats* stats = nullptr) {
  check_shapes(state, m);
  NnlsStats local;
  const Matrix<Scalar> gram = state.Y * state.Y.transpose();
  const Matrix<Scalar> ctd = state.Y * m.transpose();  // k x n
  const Vector<Scalar> dtd = m.rowwise().squaredNorm();
  FactorState<Scalar> next{detail::solve_columns(gram, ctd, dtd, carry, cfg, stats ? *stats : local, "row")
                               .transpose(),
                           state.Y};
  return next;
}

/// Replaces every column of Y by the NNLS solution with C = X, d = M(:,j).
template <typename Scalar>
FactorState<Scalar> update_Y(const FactorState<Scalar>& state, const Matrix<Scalar>& m,
                             std::vector<ActiveSetCarry<Scalar>>& carry, const Stage1Config& cfg = {},
                             NnlsStats* stats = nullptr) {
  check_shapes(state, m);
  NnlsStats local;
  const Matrix<Scalar> gram = state.X.transpose() * state.X;
  const Matrix<Scalar> ctd = state.X.transpose() * m;  // k x m
  const Vector<Scalar> dtd = m.colwise().squaredNorm().transpose();
  return FactorState<Scalar>{state.X,
                             detail::solve_columns(gram, ctd, dtd, carry, cfg, stats ? *stats : local, "column")};
}

/// Alternating nonnegative least squares until
///   ||(x_k, y_k) - (x_{k+1}, y_{k+1})|| <= eps_stol (1 + ||(x_k, y_k)||)
/// or a cap is hit. `clock` supplies trace timestamps; pass the caller's
/// stopwatch to share a time origin with later stages.
template <typename Scalar>
Stage1Result<Scalar> run_stage1(const Matrix<Scalar>& m, const FactorState<Scalar>& init, const Stage1Config& cfg,
                                const Stopwatch* clock = nullptr) {
  cfg.validate();
  check_shapes(init, m);
  require_finite(m, "M");
  if ((init.X.array() < 0).any() || (init.Y.array() < 0).any())
    throw std::invalid_argument("run_stage1: initial factors must be nonnegative");

  Stopwatch own;
  const Stopwatch& sw = clock ? *clock : own;
  const double t0 = sw.seconds();

  Stage1Result<Scalar> res;
  res.state = init;
  std::vector<ActiveSetCarry<Scalar>> carry_x, carry_y;

  auto record = [&](int sweep, char half, double step) {
    Stage1Record rec;
    rec.sweep = sweep;
    rec.half = half;
    rec.objective = static_cast<double>(objective(res.state, m));
    rec.kkt_error = cfg.record_kkt ? static_cast<double>(kkt_error_primal_only(res.state, m))
                                   : std::numeric_limits<double>::quiet_NaN();
    rec.step = step;
    rec.wall_time = sw.seconds();
    res.trace.push_back(rec);
    return rec;
  };

  res.status = Stage1Status::SweepCap;
  for (int sweep = 1; sweep <= cfg.max_sweeps; ++sweep) {
    const FactorState<Scalar> prev = res.state;
    res.state = update_X(res.state, m, carry_x, cfg, &res.nnls);
    record(sweep, 'X', 0);
    res.state = update_Y(res.state, m, carry_y, cfg, &res.nnls);

    const Scalar diff = std::sqrt((res.state.X - prev.X).squaredNorm() + (res.state.Y - prev.Y).squaredNorm());
    const Scalar size = std::sqrt(prev.X.squaredNorm() + prev.Y.squaredNorm());
    res.last_step = static_cast<double>(diff / (Scalar(1) + size));
    const auto rec = record(sweep, 'Y', res.last_step);
    res.sweeps = sweep;

    if (diff <= Scalar(cfg.eps_stol) * (Scalar(1) + size)) {
      res.status = Stage1Status::StepTolerance;
      break;
    }
    if (cfg.target_kkt > 0 && cfg.record_kkt && rec.kkt_error <= cfg.target_kkt) {
      res.status = Stage1Status::KktTolerance;
      break;
    }
    if (sw.seconds() - t0 >= cfg.time_cap_s) {
      res.status = Stage1Status::TimeCap;
      break;
    }
  }
  return res;
}

}  // namespace tsnmf
