#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "tsnmf/anls.hpp"
#include "tsnmf/ipm.hpp"

namespace tsnmf {

struct TransitionParams {
  double rho0_scale = 1e-6;  // rho0 = rho0_scale * max over all entries of (x, y)
};

/// Turns a (typically stage-1) nonnegative factor pair into a strictly
/// interior primal-dual point:
///   (x, y) := max((x, y), rho0),   rho0 = rho0_scale * max(x, y)
///   r = max|graX| e,  s = max|graY| e   (gradients at the clamped point)
///   mu = (x^T r + y^T s) / (nk + mk),  rho = eps_tol.
template <typename Scalar>
IpmState<Scalar> transition(const FactorState<Scalar>& stage1, const Matrix<Scalar>& m_data,
                            const TransitionParams& tp = {}, double eps_tol = 1e-6) {
  check_shapes(stage1, m_data);
  if ((stage1.X.array() < 0).any() || (stage1.Y.array() < 0).any())
    throw std::invalid_argument("transition: factors must be nonnegative");
  if (stage1.X.isZero(0) || stage1.Y.isZero(0))
    throw DegenerateFactor("transition: X or Y is identically zero");

  IpmState<Scalar> st;
  st.n = stage1.n();
  st.m = stage1.m();
  st.k = stage1.k();
  st.x = vec_xt(stage1.X);
  st.y = vec_y(stage1.Y);
  const Scalar rho0 = Scalar(tp.rho0_scale) * std::max(st.x.maxCoeff(), st.y.maxCoeff());
  st.x = st.x.cwiseMax(rho0);
  st.y = st.y.cwiseMax(rho0);

  const auto g = assemble_gradients(st.factors(), m_data);
  // A vanishing gradient block (exact fit) would give a zero dual; keep the
  // iterate interior with the same floor used for the primal clamp.
  const Scalar r_level = std::max(g.gra_x.cwiseAbs().maxCoeff(), rho0);
  const Scalar s_level = std::max(g.gra_y.cwiseAbs().maxCoeff(), rho0);
  st.r = Vector<Scalar>::Constant(st.x.size(), r_level);
  st.s = Vector<Scalar>::Constant(st.y.size(), s_level);
  st.mu = (st.x.dot(st.r) + st.y.dot(st.s)) / static_cast<Scalar>(st.x.size() + st.y.size());
  st.rho = Scalar(eps_tol);
  st.use_full_hessian = false;
  return st;
}

enum class Variant { TwoStage, AnlsOnly, IpmOnly };

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::TwoStage: return "two_stage";
    case Variant::AnlsOnly: return "anls_only";
    case Variant::IpmOnly: return "ipm_only";
  }
  return "unknown";
}

inline Variant parse_variant(const std::string& name) {
  if (name == "two_stage") return Variant::TwoStage;
  if (name == "anls_only") return Variant::AnlsOnly;
  if (name == "ipm_only") return Variant::IpmOnly;
  throw std::invalid_argument("unknown variant: " + name);
}

enum class SolveStatus { Converged, StepTolerance, IterationCap, TimeCap, Error };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::StepTolerance: return "step_tolerance";
    case SolveStatus::IterationCap: return "iteration_cap";
    case SolveStatus::TimeCap: return "time_cap";
    case SolveStatus::Error: return "error";
  }
  return "unknown";
}

struct SolveConfig {
  Stage1Config stage1;
  IpmParams ipm;
  TransitionParams transition;
  Variant variant = Variant::TwoStage;
  double time_cap_s = std::numeric_limits<double>::infinity();  // whole solve
  TimeKind time_kind = TimeKind::Wall;
};

struct TraceRecord {
  double wall_time = 0;
  std::string stage;  // "stage1" or "stage2"
  double objective = 0;
  double kkt_error = 0;  // E(.;0); primal-only duals during stage 1
  double mu = std::numeric_limits<double>::quiet_NaN();
  bool flag = false;     // full Hessian used for this stage-2 step
};

template <typename Scalar>
struct SolveReport {
  SolveStatus status = SolveStatus::Error;
  std::string message;
  Variant variant = Variant::TwoStage;
  Index n = 0, m = 0, k = 0;
  double final_objective = 0;
  double final_kkt_error = 0;
  double stage1_time = 0;
  double stage2_time = 0;
  int stage1_sweeps = 0;
  std::string stage1_status = "skipped";
  NnlsStats nnls;
  int ipm_iterations = 0;
  int ipm_outer_iterations = 0;
  std::string ipm_status = "skipped";
  double max_post_transition_kkt = std::numeric_limits<double>::quiet_NaN();
  FactorState<Scalar> factors;
  std::vector<TraceRecord> trace;
};

namespace detail {

// Appends a trace row, nudging the timestamp so the column is strictly
// increasing even on coarse clocks.
inline void push_trace(std::vector<TraceRecord>& trace, TraceRecord rec) {
  if (!trace.empty() && !(rec.wall_time > trace.back().wall_time))
    rec.wall_time = std::nextafter(trace.back().wall_time, std::numeric_limits<double>::infinity());
  trace.push_back(std::move(rec));
}

inline SolveStatus from_ipm(IpmStatus s) {
  switch (s) {
    case IpmStatus::Converged: return SolveStatus::Converged;
    case IpmStatus::IterationCap: return SolveStatus::IterationCap;
    case IpmStatus::TimeCap: return SolveStatus::TimeCap;
    default: return SolveStatus::Error;
  }
}

}  // namespace detail

/// Stage 1 (ANLS + warm-started active sets), the transition, then stage 2
/// (interior point with the sigma-driven Hessian switch). `variant` selects
/// the full method or one of its single-stage ablations.
template <typename Scalar>
SolveReport<Scalar> run_two_stage(const Matrix<Scalar>& m_data, const FactorState<Scalar>& init,
                                  const SolveConfig& cfg) {
  SolveReport<Scalar> rep;
  rep.variant = cfg.variant;
  rep.n = m_data.rows();
  rep.m = m_data.cols();
  rep.k = init.k();
  rep.factors = init;
  Stopwatch sw(cfg.time_kind);

  auto finalize = [&]() -> SolveReport<Scalar>& {
    const bool shapes_ok = rep.factors.X.rows() == m_data.rows() && rep.factors.Y.cols() == m_data.cols() &&
                           rep.factors.X.cols() == rep.factors.Y.rows();
    rep.final_objective = shapes_ok ? static_cast<double>(objective(rep.factors, m_data))
                                    : std::numeric_limits<double>::quiet_NaN();
    return rep;
  };

  try {
    check_shapes(init, m_data);
    if (init.k() < 1) throw std::invalid_argument("rank k must be >= 1");
    if ((m_data.array() < 0).any()) throw std::invalid_argument("M must be elementwise nonnegative");

    if (cfg.variant != Variant::IpmOnly) {
      Stage1Config s1 = cfg.stage1;
      s1.time_cap_s = std::min(s1.time_cap_s, cfg.time_cap_s);
      if (cfg.variant == Variant::AnlsOnly) s1.target_kkt = cfg.ipm.eps_tol;
      const auto r1 = run_stage1(m_data, init, s1, &sw);
      rep.factors = r1.state;
      rep.stage1_sweeps = r1.sweeps;
      rep.stage1_status = to_string(r1.status);
      rep.nnls = r1.nnls;
      for (const auto& t : r1.trace)
        detail::push_trace(rep.trace, {t.wall_time, "stage1", t.objective, t.kkt_error,
                                       std::numeric_limits<double>::quiet_NaN(), false});
      rep.stage1_time = sw.seconds();
      rep.final_kkt_error = static_cast<double>(kkt_error_primal_only(rep.factors, m_data));

      if (cfg.variant == Variant::AnlsOnly) {
        if (rep.final_kkt_error <= cfg.ipm.eps_tol)
          rep.status = SolveStatus::Converged;
        else if (r1.status == Stage1Status::TimeCap)
          rep.status = SolveStatus::TimeCap;
        else if (r1.status == Stage1Status::SweepCap)
          rep.status = SolveStatus::IterationCap;
        else
          rep.status = SolveStatus::StepTolerance;
        return finalize();
      }
    }

    const double stage2_start = sw.seconds();
    IpmState<Scalar> st = transition(rep.factors, m_data, cfg.transition, cfg.ipm.eps_tol);
    IpmParams ip = cfg.ipm;
    ip.time_cap_s = std::min(ip.time_cap_s, std::max(0.0, cfg.time_cap_s - stage2_start));
    const auto r2 = run_ipm(m_data, st, ip, &sw);
    rep.stage2_time = sw.seconds() - stage2_start;
    rep.factors = r2.state.factors();
    rep.ipm_iterations = r2.iterations;
    rep.ipm_outer_iterations = r2.outer_iterations;
    rep.ipm_status = to_string(r2.status);
    rep.final_kkt_error = r2.final_kkt;
    rep.status = detail::from_ipm(r2.status);
    rep.message = r2.message;
    double worst = 0;
    for (const auto& t : r2.trace) {
      worst = std::max(worst, t.kkt0);
      detail::push_trace(rep.trace, {t.wall_time, "stage2", t.objective, t.kkt0, t.mu, t.full_hessian});
    }
    if (!r2.trace.empty()) rep.max_post_transition_kkt = worst;
  } catch (const std::exception& e) {
    rep.status = SolveStatus::Error;
    rep.message = e.what();
  }
  return finalize();
}

}  // namespace tsnmf
