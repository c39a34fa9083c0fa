// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit status if
// any criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "tsnmf/data_io.hpp"
#include "tsnmf/two_stage.hpp"

using namespace tsnmf;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1. NNLS against brute-force passive-subset enumeration.
Outcome nnls_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng({1001});
  double worst_obj = 0, worst_comp = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const Index cols = 1 + static_cast<Index>(rng.bits() % 8);
    const Index rows = cols + static_cast<Index>(rng.bits() % static_cast<std::uint64_t>(11 - cols));
    const Matrix<double> c = oracle::normal_matrix(rng, rows, cols);
    Vector<double> d;
    do {
      d = oracle::normal_matrix(rng, rows, 1).col(0);
    } while (rows > 1 && ((d.array() > 0).all() || (d.array() < 0).all()));
    const auto sol = nnls_solve(c, d);
    const auto ref = oracle::brute_force_nnls(c, d);
    worst_obj = std::max(worst_obj, std::abs(0.5 * (c * sol.x - d).squaredNorm() - ref.objective));
    const Vector<double> w = c.transpose() * (d - c * sol.x);
    worst_comp = std::max(worst_comp, sol.x.cwiseProduct(w).cwiseAbs().maxCoeff());
  }
  const double t = seconds_since(t0);
  return {worst_obj <= 1e-10 && worst_comp <= 1e-8 && t < 5,
          fmt("200 instances, max |f - f_ref| = %.2e, max |x_i w_i| = %.2e, %.2fs", worst_obj, worst_comp, t)};
}

// 2. Schur-complement Newton solve against the dense full system.
Outcome newton_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng({1002});
  const Index shapes[3][3] = {{8, 4, 2}, {12, 5, 2}, {10, 6, 3}};
  double worst[2] = {0, 0};
  int compared[2] = {0, 0}, excluded = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const Index n = shapes[trial % 3][0], m = shapes[trial % 3][1], k = shapes[trial % 3][2];
    const auto st = oracle::random_state(rng, n, m, k, std::pow(10.0, -1 - 5 * rng.uniform()), 0.01 + rng.uniform());
    const Matrix<double> prod = unvec_xt(st.x, n, k) * unvec_y(st.y, k, m);
    const Matrix<double> m_data = (prod + 0.1 * oracle::normal_matrix(rng, n, m)).cwiseMax(0.0);
    for (int full = 0; full < 2; ++full) {
      NewtonDirection<double> got;
      try {
        got = solve_newton(NewtonSolver<double>(assemble_reduced_system(st, m_data, full == 1)), st);
      } catch (const SchurNotPositiveDefinite&) {
        if (full == 1) {
          ++excluded;
          continue;
        }
        return {false, fmt("Gauss-Newton Schur complement not positive definite at trial %d", trial)};
      }
      const auto want = oracle::dense_newton(st, m_data, full == 1);
      const double e = std::max({oracle::rel_error(got.dx, want.dx), oracle::rel_error(got.dy, want.dy),
                                 oracle::rel_error(got.dr, want.dr), oracle::rel_error(got.ds, want.ds)});
      worst[full] = std::max(worst[full], e);
      ++compared[full];
    }
  }
  const double t = seconds_since(t0);
  return {worst[0] <= 1e-8 && worst[1] <= 1e-8 && compared[1] > 0 && t < 10,
          fmt("Gauss-Newton %d states max rel %.2e; full %d states max rel %.2e (%d excluded); %.2fs", compared[0],
              worst[0], compared[1], worst[1], excluded, t)};
}

// 3. Gradients of f and phi against central differences.
Outcome gradient_checks() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng({1003});
  double worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 2 + static_cast<Index>(rng.bits() % 6), m = 2 + static_cast<Index>(rng.bits() % 5);
    const Index k = 1 + static_cast<Index>(rng.bits() % 3);
    const Matrix<double> md = oracle::uniform_matrix(rng, n, m);
    const Vector<double> x = oracle::uniform_vector(rng, n * k, 0.1, 1.1);
    const Vector<double> y = oracle::uniform_vector(rng, m * k, 0.1, 1.1);
    const double mu = 0.05 + rng.uniform();
    const FactorState<double> fs{unvec_xt(x, n, k), unvec_y(y, k, m)};
    const auto g = assemble_gradients(fs, md);
    const auto [px, py] = merit_gradient(g, x, y, mu);
    auto fx = [&](const Vector<double>& v) { return objective(FactorState<double>{unvec_xt(v, n, k), fs.Y}, md); };
    auto fy = [&](const Vector<double>& v) { return objective(FactorState<double>{fs.X, unvec_y(v, k, m)}, md); };
    auto phix = [&](const Vector<double>& v) { return merit_phi<double>(v, y, md, k, mu); };
    auto phiy = [&](const Vector<double>& v) { return merit_phi<double>(x, v, md, k, mu); };
    worst = std::max({worst, oracle::rel_error(g.gra_x, oracle::central_difference(fx, x, 1e-6)),
                      oracle::rel_error(g.gra_y, oracle::central_difference(fy, y, 1e-6)),
                      oracle::rel_error(px, oracle::central_difference(phix, x, 1e-6)),
                      oracle::rel_error(py, oracle::central_difference(phiy, y, 1e-6))});
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-5 && t < 5, fmt("20 instances, max rel error %.2e, %.2fs", worst, t)};
}

// 4. ANLS objective never increases across half-sweeps.
Outcome anls_monotone() {
  const auto inst = generate_synthetic(200, 20, 3, 0.1, {1004});
  const auto init = init_factors(200, 20, 3, {1});
  Stage1Config cfg;
  cfg.eps_stol = 0;
  cfg.max_sweeps = 50;
  cfg.record_kkt = false;
  const auto res = run_stage1(inst.M, init, cfg);
  double prev = objective(init, inst.M), worst = -std::numeric_limits<double>::infinity();
  bool ok = res.trace.size() == 100;
  for (const auto& r : res.trace) {
    const double rise = (r.objective - prev) / prev;
    worst = std::max(worst, rise);
    ok = ok && r.objective <= prev * (1 + 1e-12);
    prev = r.objective;
  }
  return {ok, fmt("%zu half-sweeps, largest relative change %.2e, final f %.6g", res.trace.size(), worst, prev)};
}

// 5. Interior-point invariants along a full run.
Outcome ipm_invariants() {
  const auto inst = generate_synthetic(500, 30, 3, 0.1, {1005});
  const auto init = init_factors(500, 30, 3, {1});
  Stopwatch sw;
  const auto s1 = run_stage1(inst.M, init, Stage1Config{}, &sw);
  const auto start = transition(s1.state, inst.M);
  IpmParams params;
  params.time_cap_s = std::max(0.0, 120 - sw.seconds());

  bool positive = true, armijo = true;
  double worst_margin = -std::numeric_limits<double>::infinity();
  IpmState<double> prev = start;
  const IpmObserver<double> observe = [&](const IpmState<double>& st, const IpmRecord& rec) {
    positive = positive && st.min_entry() > 0;
    // Re-evaluate both merit values in extended precision from the stored
    // iterates; the accepted step must satisfy the Armijo inequality.
    const Matrix<long double> ml = inst.M.cast<long double>();
    const long double mu = rec.mu;
    const long double before = merit_phi<long double>(prev.x.cast<long double>(), prev.y.cast<long double>(), ml,
                                                      st.k, mu);
    const long double after =
        merit_phi<long double>(st.x.cast<long double>(), st.y.cast<long double>(), ml, st.k, mu);
    const long double bound = static_cast<long double>(rec.eta) * rec.alpha1 * rec.slope;
    const double margin = static_cast<double>((after - before) - bound);
    worst_margin = std::max(worst_margin, margin);
    armijo = armijo && rec.slope < 0 && rec.merit_change <= rec.eta * rec.alpha1 * rec.slope && after - before <= bound;
    prev = st;
  };
  const auto res = run_ipm(inst.M, start, params, &sw, observe);

  bool mu_down = true;
  for (std::size_t i = 0; i < res.outer_trace.size(); ++i) {
    mu_down = mu_down && res.outer_trace[i].mu_after < res.outer_trace[i].mu_before;
    if (i > 0) mu_down = mu_down && res.outer_trace[i].mu_before == res.outer_trace[i - 1].mu_after;
  }
  const double t = sw.seconds();
  const bool ok = positive && armijo && mu_down && res.final_kkt <= 1e-6 && t <= 120;
  return {ok, fmt("%d iterations, %d mu updates, positive=%d armijo=%d (worst margin %.2e) mu_decreasing=%d, "
                  "E=%.2e, %.2fs",
                  res.iterations, res.outer_iterations, positive, armijo, worst_margin, mu_down, res.final_kkt, t)};
}

struct SeedRun {
  double e_two, f_two, e_anls, f_anls;
};

// Runs shared by criteria 6 and 7.
const std::vector<SeedRun>& table_runs() {
  static const std::vector<SeedRun> runs = [] {
    std::vector<SeedRun> out;
    const auto inst = generate_synthetic(2000, 50, 3, 0.1, {1006});
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const auto init = init_factors(2000, 50, 3, {seed});
      SolveConfig cfg;
      cfg.time_cap_s = 60;
      const auto two = run_two_stage(inst.M, init, cfg);
      cfg.variant = Variant::AnlsOnly;
      const auto anls = run_two_stage(inst.M, init, cfg);
      out.push_back({two.final_kkt_error, two.final_objective, anls.final_kkt_error, anls.final_objective});
    }
    return out;
  }();
  return runs;
}

// 6. Two-stage reaches the tolerance where stage 1 alone does not.
Outcome two_stage_vs_anls() {
  const auto& runs = table_runs();
  int two_ok = 0, anls_short = 0, f_ok = 0;
  for (const auto& r : runs) {
    two_ok += r.e_two <= 1e-6;
    anls_short += r.e_anls > 1e-6;
    f_ok += r.f_two <= r.f_anls;
  }
  return {two_ok >= 8 && anls_short >= 8 && f_ok == 10,
          fmt("two_stage E<=1e-6 on %d/10, anls_only E>1e-6 on %d/10, f_two<=f_anls on %d/10", two_ok, anls_short,
              f_ok)};
}

// 7. Same objective from every initial point.
Outcome consistency() {
  const auto& runs = table_runs();
  double lo = std::numeric_limits<double>::infinity(), hi = -lo, sum = 0;
  for (const auto& r : runs) {
    lo = std::min(lo, r.f_two);
    hi = std::max(hi, r.f_two);
    sum += r.f_two;
  }
  const double spread = (hi - lo) / std::abs(sum / runs.size());
  return {spread <= 1e-4, fmt("f in [%.10g, %.10g], relative spread %.2e", lo, hi, spread)};
}

// Median stage-2 seconds per iteration, pooled over a few seeds.
double median_iteration_time(Index n, Index m, Index k) {
  const auto inst = generate_synthetic(n, m, k, 0.1, {1008});
  std::vector<double> steps;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    Stopwatch sw;
    const auto s1 = run_stage1(inst.M, init_factors(n, m, k, {seed}), Stage1Config{}, &sw);
    const auto start = transition(s1.state, inst.M);
    const double t0 = sw.seconds();
    const auto res = run_ipm(inst.M, start, IpmParams{}, &sw);
    double last = t0;
    for (const auto& r : res.trace) {
      steps.push_back(r.wall_time - last);
      last = r.wall_time;
    }
  }
  std::sort(steps.begin(), steps.end());
  return steps.empty() ? std::numeric_limits<double>::quiet_NaN() : steps[steps.size() / 2];
}

// 8. Per-iteration cost grows linearly in n.
Outcome cost_scaling() {
  const auto t0 = std::chrono::steady_clock::now();
  const double small = median_iteration_time(2000, 30, 3);
  const double large = median_iteration_time(4000, 30, 3);
  const double ratio = large / small;
  const double t = seconds_since(t0);
  return {ratio >= 1.5 && ratio <= 3.0 && t < 180,
          fmt("median %.3f ms at n=2000, %.3f ms at n=4000, ratio %.2f, %.1fs", 1e3 * small, 1e3 * large, ratio, t)};
}

// 9. Transition recipe on hand-built states.
Outcome transition_checks() {
  std::vector<std::string> failed;
  auto expect = [&](bool cond, const char* what) {
    if (!cond) failed.push_back(what);
  };
  {
    FactorState<double> st{Matrix<double>(2, 1), Matrix<double>(1, 2)};
    st.X << 2, 0;
    st.Y << 1, 0;
    const auto ip = transition(st, Matrix<double>(Matrix<double>::Ones(2, 2)));
    expect(ip.x(1) == 2e-6 && ip.y(1) == 2e-6 && ip.x(0) == 2 && ip.y(0) == 1, "clamp at 1e-6 max(x,y)");
  }
  {
    FactorState<double> st{Matrix<double>::Ones(2, 1), Matrix<double>::Ones(1, 1)};
    Matrix<double> m(2, 1);
    m << 4, 2;
    const auto ip = transition(st, m);
    expect(ip.r(0) == 3 && ip.r(1) == 3, "r = max|graX| e");
    expect(ip.s(0) == 4, "s = max|graY| e");
  }
  {
    FactorState<double> st{Matrix<double>::Ones(1, 1), Matrix<double>::Ones(1, 1)};
    const auto ip = transition(st, Matrix<double>(Matrix<double>::Constant(1, 1, 3)), TransitionParams{}, 1e-6);
    expect(ip.r(0) == 2 && ip.s(0) == 2 && ip.mu == 2, "mu = (x'r + y's)/(nk + mk)");
    expect(ip.rho == 1e-6, "rho = eps_tol");
    expect(!ip.use_full_hessian, "flag starts false");
  }
  {
    FactorState<double> st{Matrix<double>::Zero(2, 1), Matrix<double>::Ones(1, 2)};
    bool threw = false;
    try {
      transition(st, Matrix<double>(Matrix<double>::Ones(2, 2)));
    } catch (const DegenerateFactor&) {
      threw = true;
    }
    expect(threw, "zero factor rejected");
  }
  std::string detail = failed.empty() ? "clamp, duals, mu, rho, flag, degenerate input" : "failed:";
  for (const auto& f : failed) detail += " [" + f + "]";
  return {failed.empty(), detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"NNLS oracle equivalence", nnls_oracle},
      {"Newton-direction oracle equivalence", newton_oracle},
      {"gradient checks", gradient_checks},
      {"ANLS monotonicity", anls_monotone},
      {"interior-point invariants at (500,30,3)", ipm_invariants},
      {"two-stage beats stage-1 ablation at (2000,50,3)", two_stage_vs_anls},
      {"consistency across inits at (2000,50,3)", consistency},
      {"per-iteration cost scaling in n", cost_scaling},
      {"transition correctness", transition_checks},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s [%zu] %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
