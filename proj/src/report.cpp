#include "tsnmf/report.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace tsnmf {

namespace {

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

}  // namespace

nlohmann::json report_to_json(const SolveReport<double>& rep, bool include_trace) {
  nlohmann::json j;
  j["schema"] = kReportSchema;
  j["status"] = to_string(rep.status);
  j["message"] = rep.message;
  j["variant"] = to_string(rep.variant);
  j["n"] = rep.n;
  j["m"] = rep.m;
  j["k"] = rep.k;
  j["final_objective"] = number_or_null(rep.final_objective);
  j["final_kkt_error"] = number_or_null(rep.final_kkt_error);
  j["stage1_time"] = rep.stage1_time;
  j["stage2_time"] = rep.stage2_time;
  j["stage1"] = {
      {"sweeps", rep.stage1_sweeps},
      {"status", rep.stage1_status},
      {"nnls",
       {{"solves", rep.nnls.solves},
        {"ls_solves", rep.nnls.ls_solves},
        {"factorizations", rep.nnls.factorizations},
        {"warm_accepted", rep.nnls.warm_accepted},
        {"active_set_changes", rep.nnls.active_set_changes}}},
  };
  j["stage2"] = {
      {"iterations", rep.ipm_iterations},
      {"outer_iterations", rep.ipm_outer_iterations},
      {"status", rep.ipm_status},
      {"max_post_transition_kkt", number_or_null(rep.max_post_transition_kkt)},
  };
  if (include_trace) {
    auto& tr = j["trace"];
    tr = nlohmann::json::array();
    for (const auto& t : rep.trace)
      tr.push_back({{"wall_time_s", t.wall_time},
                    {"stage", t.stage},
                    {"objective", number_or_null(t.objective)},
                    {"kkt_error", number_or_null(t.kkt_error)},
                    {"mu", number_or_null(t.mu)},
                    {"flag", t.flag}});
  }
  return j;
}

void write_trace_csv(std::ostream& out, const SolveReport<double>& rep) {
  out << "wall_time_s,stage,objective,kkt_error,mu\n";
  char buf[128];
  for (const auto& t : rep.trace) {
    std::snprintf(buf, sizeof buf, "%.17g,%s,%.17g,%.17g,", t.wall_time, t.stage.c_str(), t.objective, t.kkt_error);
    out << buf;
    if (std::isfinite(t.mu)) {
      std::snprintf(buf, sizeof buf, "%.17g", t.mu);
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace tsnmf
