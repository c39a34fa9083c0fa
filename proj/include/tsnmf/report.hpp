#pragma once

#include <iosfwd>

#include <json.hpp>

#include "tsnmf/two_stage.hpp"

namespace tsnmf {

inline constexpr const char* kReportSchema = "tsnmf.solve_report/1";

/// JSON form of a SolveReport. Keys ending in "time" or "time_s" hold wall
/// (or CPU) seconds; everything else is a deterministic function of the
/// input and configuration.
nlohmann::json report_to_json(const SolveReport<double>& rep, bool include_trace = true);

/// CSV trace with header wall_time_s,stage,objective,kkt_error,mu. The mu
/// column is empty for stage-1 rows.
void write_trace_csv(std::ostream& out, const SolveReport<double>& rep);

}  // namespace tsnmf
