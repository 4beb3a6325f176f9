#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "gridoed/runner.hpp"

namespace gridoed {

/// Per-iteration CSV, one row per IterationRecord. Column order:
/// k, strategy, rho, trace_v, step_cost, cumulative_cost, mre_g, mre_b,
/// wall_seconds, then u entries, then y_hat entries (g then b), then eta
/// entries. Full double precision, locale-independent.
void write_records_csv(std::ostream& out, const GridModel& model, const RunSummary& summary);

/// Run summary as JSON (includes the final estimate-vs-truth table).
std::string summary_json(const GridModel& model, const RunSummary& summary);

/// Full run (summary + embedded records) as JSON.
std::string run_json(const GridModel& model, const RunSummary& summary);

/// Sweep CSV: rho, cost, trace_v, filtered flag.
void write_sweep_csv(std::ostream& out, const std::vector<TradeoffSample>& samples,
                     const std::vector<TradeoffSample>& filtered);
std::vector<TradeoffSample> read_sweep_csv(std::istream& in, bool filtered_only);

std::string format_double(double v);  // shortest round-trip decimal form

}  // namespace gridoed
