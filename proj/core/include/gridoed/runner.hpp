#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gridoed/autotune.hpp"
#include "gridoed/case_io.hpp"
#include "gridoed/estimator.hpp"
#include "gridoed/oed.hpp"
#include "gridoed/rng.hpp"

namespace gridoed {

enum class StopReason { target_reached, horizon, eps_tolerance, aborted };
const char* to_string(StopReason r);

struct IterationRecord {
    int k = 0;
    Strategy strategy = Strategy::oed_opf_autotuned;
    double rho = 0.0;  // weight in effect when this step's input was chosen
    InputVector u;
    MeasurementVector eta;
    LineParams y_hat;       // estimate after this step's MLE update
    double trace_v = 0.0;   // Tr(V^+), S^2
    double step_cost = 0.0;       // realized cost over the sampling interval, $
    double cumulative_cost = 0.0; // $
    double mre_g = 0.0;
    double mre_b = 0.0;
    double wall_seconds = 0.0;
};

struct RunSummary {
    Strategy strategy = Strategy::oed_opf_autotuned;
    std::uint64_t seed = 0;
    std::vector<IterationRecord> records;
    int terminated_at = 0;
    StopReason reason = StopReason::aborted;
    std::string abort_message;  // set only when reason == aborted

    LineParams truth;
    LineParams final_estimate;
    Eigen::MatrixXd final_information;  // belief information at termination
    double final_trace = 0.0;
    double cumulative_cost = 0.0;
    double grid_hours = 0.0;  // terminated_at * sampling interval
    double wall_seconds = 0.0;

    // Autotuned runs only: the offline trade-off data behind the controller.
    std::vector<TradeoffSample> sweep;
    std::vector<TradeoffSample> sweep_filtered;
    std::optional<InverseTradeoffFit> fit;
};

/// One offline sweep + fit, taken at the belief after the first iteration's
/// estimation step (one measurement incorporated) exactly as a run performs
/// it. Standalone entry point for the sweep/fit CLI subcommands.
struct TradeoffCache {
    std::vector<TradeoffSample> sweep;
    std::vector<TradeoffSample> filtered;
    InverseTradeoffFit fit;
    std::vector<std::string> warnings;
};

/// Measurement of the true system: solves the power flow at (u, y_true) and
/// adds white Gaussian noise from the seeded stream. Throws PFFailure when
/// the operating point does not solve.
MeasurementVector simulate_measurement(const GridModel& model, const LineParams& y_true,
                                       const InputVector& u, NoiseStream& rng,
                                       const Eigen::VectorXd& noise_diag);

/// Full closed loop for one strategy and one seed. Module errors abort the
/// run with the partial trace preserved (reason = aborted).
RunSummary run_algorithm(const ParsedCase& parsed, const ExperimentConfig& config);

/// Builds the trade-off curve the way a run does at its first iteration:
/// initial OPF input, one simulated measurement, one estimation step, then
/// the rho sweep at the resulting belief.
TradeoffCache build_tradeoff_cache(const ParsedCase& parsed, const ExperimentConfig& config);

/// (MRE_g, MRE_b): mean over lines of |est - true| / |true|.
std::pair<double, double> mean_relative_errors(const LineParams& y_est,
                                               const LineParams& y_true);

/// Effective simulation truth: config override or the parsed admittances.
LineParams resolve_truth(const ParsedCase& parsed, const ExperimentConfig& config);
/// Initial estimate: config override or per-class averages of the truth
/// source (all conductances start at the mean g, susceptances at mean b).
LineParams resolve_initial_estimate(const ParsedCase& parsed, const ExperimentConfig& config);

}  // namespace gridoed
