#pragma once

#include <string>
#include <vector>

#include "gridoed/experiment_config.hpp"
#include "gridoed/oed.hpp"

namespace gridoed {

struct TradeoffSample {
    double rho = 0.0;
    double cost = 0.0;     // C(u*(rho)), $/h
    double trace_v = 0.0;  // Tr(V) at the solution, S^2
};

/// Two-parameter exponential fit of the rho / information trade-off:
/// rho ~= amplitude * exp(-decay * w^2) with w = 1/trace_v the information
/// level. This is the inverse trade-off map used by the rho controller.
struct InverseTradeoffFit {
    double amplitude = 0.0;  // a > 0
    double decay = 0.0;      // lambda > 0
    double residual = 0.0;   // RMS misfit of log(rho)

    double rho_at_information(double info) const;
    double derivative_at_information(double info) const;  // d(rho)/d(info)
};

struct SweepOptions {
    nlp::Options nlp;
    SensitivityMode sensitivity_mode = SensitivityMode::full;
};

/// One oed_opf decision solve per grid point; failed solves are dropped
/// with a note in `warnings`. Throws AllSolvesFailed when nothing survives.
std::vector<TradeoffSample> pareto_sweep(const GridModel& model, const Belief& belief,
                                         const std::vector<double>& rho_grid,
                                         const InputVector& previous_input,
                                         const Eigen::VectorXd& noise_diag,
                                         const SweepOptions& options = {},
                                         std::vector<std::string>* warnings = nullptr);

std::vector<double> log_spaced_grid(double lo, double hi, int points);

/// Maximal domination-free subset, sorted by trace ascending with cost
/// strictly decreasing. Exact duplicates collapse to one representative.
std::vector<TradeoffSample> pareto_filter(const std::vector<TradeoffSample>& samples);

/// Least-squares fit of log(rho) against the squared information level.
/// Requires >= 3 samples (InsufficientSamples) and a positive decay rate
/// (DegenerateFit otherwise).
InverseTradeoffFit fit_inverse_tradeoff(const std::vector<TradeoffSample>& samples);

/// Feedback law for the trade-off weight: tracks the average information
/// that must be gathered per remaining step and nudges rho with a gain
/// taken from the fitted curve's derivative.
class RhoController {
public:
    RhoController(double rho0, InverseTradeoffFit fit, int horizon,
                  double target_trace, double initial_trace,
                  RhoUpdateMode mode = RhoUpdateMode::sign_corrected);

    double rho() const { return rho_; }
    int step() const { return k_; }
    double required_information_rate() const { return i0_; }

    /// Consumes the realized posterior trace of step k and returns the rho
    /// to use for the next decision solve. Throws HorizonExhausted once all
    /// N steps are spent.
    double update(double trace_v_plus);

    /// Replaces the fitted trade-off map (periodic refit extension).
    void refit(const InverseTradeoffFit& fit) { fit_ = fit; }

    static constexpr double kRhoMin = 1e-8;
    static constexpr double kRhoMax = 1e8;

private:
    double rho_;
    InverseTradeoffFit fit_;
    int horizon_;
    double target_trace_;
    double i0_;  // required mean information gain per step
    int k_ = 1;
    RhoUpdateMode mode_;
};

}  // namespace gridoed
