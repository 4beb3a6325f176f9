#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gridoed {

enum class Strategy { opf_mle, pure_oed, oed_opf_autotuned };

/// How the feedback gain of the rho controller is applied. `sign_corrected`
/// evaluates the fitted curve's derivative at the current information level
/// and applies it so that an information deficit lowers rho (more weight on
/// experiment design); `raw` applies the derivative at the per-step
/// information gap exactly as written.
enum class RhoUpdateMode { sign_corrected, raw };

const char* to_string(Strategy s);
const char* to_string(RhoUpdateMode m);
Strategy strategy_from_string(const std::string& s);
RhoUpdateMode rho_update_mode_from_string(const std::string& s);

/// Experiment settings. Defaults reproduce the reference 5-bus study:
/// measurement noise variance 1e-4, vacuous prior 1e20, rho0 1e-4,
/// horizon 25, target trace 1.0.
struct ExperimentConfig {
    int horizon = 25;                    // N
    double target_variance_trace = 1.0;  // Tr(V_N^f), S^2
    double rho0 = 1e-4;
    double termination_eps = 1e-3;
    double noise_variance = 1e-4;   // diagonal of Sigma
    double prior_variance = 1e20;   // diagonal of Sigma_0
    double input_change_weight = 0.1;  // c, p.u.^2 (pure OED only)
    std::uint64_t rng_seed = 1;
    Strategy strategy = Strategy::oed_opf_autotuned;
    double sampling_minutes = 15.0;  // report metadata only

    // rho sweep grid for the offline trade-off fit
    double rho_grid_min = 1e-4;
    double rho_grid_max = 1e2;
    int rho_grid_points = 25;

    RhoUpdateMode rho_update_mode = RhoUpdateMode::sign_corrected;
    bool paper_strict_sensitivity = false;
    /// Estimation solves also try a data-driven start and keep the better
    /// local solution (see MLEOptions::data_start).
    bool mle_data_start = true;
    int refit_every = 0;  // 0 = fit once at the first iteration

    // Ground truth override; empty = use the parsed case admittances.
    std::vector<double> true_g;
    std::vector<double> true_b;
    // Initial estimate override; empty = average of the case admittances.
    std::vector<double> initial_g;
    std::vector<double> initial_b;

    std::vector<std::string> warnings;  // non-fatal validation notes

    void validate();  // throws OutOfRange; fills warnings
};

}  // namespace gridoed
