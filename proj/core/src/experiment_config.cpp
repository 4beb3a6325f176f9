#include "gridoed/experiment_config.hpp"

#include <string>

#include "gridoed/errors.hpp"

namespace gridoed {

const char* to_string(Strategy s) {
    switch (s) {
        case Strategy::opf_mle: return "opf_mle";
        case Strategy::pure_oed: return "pure_oed";
        case Strategy::oed_opf_autotuned: return "oed_opf_autotuned";
    }
    return "?";
}

const char* to_string(RhoUpdateMode m) {
    return m == RhoUpdateMode::sign_corrected ? "sign_corrected" : "raw";
}

Strategy strategy_from_string(const std::string& s) {
    if (s == "opf_mle") return Strategy::opf_mle;
    if (s == "pure_oed") return Strategy::pure_oed;
    if (s == "oed_opf_autotuned") return Strategy::oed_opf_autotuned;
    throw OutOfRange("unknown strategy '" + s + "'");
}

RhoUpdateMode rho_update_mode_from_string(const std::string& s) {
    if (s == "sign_corrected") return RhoUpdateMode::sign_corrected;
    if (s == "raw") return RhoUpdateMode::raw;
    throw OutOfRange("unknown rho_update_mode '" + s + "'");
}

void ExperimentConfig::validate() {
    if (horizon < 1) throw OutOfRange("horizon must be >= 1");
    if (target_variance_trace <= 0.0) throw OutOfRange("target_variance_trace must be > 0");
    if (rho0 <= 0.0) throw OutOfRange("rho0 must be > 0");
    if (termination_eps <= 0.0) throw OutOfRange("termination_eps must be > 0");
    if (noise_variance <= 0.0) throw OutOfRange("noise_variance must be > 0");
    if (prior_variance <= 0.0) throw OutOfRange("prior_variance must be > 0");
    if (input_change_weight < 0.0) throw OutOfRange("input_change_weight must be >= 0");
    if (sampling_minutes <= 0.0) throw OutOfRange("sampling_minutes must be > 0");
    if (rho_grid_min <= 0.0 || rho_grid_max <= 0.0 || rho_grid_min > rho_grid_max)
        throw OutOfRange("rho grid must be positive with min <= max");
    if (rho_grid_points < 1) throw OutOfRange("rho_grid_points must be >= 1");
    if (refit_every < 0) throw OutOfRange("refit_every must be >= 0");
    if (true_g.size() != true_b.size())
        throw OutOfRange("true_g and true_b must have the same length");
    if (initial_g.size() != initial_b.size())
        throw OutOfRange("initial_g and initial_b must have the same length");

    for (double g : true_g) {
        if (g <= 0.0) throw OutOfRange("true conductances must be strictly positive");
    }
    // Sign convention for susceptances is a case convention; warn only.
    for (double b : true_b) {
        if (b >= 0.0) {
            warnings.push_back("true susceptance " + std::to_string(b) +
                               " is non-negative; expected b < 0 for inductive lines");
            break;
        }
    }
}

}  // namespace gridoed
