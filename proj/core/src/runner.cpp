#include "gridoed/runner.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "gridoed/power_flow.hpp"

namespace gridoed {

const char* to_string(StopReason r) {
    switch (r) {
        case StopReason::target_reached: return "target_reached";
        case StopReason::horizon: return "horizon";
        case StopReason::eps_tolerance: return "eps_tolerance";
        case StopReason::aborted: return "aborted";
    }
    return "?";
}

std::pair<double, double> mean_relative_errors(const LineParams& y_est,
                                               const LineParams& y_true) {
    if (y_est.values.size() != y_true.values.size())
        throw DimensionMismatch("estimate and truth have different lengths");
    const int L = y_true.n_lines();
    if (L == 0) throw DimensionMismatch("empty parameter vectors");
    double mg = 0.0, mb = 0.0;
    for (int i = 0; i < L; ++i) {
        if (y_true.g(i) == 0.0 || y_true.b(i) == 0.0)
            throw ZeroTruthEntry("true parameter is zero at line " + std::to_string(i));
        mg += std::abs(y_est.g(i) - y_true.g(i)) / std::abs(y_true.g(i));
        mb += std::abs(y_est.b(i) - y_true.b(i)) / std::abs(y_true.b(i));
    }
    return {mg / L, mb / L};
}

LineParams resolve_truth(const ParsedCase& parsed, const ExperimentConfig& config) {
    const int L = parsed.grid.n_lines();
    if (config.true_g.empty()) return parsed.line_params;
    if (static_cast<int>(config.true_g.size()) != L)
        throw DimensionMismatch("true_g override does not match the case line count");
    LineParams y = LineParams::zeros(L);
    for (int i = 0; i < L; ++i) {
        y.g(i) = config.true_g[i];
        y.b(i) = config.true_b[i];
    }
    return y;
}

LineParams resolve_initial_estimate(const ParsedCase& parsed, const ExperimentConfig& config) {
    const int L = parsed.grid.n_lines();
    if (!config.initial_g.empty()) {
        if (static_cast<int>(config.initial_g.size()) != L)
            throw DimensionMismatch("initial_g override does not match the case line count");
        LineParams y = LineParams::zeros(L);
        for (int i = 0; i < L; ++i) {
            y.g(i) = config.initial_g[i];
            y.b(i) = config.initial_b[i];
        }
        return y;
    }
    // default: every line starts at the average of the parsed admittances
    double gm = 0.0, bm = 0.0;
    for (int i = 0; i < L; ++i) {
        gm += parsed.line_params.g(i);
        bm += parsed.line_params.b(i);
    }
    gm /= L;
    bm /= L;
    LineParams y = LineParams::zeros(L);
    for (int i = 0; i < L; ++i) {
        y.g(i) = gm;
        y.b(i) = bm;
    }
    return y;
}

namespace {

struct SimulatedStep {
    StateVector x_true;
    MeasurementVector eta;
};

SimulatedStep simulate_with_state(const GridModel& model, const LineParams& y_true,
                                  const InputVector& u, NoiseStream& rng,
                                  const Eigen::VectorXd& noise_diag) {
    SimulatedStep out;
    try {
        const PFSolution sol = solve_power_flow(model, y_true, u);
        out.x_true = sol.x;
    } catch (const Error& e) {
        throw PFFailure(std::string("true-system power flow failed: ") + e.what());
    }
    out.eta = model.measurement(out.x_true, y_true);
    for (int i = 0; i < out.eta.values.size(); ++i)
        out.eta.values[i] += std::sqrt(noise_diag[i]) * rng.normal();
    return out;
}

DecisionKind kind_for(Strategy s) {
    switch (s) {
        case Strategy::opf_mle: return DecisionKind::opf;
        case Strategy::pure_oed: return DecisionKind::oed;
        case Strategy::oed_opf_autotuned: return DecisionKind::oed_opf;
    }
    return DecisionKind::opf;
}

}  // namespace

MeasurementVector simulate_measurement(const GridModel& model, const LineParams& y_true,
                                       const InputVector& u, NoiseStream& rng,
                                       const Eigen::VectorXd& noise_diag) {
    if (noise_diag.size() != model.measurement_size())
        throw DimensionMismatch("noise diagonal has wrong length");
    if (noise_diag.minCoeff() < 0.0) throw OutOfRange("noise variances must be non-negative");
    return simulate_with_state(model, y_true, u, rng, noise_diag).eta;
}

namespace {

TradeoffCache sweep_and_fit(const GridModel& model, const Belief& belief,
                            const InputVector& previous_input,
                            const Eigen::VectorXd& noise,
                            const ExperimentConfig& config, SensitivityMode mode) {
    TradeoffCache cache;
    SweepOptions opts;
    opts.sensitivity_mode = mode;
    const auto grid =
        log_spaced_grid(config.rho_grid_min, config.rho_grid_max, config.rho_grid_points);
    cache.sweep = pareto_sweep(model, belief, grid, previous_input, noise, opts,
                               &cache.warnings);
    cache.filtered = pareto_filter(cache.sweep);
    cache.fit = fit_inverse_tradeoff(cache.filtered);
    return cache;
}

}  // namespace

TradeoffCache build_tradeoff_cache(const ParsedCase& parsed, const ExperimentConfig& config) {
    const GridModel model(parsed.grid);
    const SensitivityMode mode = config.paper_strict_sensitivity
                                     ? SensitivityMode::paper_strict
                                     : SensitivityMode::full;
    const LineParams y0 = resolve_initial_estimate(parsed, config);
    const Belief prior = Belief::isotropic(y0, config.prior_variance);
    const Eigen::VectorXd noise =
        Eigen::VectorXd::Constant(model.measurement_size(), config.noise_variance);

    DecisionSpec opf_spec;
    opf_spec.kind = DecisionKind::opf;
    opf_spec.belief = prior;
    opf_spec.previous_input = model.zero_input();
    opf_spec.noise_diag = noise;
    opf_spec.sensitivity_mode = mode;
    const DecisionResult opf = solve_decision(model, opf_spec);

    NoiseStream rng(config.rng_seed);
    const SimulatedStep sim =
        simulate_with_state(model, resolve_truth(parsed, config), opf.u, rng, noise);
    MLEOptions mle_opts;
    mle_opts.sensitivity_mode = mode;
    mle_opts.data_start = config.mle_data_start;
    const MLEOutcome mle = mle_update(model, prior, opf.u, sim.eta, noise, mle_opts);

    return sweep_and_fit(model, mle.posterior, opf.u, noise, config, mode);
}

RunSummary run_algorithm(const ParsedCase& parsed, const ExperimentConfig& config) {
    using clock = std::chrono::steady_clock;
    const auto run_start = clock::now();

    const GridModel model(parsed.grid);
    const SensitivityMode mode = config.paper_strict_sensitivity
                                     ? SensitivityMode::paper_strict
                                     : SensitivityMode::full;

    RunSummary summary;
    summary.strategy = config.strategy;
    summary.seed = config.rng_seed;
    summary.truth = resolve_truth(parsed, config);
    summary.final_estimate = resolve_initial_estimate(parsed, config);

    const Eigen::VectorXd noise =
        Eigen::VectorXd::Constant(model.measurement_size(), config.noise_variance);
    Belief belief = Belief::isotropic(summary.final_estimate, config.prior_variance);

    MLEOptions mle_opts;
    mle_opts.sensitivity_mode = mode;
    mle_opts.data_start = config.mle_data_start;

    nlp::Options decision_opts;  // defaults; decision problems are local solves

    try {
        // first input: plain OPF at the prior-mean parameters
        DecisionSpec spec;
        spec.kind = DecisionKind::opf;
        spec.belief = belief;
        spec.previous_input = model.zero_input();
        spec.noise_diag = noise;
        spec.sensitivity_mode = mode;
        DecisionResult dec = solve_decision(model, spec, {}, decision_opts);
        InputVector u = dec.u;

        // the trade-off sweep and fit happen after the first estimation step
        // (one measurement incorporated), so the controller appears inside
        // the loop at k = 1
        std::optional<RhoController> controller;
        double current_rho =
            config.strategy == Strategy::oed_opf_autotuned ? config.rho0 : 0.0;
        const double info_floor = 1.0 / config.prior_variance;
        const double initial_trace = belief.trace_covariance(info_floor);

        NoiseStream rng(config.rng_seed);
        double prev_trace = std::numeric_limits<double>::infinity();
        double cumulative = 0.0;

        for (int k = 1; k <= config.horizon; ++k) {
            const auto step_start = clock::now();

            const SimulatedStep sim = simulate_with_state(model, summary.truth, u, rng, noise);
            const MLEOutcome mle = mle_update(model, belief, u, sim.eta, noise, mle_opts);
            belief = mle.posterior;

            const double trace_plus = belief.trace_covariance(info_floor);
            if (trace_plus > prev_trace * (1.0 + 1e-9) + 1e-12)
                throw Error("information recursion lost monotonicity at step " +
                            std::to_string(k));
            prev_trace = trace_plus;

            if (config.strategy == Strategy::oed_opf_autotuned && k == 1) {
                const TradeoffCache cache =
                    sweep_and_fit(model, belief, u, noise, config, mode);
                summary.sweep = cache.sweep;
                summary.sweep_filtered = cache.filtered;
                summary.fit = cache.fit;
                controller.emplace(config.rho0, cache.fit, config.horizon,
                                   config.target_variance_trace, initial_trace,
                                   config.rho_update_mode);
            }

            const double slack_p =
                model.slack_injection(sim.x_true, summary.truth).first +
                model.grid().bus(model.grid().slack_bus).p_demand;
            const double rate = generation_cost(model.grid(), u, slack_p);
            const double step_cost = rate * config.sampling_minutes / 60.0;
            cumulative += step_cost;

            const auto [mre_g, mre_b] = mean_relative_errors(belief.mean, summary.truth);

            IterationRecord rec;
            rec.k = k;
            rec.strategy = config.strategy;
            rec.rho = current_rho;
            rec.u = u;
            rec.eta = sim.eta;
            rec.y_hat = belief.mean;
            rec.trace_v = trace_plus;
            rec.step_cost = step_cost;
            rec.cumulative_cost = cumulative;
            rec.mre_g = mre_g;
            rec.mre_b = mre_b;
            rec.wall_seconds =
                std::chrono::duration<double>(clock::now() - step_start).count();
            summary.records.push_back(std::move(rec));

            if (trace_plus < config.termination_eps) {
                summary.reason = StopReason::eps_tolerance;
                break;
            }
            if (trace_plus <= config.target_variance_trace) {
                summary.reason = StopReason::target_reached;
                break;
            }
            if (k == config.horizon) {
                summary.reason = StopReason::horizon;
                break;
            }

            if (controller) {
                current_rho = controller->update(trace_plus);
                if (config.refit_every > 0 && k % config.refit_every == 0) {
                    std::vector<std::string> notes;
                    SweepOptions so;
                    so.sensitivity_mode = mode;
                    const auto grid = log_spaced_grid(config.rho_grid_min, config.rho_grid_max,
                                                      config.rho_grid_points);
                    const auto sweep =
                        pareto_sweep(model, belief, grid, u, noise, so, &notes);
                    controller->refit(fit_inverse_tradeoff(pareto_filter(sweep)));
                }
            }

            spec.kind = kind_for(config.strategy);
            spec.rho = current_rho;
            spec.input_change_weight = config.input_change_weight;
            spec.belief = belief;
            spec.previous_input = u;
            dec = solve_decision(model, spec, DecisionWarmStart{mle.x, u}, decision_opts);
            u = dec.u;
        }
    } catch (const Error& e) {
        summary.reason = StopReason::aborted;
        summary.abort_message = e.what();
    }

    summary.final_information = belief.information;
    summary.terminated_at = static_cast<int>(summary.records.size());
    if (!summary.records.empty()) {
        summary.final_estimate = summary.records.back().y_hat;
        summary.final_trace = summary.records.back().trace_v;
        summary.cumulative_cost = summary.records.back().cumulative_cost;
    }
    summary.grid_hours = summary.terminated_at * config.sampling_minutes / 60.0;
    summary.wall_seconds = std::chrono::duration<double>(clock::now() - run_start).count();
    return summary;
}

}  // namespace gridoed
