#include "gridoed/autotune.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>
#include <thread>

namespace gridoed {

double InverseTradeoffFit::rho_at_information(double info) const {
    return amplitude * std::exp(-decay * info * info);
}

double InverseTradeoffFit::derivative_at_information(double info) const {
    return -2.0 * amplitude * decay * info * std::exp(-decay * info * info);
}

std::vector<double> log_spaced_grid(double lo, double hi, int points) {
    if (lo <= 0.0 || hi < lo || points < 1) throw OutOfRange("bad log grid");
    std::vector<double> grid(points);
    if (points == 1) {
        grid[0] = lo;
        return grid;
    }
    const double llo = std::log(lo), lhi = std::log(hi);
    for (int i = 0; i < points; ++i)
        grid[i] = std::exp(llo + (lhi - llo) * i / (points - 1));
    return grid;
}

std::vector<TradeoffSample> pareto_sweep(const GridModel& model, const Belief& belief,
                                         const std::vector<double>& rho_grid,
                                         const InputVector& previous_input,
                                         const Eigen::VectorXd& noise_diag,
                                         const SweepOptions& options,
                                         std::vector<std::string>* warnings) {
    if (rho_grid.empty()) throw OutOfRange("rho grid is empty");
    for (std::size_t i = 0; i < rho_grid.size(); ++i) {
        if (rho_grid[i] <= 0.0) throw OutOfRange("rho grid entries must be positive");
        if (i > 0 && rho_grid[i] < rho_grid[i - 1])
            throw OutOfRange("rho grid must be sorted ascending");
    }

    struct Slot {
        bool ok = false;
        TradeoffSample sample;
        std::string note;
    };
    std::vector<Slot> slots(rho_grid.size());

    auto solve_point = [&](std::size_t i) {
        DecisionSpec spec;
        spec.kind = DecisionKind::oed_opf;
        spec.rho = rho_grid[i];
        spec.belief = belief;
        spec.previous_input = previous_input;
        spec.noise_diag = noise_diag;
        spec.sensitivity_mode = options.sensitivity_mode;
        try {
            const DecisionResult r = solve_decision(model, spec, {}, options.nlp);
            if (r.status == nlp::Status::failure ||
                (r.status == nlp::Status::max_iter && r.kkt_residual > 1e-3)) {
                slots[i].note = "rho=" + std::to_string(rho_grid[i]) +
                                ": solve did not converge (kkt " +
                                std::to_string(r.kkt_residual) + ")";
                return;
            }
            if (!std::isfinite(r.cost) || !std::isfinite(r.trace_v)) {
                slots[i].note = "rho=" + std::to_string(rho_grid[i]) + ": non-finite objective parts";
                return;
            }
            slots[i].ok = true;
            slots[i].sample = TradeoffSample{rho_grid[i], r.cost, r.trace_v};
        } catch (const Error& e) {
            slots[i].note = "rho=" + std::to_string(rho_grid[i]) + ": " + e.what();
        }
    };

    const unsigned workers =
        std::min<unsigned>(std::max(1u, std::thread::hardware_concurrency()),
                           static_cast<unsigned>(rho_grid.size()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < rho_grid.size(); ++i) solve_point(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < rho_grid.size();
                     i = next.fetch_add(1))
                    solve_point(i);
            });
        }
        for (auto& t : pool) t.join();
    }

    std::vector<TradeoffSample> out;
    for (auto& s : slots) {
        if (s.ok) out.push_back(s.sample);
        else if (warnings) warnings->push_back(s.note);
    }
    if (out.empty()) throw AllSolvesFailed("every sweep solve failed");
    return out;
}

std::vector<TradeoffSample> pareto_filter(const std::vector<TradeoffSample>& samples) {
    std::vector<TradeoffSample> kept;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        bool dominated = false;
        bool duplicate = false;
        for (std::size_t j = 0; j < samples.size() && !dominated; ++j) {
            if (i == j) continue;
            const bool leq = samples[j].cost <= samples[i].cost &&
                             samples[j].trace_v <= samples[i].trace_v;
            const bool strict = samples[j].cost < samples[i].cost ||
                                samples[j].trace_v < samples[i].trace_v;
            if (leq && strict) dominated = true;
            if (!strict && leq && j < i) duplicate = true;  // exact tie: keep first
        }
        if (!dominated && !duplicate) kept.push_back(samples[i]);
    }
    std::sort(kept.begin(), kept.end(), [](const TradeoffSample& a, const TradeoffSample& b) {
        return a.trace_v < b.trace_v;
    });
    return kept;
}

InverseTradeoffFit fit_inverse_tradeoff(const std::vector<TradeoffSample>& samples) {
    if (samples.size() < 3)
        throw InsufficientSamples("need at least 3 samples, got " +
                                  std::to_string(samples.size()));

    const int n = static_cast<int>(samples.size());
    Eigen::MatrixXd A(n, 2);
    Eigen::VectorXd rhs(n);
    for (int i = 0; i < n; ++i) {
        if (samples[i].trace_v <= 0.0 || samples[i].rho <= 0.0)
            throw OutOfRange("samples must have positive rho and trace");
        const double info = 1.0 / samples[i].trace_v;
        A(i, 0) = 1.0;
        A(i, 1) = -info * info;
        rhs[i] = std::log(samples[i].rho);
    }

    // rank check: regressor must actually vary
    const double spread = A.col(1).maxCoeff() - A.col(1).minCoeff();
    const double mag = std::max(1.0, A.col(1).cwiseAbs().maxCoeff());
    if (spread <= 1e-12 * mag)
        throw DegenerateFit("information levels do not vary across samples");

    const Eigen::Vector2d coef = A.colPivHouseholderQr().solve(rhs);
    InverseTradeoffFit fit;
    fit.amplitude = std::exp(coef[0]);
    fit.decay = coef[1];
    fit.residual = std::sqrt((A * coef - rhs).squaredNorm() / n);
    if (!(fit.decay > 0.0))
        throw DegenerateFit("fitted decay rate is not positive (" +
                            std::to_string(fit.decay) + ")");
    return fit;
}

RhoController::RhoController(double rho0, InverseTradeoffFit fit, int horizon,
                             double target_trace, double initial_trace, RhoUpdateMode mode)
    : rho_(rho0), fit_(fit), horizon_(horizon), target_trace_(target_trace), mode_(mode) {
    if (rho0 <= 0.0) throw OutOfRange("rho0 must be positive");
    if (horizon < 1) throw OutOfRange("horizon must be >= 1");
    if (target_trace <= 0.0 || initial_trace <= 0.0)
        throw OutOfRange("traces must be positive");
    i0_ = (1.0 / horizon) * (1.0 / target_trace - 1.0 / initial_trace);
    rho_ = std::clamp(rho_, kRhoMin, kRhoMax);
}

double RhoController::update(double trace_v_plus) {
    if (k_ >= horizon_)
        throw HorizonExhausted("controller already consumed all " +
                               std::to_string(horizon_) + " steps");
    if (trace_v_plus <= 0.0) throw OutOfRange("trace must be positive");

    const double i_plus =
        (1.0 / (horizon_ - k_)) * (1.0 / target_trace_ - 1.0 / trace_v_plus);

    double delta = 0.0;
    if (mode_ == RhoUpdateMode::sign_corrected) {
        // gain magnitude from the fitted curve at the current information
        // level; an information deficit (i_plus > i0) lowers rho
        const double gain =
            std::abs(fit_.derivative_at_information(1.0 / trace_v_plus));
        delta = -gain * (i_plus - i0_);
    } else {
        delta = fit_.derivative_at_information(i_plus) * (i_plus - i0_);
    }
    rho_ = std::clamp(rho_ + delta, kRhoMin, kRhoMax);
    ++k_;
    return rho_;
}

}  // namespace gridoed
