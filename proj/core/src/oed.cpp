#include "gridoed/oed.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "gridoed/power_flow.hpp"

namespace gridoed {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

Eigen::MatrixXd sensitivity(const GridModel& model, const StateVector& x,
                            const LineParams& y_hat, SensitivityMode mode) {
    if (y_hat.values.size() != model.param_size())
        throw DimensionMismatch("parameter vector has wrong length");
    const GridJacobians J = model.jacobians(x, y_hat);

    Eigen::PartialPivLU<Eigen::MatrixXd> lu(J.S_x);
    const Eigen::VectorXd diag = lu.matrixLU().diagonal().cwiseAbs();
    if (diag.minCoeff() <= 1e-14 * std::max(1.0, diag.maxCoeff()))
        throw SingularJacobian("dS/dx is singular at the given state");

    Eigen::MatrixXd Mp = -J.M_x * lu.solve(J.S_y);
    if (mode == SensitivityMode::full) Mp += J.M_y;
    return Mp;
}

FisherMatrix fisher(const Eigen::MatrixXd& prior_information, const Eigen::MatrixXd& M_p,
                    const Eigen::VectorXd& noise_diag) {
    const int ny = static_cast<int>(prior_information.rows());
    if (prior_information.cols() != ny)
        throw DimensionMismatch("prior information must be square");
    if (M_p.cols() != ny) throw DimensionMismatch("M_p column count mismatch");
    if (noise_diag.size() != M_p.rows())
        throw DimensionMismatch("noise diagonal does not match M_p rows");
    if (noise_diag.minCoeff() <= 0.0) throw OutOfRange("noise variances must be positive");

    FisherMatrix out;
    out.F = prior_information +
            M_p.transpose() * noise_diag.cwiseInverse().asDiagonal() * M_p;
    out.F = 0.5 * (out.F + out.F.transpose()).eval();

    Eigen::LLT<Eigen::MatrixXd> llt(out.F);
    if (llt.info() != Eigen::Success)
        throw NotPositiveDefinite("Fisher matrix is not positive definite");
    out.covariance = llt.solve(Eigen::MatrixXd::Identity(ny, ny));
    out.trace_inverse = out.covariance.trace();
    return out;
}

TraceEval trace_inverse_with_gradient(const GridModel& model, const StateVector& x,
                                      const LineParams& y_hat,
                                      const Eigen::MatrixXd& prior_information,
                                      const Eigen::VectorXd& noise_diag,
                                      SensitivityMode mode, bool want_gradient) {
    TraceEval out;
    const int nx = model.state_size();
    const Eigen::VectorXd winv = noise_diag.cwiseInverse();

    auto mp_at = [&](const StateVector& xs) { return sensitivity(model, xs, y_hat, mode); };

    Eigen::MatrixXd Mp;
    try {
        Mp = mp_at(x);
    } catch (const SingularJacobian&) {
        out.value = kInf;
        return out;
    }

    Eigen::MatrixXd F = prior_information + Mp.transpose() * winv.asDiagonal() * Mp;
    F = 0.5 * (F + F.transpose()).eval();
    Eigen::LLT<Eigen::MatrixXd> llt(F);
    if (llt.info() != Eigen::Success) {
        out.value = kInf;
        return out;
    }
    const Eigen::MatrixXd W =
        llt.solve(Eigen::MatrixXd::Identity(F.rows(), F.cols()));
    out.value = W.trace();
    if (!want_gradient) return out;

    // dTr(F^{-1}) = -Tr(F^{-1} dF F^{-1}) with dF = dMp^T S^{-1} Mp + Mp^T S^{-1} dMp,
    // which contracts to -2 <S^{-1} Mp W^2, dMp>. dMp/dx_j by central differences.
    const Eigen::MatrixXd T = winv.asDiagonal() * Mp * (W * W);
    out.grad_x.resize(nx);
    StateVector xp = x, xm = x;
    for (int j = 0; j < nx; ++j) {
        const double step = 1e-6 * std::max(1.0, std::abs(x.values[j]));
        xp.values[j] = x.values[j] + step;
        xm.values[j] = x.values[j] - step;
        Eigen::MatrixXd dMp;
        try {
            dMp = (mp_at(xp) - mp_at(xm)) / (2.0 * step);
        } catch (const SingularJacobian&) {
            out.value = kInf;
            out.grad_x.resize(0);
            return out;
        }
        out.grad_x[j] = -2.0 * T.cwiseProduct(dMp).sum();
        xp.values[j] = x.values[j];
        xm.values[j] = x.values[j];
    }
    return out;
}

double generation_cost(const GridCase& grid, const InputVector& u, double slack_p) {
    const double base = grid.base_mva;
    double cost = 0.0;

    // non-slack generators read their set-point from the input vector
    int pos = 0;
    for (int bus = 1; bus <= grid.n_buses(); ++bus) {
        if (bus == grid.slack_bus) continue;
        const GenSpec* gen = grid.generator_at(bus);
        if (gen) {
            const double mw = u.values[2 * pos] * base;
            cost += gen->cost_alpha * mw * mw + gen->cost_beta * mw;
        }
        ++pos;
    }
    const GenSpec* slack_gen = grid.generator_at(grid.slack_bus);
    if (slack_gen) {
        const double mw = slack_p * base;
        cost += slack_gen->cost_alpha * mw * mw + slack_gen->cost_beta * mw;
    }
    return cost;
}

DecisionResult solve_decision(const GridModel& model, const DecisionSpec& spec,
                              const std::optional<DecisionWarmStart>& warm,
                              const nlp::Options& options) {
    const GridCase& grid = model.grid();
    const int nx = model.state_size();
    const int nm = model.measurement_size();
    const auto& ctrl = model.controllable_buses();
    const int nu = 2 * static_cast<int>(ctrl.size());
    const int nz = nx + nu;
    const double base = grid.base_mva;

    spec.belief.validate();
    if (spec.belief.mean.values.size() != model.param_size())
        throw DimensionMismatch("belief mean has wrong length");
    if (spec.noise_diag.size() != nm)
        throw DimensionMismatch("noise diagonal has wrong length");
    if (spec.kind == DecisionKind::oed_opf && spec.rho <= 0.0)
        throw OutOfRange("rho must be positive");
    if (spec.kind == DecisionKind::oed && spec.input_change_weight < 0.0)
        throw OutOfRange("input change weight must be non-negative");
    if (spec.previous_input.values.size() != model.input_size())
        throw DimensionMismatch("previous input has wrong length");

    const LineParams& y_hat = spec.belief.mean;
    const Eigen::MatrixXd prior_reg =
        spec.belief.information +
        1e-12 * std::max(1.0, spec.belief.information.cwiseAbs().maxCoeff()) *
            Eigen::MatrixXd::Identity(model.param_size(), model.param_size());

    const GenSpec* slack_gen = grid.generator_at(grid.slack_bus);
    const double slack_pd = grid.bus(grid.slack_bus).p_demand;
    const double slack_qd = grid.bus(grid.slack_bus).q_demand;

    // expand u_g into the full interleaved input layout
    auto expand = [&](const Eigen::VectorXd& ug) {
        InputVector u{Eigen::VectorXd::Zero(model.input_size())};
        for (std::size_t j = 0; j < ctrl.size(); ++j) {
            const int slot = 2 * model.bus_position(ctrl[j]);
            u.values[slot] = ug[2 * j];
            u.values[slot + 1] = ug[2 * j + 1];
        }
        return u;
    };
    auto state_of = [&](const Eigen::VectorXd& z) {
        StateVector x;
        x.values = z.head(nx);
        x.slack_voltage = grid.slack_voltage;
        return x;
    };

    // ---- initial point
    Eigen::VectorXd z0(nz);
    if (warm) {
        z0.head(nx) = warm->x.values;
        for (std::size_t j = 0; j < ctrl.size(); ++j) {
            const int slot = 2 * model.bus_position(ctrl[j]);
            z0[nx + 2 * j] = warm->u.values[slot];
            z0[nx + 2 * j + 1] = warm->u.values[slot + 1];
        }
    } else {
        double total_pd = 0.0, total_pmax = 0.0;
        for (const auto& b : grid.buses) total_pd += b.p_demand;
        for (int bus : ctrl) total_pmax += grid.generator_at(bus)->p_max;
        for (std::size_t j = 0; j < ctrl.size(); ++j) {
            const GenSpec* gen = grid.generator_at(ctrl[j]);
            const double share =
                total_pmax > 0.0 ? total_pd * gen->p_max / total_pmax : 0.0;
            z0[nx + 2 * j] = std::clamp(share, gen->p_min, gen->p_max);
            z0[nx + 2 * j + 1] = std::clamp(0.0, gen->q_min, gen->q_max);
        }
        PowerFlowOptions pf;
        pf.throw_on_failure = false;
        const PFSolution sol =
            solve_power_flow(model, y_hat, expand(z0.tail(nu)), {}, pf);
        z0.head(nx) = (sol.converged ? sol.x : model.flat_state()).values;
    }

    // ---- objective pieces
    auto slack_p_of = [&](const StateVector& x) {
        return model.slack_injection(x, y_hat).first + slack_pd;
    };
    auto cost_eval = [&](const Eigen::VectorXd& z, Eigen::VectorXd* grad) {
        const StateVector x = state_of(z);
        double c = 0.0;
        if (grad) grad->setZero(nz);
        for (std::size_t j = 0; j < ctrl.size(); ++j) {
            const GenSpec* gen = grid.generator_at(ctrl[j]);
            const double mw = z[nx + 2 * j] * base;
            c += gen->cost_alpha * mw * mw + gen->cost_beta * mw;
            if (grad)
                (*grad)[nx + 2 * j] = (2.0 * gen->cost_alpha * mw + gen->cost_beta) * base;
        }
        if (slack_gen) {
            const double p1 = slack_p_of(x);
            const double mw = p1 * base;
            c += slack_gen->cost_alpha * mw * mw + slack_gen->cost_beta * mw;
            if (grad) {
                const double dmw = (2.0 * slack_gen->cost_alpha * mw + slack_gen->cost_beta) * base;
                grad->head(nx) += dmw * model.slack_injection_jacobian(x, y_hat).row(0).transpose();
            }
        }
        return c;
    };
    auto trace_eval = [&](const Eigen::VectorXd& z, Eigen::VectorXd* grad) {
        const TraceEval te = trace_inverse_with_gradient(
            model, state_of(z), y_hat, prior_reg, spec.noise_diag,
            spec.sensitivity_mode, grad != nullptr);
        if (grad) {
            grad->setZero(nz);
            if (te.grad_x.size() == nx) grad->head(nx) = te.grad_x;
        }
        return te.value;
    };

    Eigen::VectorXd prev_p(ctrl.size());
    for (std::size_t j = 0; j < ctrl.size(); ++j)
        prev_p[j] = spec.previous_input.values[2 * model.bus_position(ctrl[j])];

    auto raw_objective = [&](const Eigen::VectorXd& z, Eigen::VectorXd* grad) -> double {
        Eigen::VectorXd gc, gt;
        double f = 0.0;
        switch (spec.kind) {
            case DecisionKind::opf:
                f = cost_eval(z, grad);
                break;
            case DecisionKind::oed: {
                f = trace_eval(z, grad);
                for (std::size_t j = 0; j < ctrl.size(); ++j) {
                    const double dp = z[nx + 2 * j] - prev_p[j];
                    f += spec.input_change_weight * dp * dp;
                    if (grad) (*grad)[nx + 2 * j] += 2.0 * spec.input_change_weight * dp;
                }
                break;
            }
            case DecisionKind::oed_opf: {
                f = cost_eval(z, grad ? &gc : nullptr);
                const double tv = trace_eval(z, grad ? &gt : nullptr);
                f += tv / spec.rho;
                if (grad) *grad = gc + gt / spec.rho;
                break;
            }
        }
        return f;
    };

    const double f0 = raw_objective(z0, nullptr);
    const double scale = std::isfinite(f0) ? std::max(1.0, std::abs(f0)) : 1.0;

    nlp::Problem prob;
    prob.dimension = nz;
    prob.initial_point = z0;
    prob.objective = [&](const Eigen::VectorXd& z, Eigen::VectorXd* grad) {
        const double f = raw_objective(z, grad);
        if (grad) *grad /= scale;
        return f / scale;
    };

    const Eigen::VectorXd rhs_d = model.demand_vector();
    prob.n_eq = nx;
    prob.equalities = [&](const Eigen::VectorXd& z, Eigen::VectorXd& c, Eigen::MatrixXd* jac) {
        const StateVector x = state_of(z);
        c = model.residual_injection(x, y_hat) + rhs_d;
        for (std::size_t j = 0; j < ctrl.size(); ++j) {
            const int slot = 2 * model.bus_position(ctrl[j]);
            c[slot] -= z[nx + 2 * j];
            c[slot + 1] -= z[nx + 2 * j + 1];
        }
        if (jac) {
            jac->setZero(nx, nz);
            jac->leftCols(nx) = model.jacobians(x, y_hat).S_x;
            for (std::size_t j = 0; j < ctrl.size(); ++j) {
                const int slot = 2 * model.bus_position(ctrl[j]);
                (*jac)(slot, nx + 2 * j) = -1.0;
                (*jac)(slot + 1, nx + 2 * j + 1) = -1.0;
            }
        }
    };

    // slack generator limits act through the solved state
    const bool slack_limits =
        slack_gen && (std::isfinite(slack_gen->p_min) || std::isfinite(slack_gen->p_max) ||
                      std::isfinite(slack_gen->q_min) || std::isfinite(slack_gen->q_max));
    if (slack_limits) {
        prob.n_ineq = 4;
        prob.inequalities = [&, slack_gen](const Eigen::VectorXd& z, Eigen::VectorXd& h,
                                           Eigen::MatrixXd* jac) {
            const StateVector x = state_of(z);
            const auto [sp, sq] = model.slack_injection(x, y_hat);
            const double p1 = sp + slack_pd;
            const double q1 = sq + slack_qd;
            h.resize(4);
            h[0] = p1 - slack_gen->p_max;
            h[1] = slack_gen->p_min - p1;
            h[2] = q1 - slack_gen->q_max;
            h[3] = slack_gen->q_min - q1;
            if (jac) {
                jac->setZero(4, nz);
                const Eigen::MatrixXd sj = model.slack_injection_jacobian(x, y_hat);
                jac->row(0).head(nx) = sj.row(0);
                jac->row(1).head(nx) = -sj.row(0);
                jac->row(2).head(nx) = sj.row(1);
                jac->row(3).head(nx) = -sj.row(1);
            }
        };
    }

    // operating envelope H: nominal voltage band, loose angle band, generator boxes
    prob.lower_bounds = Eigen::VectorXd::Constant(nz, -kInf);
    prob.upper_bounds = Eigen::VectorXd::Constant(nz, kInf);
    for (const auto& bus : grid.buses) {
        if (model.is_slack(bus.index)) continue;
        const int slot = 2 * model.bus_position(bus.index);
        if (bus.v_min > bus.v_max) throw Infeasible("voltage bounds inconsistent");
        prob.lower_bounds[slot] = bus.v_min;
        prob.upper_bounds[slot] = bus.v_max;
        prob.lower_bounds[slot + 1] = -M_PI / 2.0;
        prob.upper_bounds[slot + 1] = M_PI / 2.0;
    }
    for (std::size_t j = 0; j < ctrl.size(); ++j) {
        const GenSpec* gen = grid.generator_at(ctrl[j]);
        if (gen->p_min > gen->p_max || gen->q_min > gen->q_max)
            throw Infeasible("generator bounds inconsistent");
        prob.lower_bounds[nx + 2 * j] = gen->p_min;
        prob.upper_bounds[nx + 2 * j] = gen->p_max;
        prob.lower_bounds[nx + 2 * j + 1] = gen->q_min;
        prob.upper_bounds[nx + 2 * j + 1] = gen->q_max;
    }

    const nlp::Solution sol = nlp::solve(prob, options);
    if (sol.status == nlp::Status::failure)
        throw NLPFailure("decision solve failed (kkt residual " +
                         std::to_string(sol.kkt_residual) + ")");

    DecisionResult out;
    out.x = state_of(sol.z);
    out.u = expand(sol.z.tail(nu));
    out.status = sol.status;
    out.kkt_residual = sol.kkt_residual;
    out.cost = generation_cost(grid, out.u, slack_p_of(out.x));
    out.trace_v = trace_eval(sol.z, nullptr);
    return out;
}

}  // namespace gridoed
