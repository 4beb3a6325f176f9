#include "gridoed/grid_model.hpp"

#include <cmath>
#include <string>

namespace gridoed {

// Flow and partials at the measuring end k of a line towards l:
//   A = v_k^2 - v_k v_l cos(theta_k - theta_l),  B = v_k v_l sin(theta_k - theta_l)
//   p =  g A - b B
//   q = -b A - g B
struct GridModel::FlowTerms {
    double p = 0.0, q = 0.0;
    double A = 0.0, B = 0.0;
    // partial order: v_k, theta_k, v_l, theta_l
    double dp[4] = {0, 0, 0, 0};
    double dq[4] = {0, 0, 0, 0};

    FlowTerms(double vk, double thk, double vl, double thl, double g, double b) {
        const double c = std::cos(thk - thl);
        const double s = std::sin(thk - thl);
        A = vk * vk - vk * vl * c;
        B = vk * vl * s;
        p = g * A - b * B;
        q = -b * A - g * B;

        const double dA[4] = {2.0 * vk - vl * c, vk * vl * s, -vk * c, -vk * vl * s};
        const double dB[4] = {vl * s, vk * vl * c, vk * s, -vk * vl * c};
        for (int i = 0; i < 4; ++i) {
            dp[i] = g * dA[i] - b * dB[i];
            dq[i] = -b * dA[i] - g * dB[i];
        }
    }
};

GridModel::GridModel(GridCase grid) : grid_(std::move(grid)) {
    grid_.validate();
    const int n = grid_.n_buses();

    bus_pos_.assign(n + 1, -1);
    int pos = 0;
    for (int bus = 1; bus <= n; ++bus) {
        if (bus != grid_.slack_bus) bus_pos_[bus] = pos++;
    }

    incident_.assign(n + 1, {});
    for (int i = 0; i < grid_.n_lines(); ++i) {
        incident_[grid_.lines[i].from_bus].push_back(i);
        incident_[grid_.lines[i].to_bus].push_back(i);
    }

    for (const auto& g : grid_.generators) {
        if (g.bus != grid_.slack_bus) ctrl_buses_.push_back(g.bus);
    }
    std::sort(ctrl_buses_.begin(), ctrl_buses_.end());

    demand_ = Eigen::VectorXd::Zero(state_size());
    for (const auto& b : grid_.buses) {
        if (b.index == grid_.slack_bus) continue;
        demand_[2 * bus_pos_[b.index]] = b.p_demand;
        demand_[2 * bus_pos_[b.index] + 1] = b.q_demand;
    }
}

bool GridModel::has_generator(int bus) const { return grid_.generator_at(bus) != nullptr; }

int GridModel::bus_position(int bus) const {
    if (bus < 1 || bus > n_buses() || bus_pos_[bus] < 0)
        throw OutOfRange("bus " + std::to_string(bus) + " has no state slot");
    return bus_pos_[bus];
}

StateVector GridModel::flat_state() const {
    StateVector x;
    x.slack_voltage = grid_.slack_voltage;
    x.values = Eigen::VectorXd::Zero(state_size());
    for (int i = 0; i < state_size() / 2; ++i) x.values[2 * i] = grid_.slack_voltage;
    return x;
}

InputVector GridModel::zero_input() const {
    return InputVector{Eigen::VectorXd::Zero(input_size())};
}

double GridModel::v(const StateVector& x, int bus) const {
    if (bus == grid_.slack_bus) return x.slack_voltage;
    return x.values[2 * bus_pos_[bus]];
}

double GridModel::theta(const StateVector& x, int bus) const {
    if (bus == grid_.slack_bus) return 0.0;
    return x.values[2 * bus_pos_[bus] + 1];
}

std::pair<double, double> GridModel::line_flow(const StateVector& x, const LineParams& y,
                                               int k, int l) const {
    const auto idx = grid_.find_line(k, l);
    if (!idx)
        throw UnknownLine("no line between buses " + std::to_string(k) + " and " +
                          std::to_string(l));
    const FlowTerms ft(v(x, k), theta(x, k), v(x, l), theta(x, l), y.g(*idx), y.b(*idx));
    return {ft.p, ft.q};
}

std::pair<double, double> GridModel::line_flow(const StateVector& x, const LineParams& y,
                                               int index) const {
    if (index < 0 || index >= n_lines()) throw UnknownLine("line index out of range");
    const auto& l = grid_.lines[index];
    const FlowTerms ft(v(x, l.from_bus), theta(x, l.from_bus), v(x, l.to_bus),
                       theta(x, l.to_bus), y.g(index), y.b(index));
    return {ft.p, ft.q};
}

Eigen::VectorXd GridModel::residual_injection(const StateVector& x, const LineParams& y) const {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(state_size());
    for (int i = 0; i < n_lines(); ++i) {
        const auto& line = grid_.lines[i];
        for (int side = 0; side < 2; ++side) {
            const int k = side == 0 ? line.from_bus : line.to_bus;
            const int l = side == 0 ? line.to_bus : line.from_bus;
            if (is_slack(k)) continue;
            const FlowTerms ft(v(x, k), theta(x, k), v(x, l), theta(x, l), y.g(i), y.b(i));
            s[2 * bus_pos_[k]] += ft.p;
            s[2 * bus_pos_[k] + 1] += ft.q;
        }
    }
    return s;
}

std::pair<double, double> GridModel::slack_injection(const StateVector& x,
                                                     const LineParams& y) const {
    double p = 0.0, q = 0.0;
    const int k = grid_.slack_bus;
    for (int i : incident_[k]) {
        const auto& line = grid_.lines[i];
        const int l = line.from_bus == k ? line.to_bus : line.from_bus;
        const FlowTerms ft(v(x, k), theta(x, k), v(x, l), theta(x, l), y.g(i), y.b(i));
        p += ft.p;
        q += ft.q;
    }
    return {p, q};
}

Eigen::MatrixXd GridModel::slack_injection_jacobian(const StateVector& x,
                                                    const LineParams& y) const {
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(2, state_size());
    const int k = grid_.slack_bus;
    for (int i : incident_[k]) {
        const auto& line = grid_.lines[i];
        const int l = line.from_bus == k ? line.to_bus : line.from_bus;
        if (is_slack(l)) continue;
        const FlowTerms ft(v(x, k), theta(x, k), v(x, l), theta(x, l), y.g(i), y.b(i));
        const int col = 2 * bus_pos_[l];
        jac(0, col) += ft.dp[2];
        jac(0, col + 1) += ft.dp[3];
        jac(1, col) += ft.dq[2];
        jac(1, col + 1) += ft.dq[3];
    }
    return jac;
}

MeasurementVector GridModel::measurement(const StateVector& x, const LineParams& y) const {
    MeasurementVector m;
    m.values.resize(measurement_size());
    m.values.head(state_size()) = x.values;
    for (int i = 0; i < n_lines(); ++i) {
        const auto [p, q] = line_flow(x, y, i);
        m.values[state_size() + 2 * i] = p;
        m.values[state_size() + 2 * i + 1] = q;
    }
    return m;
}

GridJacobians GridModel::jacobians(const StateVector& x, const LineParams& y) const {
    const int nx = state_size();
    const int ny = param_size();
    const int nm = measurement_size();
    const int L = n_lines();

    GridJacobians J;
    J.S_x = Eigen::MatrixXd::Zero(nx, nx);
    J.S_y = Eigen::MatrixXd::Zero(nx, ny);
    J.M_x = Eigen::MatrixXd::Zero(nm, nx);
    J.M_y = Eigen::MatrixXd::Zero(nm, ny);
    J.M_x.topLeftCorner(nx, nx).setIdentity();

    for (int i = 0; i < L; ++i) {
        const auto& line = grid_.lines[i];
        for (int side = 0; side < 2; ++side) {
            const int k = side == 0 ? line.from_bus : line.to_bus;
            const int l = side == 0 ? line.to_bus : line.from_bus;
            const FlowTerms ft(v(x, k), theta(x, k), v(x, l), theta(x, l), y.g(i), y.b(i));

            // residual rows for bus k
            if (!is_slack(k)) {
                const int rp = 2 * bus_pos_[k];
                const int rq = rp + 1;
                const int ck = 2 * bus_pos_[k];
                J.S_x(rp, ck) += ft.dp[0];
                J.S_x(rp, ck + 1) += ft.dp[1];
                J.S_x(rq, ck) += ft.dq[0];
                J.S_x(rq, ck + 1) += ft.dq[1];
                if (!is_slack(l)) {
                    const int cl = 2 * bus_pos_[l];
                    J.S_x(rp, cl) += ft.dp[2];
                    J.S_x(rp, cl + 1) += ft.dp[3];
                    J.S_x(rq, cl) += ft.dq[2];
                    J.S_x(rq, cl + 1) += ft.dq[3];
                }
                J.S_y(rp, i) += ft.A;        // dp/dg
                J.S_y(rp, L + i) += -ft.B;   // dp/db
                J.S_y(rq, i) += -ft.B;       // dq/dg
                J.S_y(rq, L + i) += -ft.A;   // dq/db
            }

            // measurement rows: flows are taken at the from side only
            if (side == 0) {
                const int rp = nx + 2 * i;
                const int rq = rp + 1;
                if (!is_slack(k)) {
                    const int ck = 2 * bus_pos_[k];
                    J.M_x(rp, ck) = ft.dp[0];
                    J.M_x(rp, ck + 1) = ft.dp[1];
                    J.M_x(rq, ck) = ft.dq[0];
                    J.M_x(rq, ck + 1) = ft.dq[1];
                }
                if (!is_slack(l)) {
                    const int cl = 2 * bus_pos_[l];
                    J.M_x(rp, cl) = ft.dp[2];
                    J.M_x(rp, cl + 1) = ft.dp[3];
                    J.M_x(rq, cl) = ft.dq[2];
                    J.M_x(rq, cl + 1) = ft.dq[3];
                }
                J.M_y(rp, i) = ft.A;
                J.M_y(rp, L + i) = -ft.B;
                J.M_y(rq, i) = -ft.B;
                J.M_y(rq, L + i) = -ft.A;
            }
        }
    }
    return J;
}

}  // namespace gridoed
