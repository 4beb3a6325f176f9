#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "gridoed/grid_case.hpp"

namespace gridoed {

/// Line conductances/susceptances as a flat vector of length 2|L|:
/// all g first, then all b, line index ascending. Every covariance and
/// Fisher matrix in the library uses this ordering.
struct LineParams {
    Eigen::VectorXd values;

    LineParams() = default;
    explicit LineParams(Eigen::VectorXd v) : values(std::move(v)) {}
    static LineParams zeros(int n_lines) {
        return LineParams{Eigen::VectorXd::Zero(2 * n_lines)};
    }

    int n_lines() const { return static_cast<int>(values.size()) / 2; }
    double g(int line) const { return values[line]; }
    double b(int line) const { return values[n_lines() + line]; }
    double& g(int line) { return values[line]; }
    double& b(int line) { return values[n_lines() + line]; }
};

/// Voltage magnitude/angle pairs (v_k, theta_k) for every non-slack bus,
/// ascending bus index; the fixed slack magnitude rides along as context.
struct StateVector {
    Eigen::VectorXd values;  // length 2|N|-2, interleaved (v, theta)
    double slack_voltage = 1.0;
};

/// Controllable injections (p_k^g, q_k^g) per non-slack bus, interleaved,
/// zeros enforced at buses without a generator.
struct InputVector {
    Eigen::VectorXd values;  // length 2|N|-2
};

/// Concatenation (x; per line: active flow, reactive flow).
struct MeasurementVector {
    Eigen::VectorXd values;  // length (2|N|-2) + 2|L|
};

struct GridJacobians {
    Eigen::MatrixXd S_x;  // (2N-2) x (2N-2)
    Eigen::MatrixXd S_y;  // (2N-2) x 2L
    Eigen::MatrixXd M_x;  // m x (2N-2)
    Eigen::MatrixXd M_y;  // m x 2L
};

/// Algebraic grid model: line flows, residual injections, the measurement
/// map and their analytic first derivatives. All methods are pure and
/// reentrant; the model holds only immutable topology derived from the case.
class GridModel {
public:
    explicit GridModel(GridCase grid);

    const GridCase& grid() const { return grid_; }
    int n_buses() const { return grid_.n_buses(); }
    int n_lines() const { return grid_.n_lines(); }
    int state_size() const { return 2 * (n_buses() - 1); }
    int input_size() const { return 2 * (n_buses() - 1); }
    int param_size() const { return 2 * n_lines(); }
    int measurement_size() const { return state_size() + 2 * n_lines(); }

    bool is_slack(int bus) const { return bus == grid_.slack_bus; }
    bool has_generator(int bus) const;
    /// Position of a non-slack bus in the state/input layout (0-based).
    int bus_position(int bus) const;
    /// Non-slack generator buses, ascending (the controllable set).
    const std::vector<int>& controllable_buses() const { return ctrl_buses_; }

    StateVector flat_state() const;
    InputVector zero_input() const;
    /// Demand vector d in the (u - d) right-hand side layout.
    const Eigen::VectorXd& demand_vector() const { return demand_; }

    double v(const StateVector& x, int bus) const;
    double theta(const StateVector& x, int bus) const;

    /// Active/reactive flow over line (k, l) measured at bus k. The pair
    /// may be given in either orientation; it must exist in the topology.
    std::pair<double, double> line_flow(const StateVector& x, const LineParams& y,
                                        int k, int l) const;
    /// Flow at the from-side of line `index` as listed in the case.
    std::pair<double, double> line_flow(const StateVector& x, const LineParams& y,
                                        int index) const;

    /// Residual injections S_k(x,y) for all non-slack buses, interleaved (p, q).
    Eigen::VectorXd residual_injection(const StateVector& x, const LineParams& y) const;
    /// Residual injection at the slack bus (excluded from the vector above).
    std::pair<double, double> slack_injection(const StateVector& x, const LineParams& y) const;
    /// d(slack injection)/dx as a 2 x (2N-2) matrix, rows (p, q).
    Eigen::MatrixXd slack_injection_jacobian(const StateVector& x, const LineParams& y) const;

    MeasurementVector measurement(const StateVector& x, const LineParams& y) const;

    /// Analytic first derivatives of S and M with respect to x and y.
    GridJacobians jacobians(const StateVector& x, const LineParams& y) const;

private:
    struct FlowTerms;  // scalar flow + partials at one line end

    GridCase grid_;
    std::vector<int> bus_pos_;            // bus index -> state slot, -1 for slack
    std::vector<std::vector<int>> incident_;  // bus index -> incident line indices
    std::vector<int> ctrl_buses_;
    Eigen::VectorXd demand_;
};

}  // namespace gridoed
