#pragma once

#include <optional>
#include <vector>

#include "gridoed/errors.hpp"

namespace gridoed {

struct BusSpec {
    int index = 0;          // 1-based, contiguous
    double p_demand = 0.0;  // p.u.
    double q_demand = 0.0;  // p.u.
    double v_min = 0.9;     // p.u.
    double v_max = 1.1;     // p.u.
};

struct LineSpec {
    int from_bus = 0;
    int to_bus = 0;
};

struct GenSpec {
    int bus = 0;
    double p_min = 0.0;  // p.u.
    double p_max = 0.0;
    double q_min = 0.0;
    double q_max = 0.0;
    double cost_alpha = 0.0;  // $/MW^2/h, applied to p.u. power scaled by base_mva
    double cost_beta = 0.0;   // $/MW/h
};

/// Static problem instance: topology, generator fleet, limits, demands,
/// cost coefficients and the per-unit base. Line admittances are *not*
/// part of the case; they are the estimation target (see LineParams).
struct GridCase {
    double base_mva = 100.0;
    int slack_bus = 1;           // fixed voltage magnitude, angle pinned to 0
    double slack_voltage = 1.0;  // p.u.
    std::vector<BusSpec> buses;
    std::vector<LineSpec> lines;
    std::vector<GenSpec> generators;

    int n_buses() const { return static_cast<int>(buses.size()); }
    int n_lines() const { return static_cast<int>(lines.size()); }
    int n_generators() const { return static_cast<int>(generators.size()); }

    const BusSpec& bus(int index) const;
    const GenSpec* generator_at(int bus_index) const;

    /// Index of the line joining buses (k, l) in either orientation.
    std::optional<int> find_line(int k, int l) const;

    /// Checks all structural invariants; throws InconsistentTopology
    /// or OutOfRange on the first violation found.
    void validate() const;
};

}  // namespace gridoed
