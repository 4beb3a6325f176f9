#include "gridoed/grid_case.hpp"

#include <algorithm>
#include <set>
#include <string>

namespace gridoed {

const BusSpec& GridCase::bus(int index) const {
    for (const auto& b : buses) {
        if (b.index == index) return b;
    }
    throw InconsistentTopology("no bus with index " + std::to_string(index));
}

const GenSpec* GridCase::generator_at(int bus_index) const {
    for (const auto& g : generators) {
        if (g.bus == bus_index) return &g;
    }
    return nullptr;
}

std::optional<int> GridCase::find_line(int k, int l) const {
    for (int i = 0; i < n_lines(); ++i) {
        if ((lines[i].from_bus == k && lines[i].to_bus == l) ||
            (lines[i].from_bus == l && lines[i].to_bus == k)) {
            return i;
        }
    }
    return std::nullopt;
}

void GridCase::validate() const {
    if (base_mva <= 0.0) throw OutOfRange("base_mva must be positive");
    if (buses.empty()) throw InconsistentTopology("case has no buses");

    // bus indices unique and contiguous from 1
    std::set<int> seen;
    for (const auto& b : buses) seen.insert(b.index);
    if (static_cast<int>(seen.size()) != n_buses())
        throw InconsistentTopology("duplicate bus index");
    if (*seen.begin() != 1 || *seen.rbegin() != n_buses())
        throw InconsistentTopology("bus indices must be contiguous from 1");

    for (const auto& b : buses) {
        if (b.v_min > b.v_max)
            throw InconsistentTopology("bus " + std::to_string(b.index) +
                                       ": voltage bounds inverted");
    }

    std::set<std::pair<int, int>> pairs;
    for (const auto& l : lines) {
        if (!seen.count(l.from_bus) || !seen.count(l.to_bus))
            throw InconsistentTopology("line endpoint refers to a missing bus");
        if (l.from_bus == l.to_bus)
            throw InconsistentTopology("self-loop at bus " + std::to_string(l.from_bus));
        auto key = std::minmax(l.from_bus, l.to_bus);
        if (!pairs.insert(key).second)
            throw InconsistentTopology("parallel line between buses " +
                                       std::to_string(key.first) + " and " +
                                       std::to_string(key.second));
    }

    std::set<int> gen_buses;
    for (const auto& g : generators) {
        if (!seen.count(g.bus))
            throw InconsistentTopology("generator at missing bus " + std::to_string(g.bus));
        if (!gen_buses.insert(g.bus).second)
            throw InconsistentTopology("multiple generators at bus " + std::to_string(g.bus));
        if (g.p_min > g.p_max || g.q_min > g.q_max)
            throw InconsistentTopology("generator at bus " + std::to_string(g.bus) +
                                       ": bounds inverted");
    }

    if (!seen.count(slack_bus)) throw InconsistentTopology("slack bus does not exist");
    if (!gen_buses.count(slack_bus))
        throw InconsistentTopology("slack bus must host a generator");
    if (slack_voltage <= 0.0) throw OutOfRange("slack voltage must be positive");
}

}  // namespace gridoed
