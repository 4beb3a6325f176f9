#include "gridoed/report.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace gridoed {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

using nlohmann::json;

std::vector<std::string> record_columns(const GridModel& model) {
    std::vector<std::string> cols = {"k",         "strategy",        "rho",
                                     "trace_v",   "step_cost",       "cumulative_cost",
                                     "mre_g",     "mre_b",           "wall_seconds"};
    for (const auto& bus : model.grid().buses) {
        if (model.is_slack(bus.index)) continue;
        cols.push_back("u_p_" + std::to_string(bus.index));
        cols.push_back("u_q_" + std::to_string(bus.index));
    }
    for (const auto& l : model.grid().lines)
        cols.push_back("g_" + std::to_string(l.from_bus) + "_" + std::to_string(l.to_bus));
    for (const auto& l : model.grid().lines)
        cols.push_back("b_" + std::to_string(l.from_bus) + "_" + std::to_string(l.to_bus));
    for (const auto& bus : model.grid().buses) {
        if (model.is_slack(bus.index)) continue;
        cols.push_back("eta_v_" + std::to_string(bus.index));
        cols.push_back("eta_th_" + std::to_string(bus.index));
    }
    for (const auto& l : model.grid().lines) {
        cols.push_back("eta_p_" + std::to_string(l.from_bus) + "_" + std::to_string(l.to_bus));
        cols.push_back("eta_q_" + std::to_string(l.from_bus) + "_" + std::to_string(l.to_bus));
    }
    return cols;
}

json line_table(const GridModel& model, const RunSummary& s) {
    json table = json::array();
    const int L = model.n_lines();
    for (int i = 0; i < L; ++i) {
        const auto& l = model.grid().lines[i];
        json row;
        row["from"] = l.from_bus;
        row["to"] = l.to_bus;
        row["g_true"] = s.truth.g(i);
        row["g_est"] = s.final_estimate.g(i);
        row["b_true"] = s.truth.b(i);
        row["b_est"] = s.final_estimate.b(i);
        if (s.truth.g(i) != 0.0)
            row["g_rel_err"] = std::abs(s.final_estimate.g(i) - s.truth.g(i)) /
                               std::abs(s.truth.g(i));
        if (s.truth.b(i) != 0.0)
            row["b_rel_err"] = std::abs(s.final_estimate.b(i) - s.truth.b(i)) /
                               std::abs(s.truth.b(i));
        table.push_back(row);
    }
    return table;
}

json summary_object(const GridModel& model, const RunSummary& s) {
    json j;
    j["strategy"] = to_string(s.strategy);
    j["seed"] = s.seed;
    j["terminated_at"] = s.terminated_at;
    j["reason"] = to_string(s.reason);
    if (s.reason == StopReason::aborted) j["abort_message"] = s.abort_message;
    j["final_trace"] = s.final_trace;
    j["cumulative_cost"] = s.cumulative_cost;
    j["grid_hours"] = s.grid_hours;
    j["wall_seconds"] = s.wall_seconds;
    if (!s.records.empty()) {
        j["final_mre_g"] = s.records.back().mre_g;
        j["final_mre_b"] = s.records.back().mre_b;
    }
    j["estimates"] = line_table(model, s);
    if (s.fit) {
        j["tradeoff_fit"] = {{"amplitude", s.fit->amplitude},
                             {"decay", s.fit->decay},
                             {"residual", s.fit->residual}};
    }
    return j;
}

json record_object(const IterationRecord& r) {
    json j;
    j["k"] = r.k;
    j["strategy"] = to_string(r.strategy);
    j["rho"] = r.rho;
    j["trace_v"] = r.trace_v;
    j["step_cost"] = r.step_cost;
    j["cumulative_cost"] = r.cumulative_cost;
    j["mre_g"] = r.mre_g;
    j["mre_b"] = r.mre_b;
    j["wall_seconds"] = r.wall_seconds;
    j["u"] = std::vector<double>(r.u.values.begin(), r.u.values.end());
    j["y_hat"] = std::vector<double>(r.y_hat.values.begin(), r.y_hat.values.end());
    j["eta"] = std::vector<double>(r.eta.values.begin(), r.eta.values.end());
    return j;
}

}  // namespace

void write_records_csv(std::ostream& out, const GridModel& model, const RunSummary& summary) {
    const auto cols = record_columns(model);
    for (std::size_t i = 0; i < cols.size(); ++i)
        out << cols[i] << (i + 1 < cols.size() ? "," : "\n");

    for (const auto& r : summary.records) {
        out << r.k << "," << to_string(r.strategy) << "," << format_double(r.rho) << ","
            << format_double(r.trace_v) << "," << format_double(r.step_cost) << ","
            << format_double(r.cumulative_cost) << "," << format_double(r.mre_g) << ","
            << format_double(r.mre_b) << "," << format_double(r.wall_seconds);
        for (int i = 0; i < r.u.values.size(); ++i) out << "," << format_double(r.u.values[i]);
        for (int i = 0; i < r.y_hat.values.size(); ++i)
            out << "," << format_double(r.y_hat.values[i]);
        for (int i = 0; i < r.eta.values.size(); ++i)
            out << "," << format_double(r.eta.values[i]);
        out << "\n";
    }
}

std::string summary_json(const GridModel& model, const RunSummary& summary) {
    return summary_object(model, summary).dump(2);
}

std::string run_json(const GridModel& model, const RunSummary& summary) {
    json j = summary_object(model, summary);
    json recs = json::array();
    for (const auto& r : summary.records) recs.push_back(record_object(r));
    j["records"] = recs;
    if (!summary.sweep.empty()) {
        json sw = json::array();
        for (const auto& s : summary.sweep)
            sw.push_back({{"rho", s.rho}, {"cost", s.cost}, {"trace_v", s.trace_v}});
        j["sweep"] = sw;
    }
    return j.dump(2);
}

void write_sweep_csv(std::ostream& out, const std::vector<TradeoffSample>& samples,
                     const std::vector<TradeoffSample>& filtered) {
    auto is_kept = [&](const TradeoffSample& s) {
        for (const auto& f : filtered)
            if (f.rho == s.rho && f.cost == s.cost && f.trace_v == s.trace_v) return true;
        return false;
    };
    out << "rho,cost,trace_v,filtered\n";
    for (const auto& s : samples) {
        out << format_double(s.rho) << "," << format_double(s.cost) << ","
            << format_double(s.trace_v) << "," << (is_kept(s) ? 1 : 0) << "\n";
    }
}

std::vector<TradeoffSample> read_sweep_csv(std::istream& in, bool filtered_only) {
    std::vector<TradeoffSample> out;
    std::string line;
    if (!std::getline(in, line)) throw MalformedBlock("empty sweep CSV");
    if (line.rfind("rho,cost,trace_v", 0) != 0)
        throw MalformedBlock("sweep CSV header mismatch: '" + line + "'");
    const bool has_flag = line == "rho,cost,trace_v,filtered";
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() < (has_flag ? 4u : 3u))
            throw MalformedBlock("sweep CSV row " + std::to_string(lineno) + " too short");
        TradeoffSample s;
        try {
            s.rho = std::stod(cells[0]);
            s.cost = std::stod(cells[1]);
            s.trace_v = std::stod(cells[2]);
        } catch (const std::exception&) {
            throw MalformedBlock("sweep CSV row " + std::to_string(lineno) + " not numeric");
        }
        if (filtered_only && has_flag && cells[3] == "0") continue;
        out.push_back(s);
    }
    return out;
}

}  // namespace gridoed
