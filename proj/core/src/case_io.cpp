#include "gridoed/case_io.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

namespace gridoed {

namespace {

double parse_number(const std::string& tok, const std::string& where) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0')
        throw MalformedBlock(where + ": not a number: '" + tok + "'");
    return v;
}

int parse_int(const std::string& tok, const std::string& where) {
    const double v = parse_number(tok, where);
    const int i = static_cast<int>(v);
    if (static_cast<double>(i) != v)
        throw MalformedBlock(where + ": expected an integer, got '" + tok + "'");
    return i;
}

std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string t;
    while (is >> t) out.push_back(t);
    return out;
}

// ---------------------------------------------------------------------------
// MATPOWER subset
// ---------------------------------------------------------------------------

std::string strip_matlab_comments(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    bool in_comment = false;
    for (char ch : text) {
        if (ch == '%') in_comment = true;
        if (ch == '\n') in_comment = false;
        out.push_back(in_comment ? ' ' : ch);
    }
    return out;
}

struct Matrix {
    std::vector<std::vector<double>> rows;
};

// Splits "[ ... ];" content into numeric rows; rows end at ';' or newline.
Matrix parse_matrix_block(const std::string& body, const std::string& name) {
    Matrix m;
    std::string cell;
    std::vector<std::string> row_texts;
    std::string current;
    for (char ch : body) {
        if (ch == ';' || ch == '\n') {
            row_texts.push_back(current);
            current.clear();
        } else {
            current.push_back(ch == ',' ? ' ' : ch);
        }
    }
    row_texts.push_back(current);

    for (const auto& rt : row_texts) {
        auto toks = split_ws(rt);
        if (toks.empty()) continue;
        std::vector<double> row;
        row.reserve(toks.size());
        for (const auto& t : toks) row.push_back(parse_number(t, "mpc." + name));
        m.rows.push_back(std::move(row));
    }
    if (m.rows.empty()) throw MalformedBlock("mpc." + name + ": empty matrix");
    return m;
}

void require_columns(const Matrix& m, const std::string& name,
                     std::initializer_list<std::size_t> allowed) {
    for (const auto& row : m.rows) {
        bool ok = false;
        for (std::size_t n : allowed) ok = ok || row.size() == n;
        if (!ok)
            throw MalformedBlock("mpc." + name + ": row has " +
                                 std::to_string(row.size()) + " columns");
    }
}

}  // namespace

ParsedCase parse_matpower_case(const std::string& text) {
    const std::string clean = strip_matlab_comments(text);

    // Collect every "mpc.<field>" assignment; only the subset is supported.
    std::map<std::string, std::string> blocks;
    double base_mva = -1.0;
    std::size_t pos = 0;
    while ((pos = clean.find("mpc.", pos)) != std::string::npos) {
        std::size_t name_start = pos + 4;
        std::size_t i = name_start;
        while (i < clean.size() && (std::isalnum(static_cast<unsigned char>(clean[i])) || clean[i] == '_'))
            ++i;
        const std::string field = clean.substr(name_start, i - name_start);
        while (i < clean.size() && std::isspace(static_cast<unsigned char>(clean[i]))) ++i;
        if (i >= clean.size() || clean[i] != '=') {
            pos = i;
            continue;
        }
        ++i;
        while (i < clean.size() && std::isspace(static_cast<unsigned char>(clean[i]))) ++i;

        if (field == "version") {
            std::size_t sc = clean.find(';', i);
            pos = (sc == std::string::npos) ? clean.size() : sc + 1;
            continue;
        }
        if (field == "baseMVA") {
            std::size_t sc = clean.find(';', i);
            if (sc == std::string::npos) throw MalformedBlock("baseMVA: missing ';'");
            base_mva = parse_number(split_ws(clean.substr(i, sc - i)).at(0), "baseMVA");
            pos = sc + 1;
            continue;
        }
        if (field == "bus" || field == "gen" || field == "branch" || field == "gencost") {
            if (i >= clean.size() || clean[i] != '[')
                throw MalformedBlock("mpc." + field + ": expected '['");
            std::size_t close = clean.find(']', i);
            if (close == std::string::npos)
                throw MalformedBlock("mpc." + field + ": missing ']'");
            blocks[field] = clean.substr(i + 1, close - i - 1);
            pos = close + 1;
            continue;
        }
        throw UnsupportedFeature("mpc." + field + " is outside the supported subset");
    }

    if (base_mva <= 0.0) throw MissingField("baseMVA missing or non-positive");
    for (const char* required : {"bus", "gen", "branch", "gencost"}) {
        if (!blocks.count(required)) throw MissingField(std::string("mpc.") + required + " block missing");
    }

    const Matrix bus = parse_matrix_block(blocks["bus"], "bus");
    const Matrix gen = parse_matrix_block(blocks["gen"], "gen");
    const Matrix branch = parse_matrix_block(blocks["branch"], "branch");
    const Matrix gencost = parse_matrix_block(blocks["gencost"], "gencost");

    require_columns(bus, "bus", {13});
    require_columns(gen, "gen", {10, 21});
    require_columns(branch, "branch", {11, 13});

    ParsedCase out;
    GridCase& grid = out.grid;
    grid.base_mva = base_mva;

    int slack_count = 0;
    for (const auto& r : bus.rows) {
        BusSpec b;
        b.index = static_cast<int>(r[0]);
        const int type = static_cast<int>(r[1]);
        if (type < 1 || type > 3)
            throw MalformedBlock("bus " + std::to_string(b.index) + ": bad type");
        b.p_demand = r[2] / base_mva;
        b.q_demand = r[3] / base_mva;
        b.v_max = r[11];
        b.v_min = r[12];
        if (type == 3) {
            ++slack_count;
            grid.slack_bus = b.index;
            grid.slack_voltage = r[7] > 0.0 ? r[7] : 1.0;
        }
        grid.buses.push_back(b);
    }
    if (slack_count != 1)
        throw InconsistentTopology("expected exactly one reference bus, found " +
                                   std::to_string(slack_count));

    for (const auto& r : branch.rows) {
        LineSpec l;
        l.from_bus = static_cast<int>(r[0]);
        l.to_bus = static_cast<int>(r[1]);
        if (r[8] != 0.0 && r[8] != 1.0)
            throw UnsupportedFeature("branch (" + std::to_string(l.from_bus) + "," +
                                     std::to_string(l.to_bus) + "): off-nominal tap ratio");
        if (r[9] != 0.0)
            throw UnsupportedFeature("branch phase shift is not supported");
        if (r[10] != 1.0)
            throw UnsupportedFeature("out-of-service branch");
        grid.lines.push_back(l);
    }

    // series admittance; shunt (charging) column ignored
    out.line_params = LineParams::zeros(grid.n_lines());
    for (int i = 0; i < grid.n_lines(); ++i) {
        const double r = branch.rows[i][2];
        const double x = branch.rows[i][3];
        const double d = r * r + x * x;
        if (d <= 0.0) throw MalformedBlock("branch with zero series impedance");
        out.line_params.g(i) = r / d;
        out.line_params.b(i) = -x / d;
    }

    if (gencost.rows.size() != gen.rows.size())
        throw MalformedBlock("gencost rows do not match gen rows");
    for (std::size_t i = 0; i < gen.rows.size(); ++i) {
        const auto& r = gen.rows[i];
        GenSpec g;
        g.bus = static_cast<int>(r[0]);
        if (r[7] != 1.0) throw UnsupportedFeature("out-of-service generator");
        g.q_max = r[3] / base_mva;
        g.q_min = r[4] / base_mva;
        g.p_max = r[8] / base_mva;
        g.p_min = r[9] / base_mva;

        const auto& c = gencost.rows[i];
        if (c.size() < 4) throw MalformedBlock("gencost: row too short");
        if (static_cast<int>(c[0]) != 2)
            throw UnsupportedFeature("gencost: only polynomial model 2 is supported");
        const int n = static_cast<int>(c[3]);
        if (c.size() != static_cast<std::size_t>(4 + n))
            throw MalformedBlock("gencost: coefficient count does not match n");
        if (n == 3) {
            g.cost_alpha = c[4];
            g.cost_beta = c[5];
            if (c[6] != 0.0)
                throw UnsupportedFeature("gencost: constant cost term is not supported");
        } else if (n == 2) {
            g.cost_alpha = 0.0;
            g.cost_beta = c[4];
            if (c[5] != 0.0)
                throw UnsupportedFeature("gencost: constant cost term is not supported");
        } else {
            throw UnsupportedFeature("gencost: expected 2 or 3 polynomial coefficients");
        }
        grid.generators.push_back(g);
    }

    grid.validate();
    return out;
}

ParsedCase parse_matpower_case(std::istream& in) {
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_matpower_case(ss.str());
}

// ---------------------------------------------------------------------------
// native format
// ---------------------------------------------------------------------------

namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string serialize_native_case(const ParsedCase& c) {
    std::ostringstream os;
    os << "gridcase v1\n";
    os << "base_mva " << fmt_double(c.grid.base_mva) << "\n";
    os << "slack_bus " << c.grid.slack_bus << "\n";
    os << "slack_voltage " << fmt_double(c.grid.slack_voltage) << "\n";
    for (const auto& b : c.grid.buses) {
        os << "bus " << b.index << " " << fmt_double(b.p_demand) << " "
           << fmt_double(b.q_demand) << " " << fmt_double(b.v_min) << " "
           << fmt_double(b.v_max) << "\n";
    }
    for (int i = 0; i < c.grid.n_lines(); ++i) {
        os << "line " << c.grid.lines[i].from_bus << " " << c.grid.lines[i].to_bus << " "
           << fmt_double(c.line_params.g(i)) << " " << fmt_double(c.line_params.b(i)) << "\n";
    }
    for (const auto& g : c.grid.generators) {
        os << "gen " << g.bus << " " << fmt_double(g.p_min) << " " << fmt_double(g.p_max)
           << " " << fmt_double(g.q_min) << " " << fmt_double(g.q_max) << " "
           << fmt_double(g.cost_alpha) << " " << fmt_double(g.cost_beta) << "\n";
    }
    return os.str();
}

ParsedCase parse_native_case(const std::string& text) {
    std::istringstream in(text);
    return parse_native_case(in);
}

ParsedCase parse_native_case(std::istream& in) {
    ParsedCase out;
    std::vector<double> gs, bs;
    bool header_seen = false;
    bool base_seen = false, slack_seen = false;

    std::string raw;
    while (std::getline(in, raw)) {
        const auto hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        auto toks = split_ws(raw);
        if (toks.empty()) continue;

        if (!header_seen) {
            if (toks[0] != "gridcase" || toks.size() < 2)
                throw MalformedBlock("native case must start with 'gridcase <version>'");
            if (toks[1] != "v1")
                throw UnsupportedFeature("unknown gridcase format version '" + toks[1] + "'");
            header_seen = true;
            continue;
        }

        const std::string& kw = toks[0];
        auto need = [&](std::size_t n) {
            if (toks.size() != n)
                throw MalformedBlock("'" + kw + "' entry: expected " + std::to_string(n - 1) +
                                     " fields, got " + std::to_string(toks.size() - 1));
        };
        if (kw == "base_mva") {
            need(2);
            out.grid.base_mva = parse_number(toks[1], kw);
            base_seen = true;
        } else if (kw == "slack_bus") {
            need(2);
            out.grid.slack_bus = parse_int(toks[1], kw);
            slack_seen = true;
        } else if (kw == "slack_voltage") {
            need(2);
            out.grid.slack_voltage = parse_number(toks[1], kw);
        } else if (kw == "bus") {
            need(6);
            BusSpec b;
            b.index = parse_int(toks[1], kw);
            b.p_demand = parse_number(toks[2], kw);
            b.q_demand = parse_number(toks[3], kw);
            b.v_min = parse_number(toks[4], kw);
            b.v_max = parse_number(toks[5], kw);
            out.grid.buses.push_back(b);
        } else if (kw == "line") {
            need(6);
            LineSpec l;
            l.from_bus = parse_int(toks[1], kw);
            l.to_bus = parse_int(toks[2], kw);
            out.grid.lines.push_back(l);
            gs.push_back(parse_number(toks[3], kw));
            bs.push_back(parse_number(toks[4], kw));
        } else if (kw == "gen") {
            need(8);
            GenSpec g;
            g.bus = parse_int(toks[1], kw);
            g.p_min = parse_number(toks[2], kw);
            g.p_max = parse_number(toks[3], kw);
            g.q_min = parse_number(toks[4], kw);
            g.q_max = parse_number(toks[5], kw);
            g.cost_alpha = parse_number(toks[6], kw);
            g.cost_beta = parse_number(toks[7], kw);
            out.grid.generators.push_back(g);
        } else {
            throw MalformedBlock("unknown entry '" + kw + "' in native case");
        }
    }

    if (!header_seen) throw MalformedBlock("empty native case document");
    if (!base_seen) throw MissingField("base_mva missing");
    if (!slack_seen) throw MissingField("slack_bus missing");

    out.line_params = LineParams::zeros(out.grid.n_lines());
    for (int i = 0; i < out.grid.n_lines(); ++i) {
        out.line_params.g(i) = gs[i];
        out.line_params.b(i) = bs[i];
    }
    out.grid.validate();
    return out;
}

ParsedCase load_case_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingField("cannot open case file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();

    // first non-blank, non-comment token decides the dialect
    std::istringstream scan(text);
    std::string line;
    while (std::getline(scan, line)) {
        const auto hash = line.find_first_of("#%");
        if (hash != std::string::npos) line.erase(hash);
        auto toks = split_ws(line);
        if (toks.empty()) continue;
        if (toks[0] == "gridcase") return parse_native_case(text);
        return parse_matpower_case(text);
    }
    throw MalformedBlock("case file '" + path + "' is empty");
}

bool gridcase_equal(const ParsedCase& a, const ParsedCase& b) {
    const GridCase& x = a.grid;
    const GridCase& y = b.grid;
    if (x.base_mva != y.base_mva || x.slack_bus != y.slack_bus ||
        x.slack_voltage != y.slack_voltage)
        return false;
    if (x.buses.size() != y.buses.size() || x.lines.size() != y.lines.size() ||
        x.generators.size() != y.generators.size())
        return false;
    for (std::size_t i = 0; i < x.buses.size(); ++i) {
        const auto& p = x.buses[i];
        const auto& q = y.buses[i];
        if (p.index != q.index || p.p_demand != q.p_demand || p.q_demand != q.q_demand ||
            p.v_min != q.v_min || p.v_max != q.v_max)
            return false;
    }
    for (std::size_t i = 0; i < x.lines.size(); ++i) {
        if (x.lines[i].from_bus != y.lines[i].from_bus ||
            x.lines[i].to_bus != y.lines[i].to_bus)
            return false;
    }
    for (std::size_t i = 0; i < x.generators.size(); ++i) {
        const auto& p = x.generators[i];
        const auto& q = y.generators[i];
        if (p.bus != q.bus || p.p_min != q.p_min || p.p_max != q.p_max ||
            p.q_min != q.q_min || p.q_max != q.q_max || p.cost_alpha != q.cost_alpha ||
            p.cost_beta != q.cost_beta)
            return false;
    }
    return a.line_params.values == b.line_params.values;
}

// ---------------------------------------------------------------------------
// experiment configuration
// ---------------------------------------------------------------------------

ExperimentConfig parse_experiment_config(std::istream& in) {
    ExperimentConfig cfg;
    std::string raw;
    while (std::getline(in, raw)) {
        const auto hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        auto toks = split_ws(raw);
        if (toks.empty()) continue;

        const std::string& key = toks[0];
        if (toks.size() < 2) throw MissingField("config key '" + key + "' has no value");
        const std::string& val = toks[1];

        auto one_number = [&]() {
            if (toks.size() != 2)
                throw MalformedBlock("config key '" + key + "' takes a single value");
            return parse_number(val, key);
        };
        auto number_list = [&]() {
            std::vector<double> vs;
            for (std::size_t i = 1; i < toks.size(); ++i)
                vs.push_back(parse_number(toks[i], key));
            return vs;
        };

        if (key == "horizon") cfg.horizon = static_cast<int>(one_number());
        else if (key == "target_variance_trace") cfg.target_variance_trace = one_number();
        else if (key == "rho0") cfg.rho0 = one_number();
        else if (key == "termination_eps") cfg.termination_eps = one_number();
        else if (key == "noise_variance") cfg.noise_variance = one_number();
        else if (key == "prior_variance") cfg.prior_variance = one_number();
        else if (key == "input_change_weight") cfg.input_change_weight = one_number();
        else if (key == "rng_seed") cfg.rng_seed = static_cast<std::uint64_t>(one_number());
        else if (key == "sampling_minutes") cfg.sampling_minutes = one_number();
        else if (key == "rho_grid_min") cfg.rho_grid_min = one_number();
        else if (key == "rho_grid_max") cfg.rho_grid_max = one_number();
        else if (key == "rho_grid_points") cfg.rho_grid_points = static_cast<int>(one_number());
        else if (key == "refit_every") cfg.refit_every = static_cast<int>(one_number());
        else if (key == "strategy") cfg.strategy = strategy_from_string(val);
        else if (key == "rho_update_mode") cfg.rho_update_mode = rho_update_mode_from_string(val);
        else if (key == "paper_strict_sensitivity") {
            if (val == "true") cfg.paper_strict_sensitivity = true;
            else if (val == "false") cfg.paper_strict_sensitivity = false;
            else throw OutOfRange("paper_strict_sensitivity must be true or false");
        }
        else if (key == "mle_data_start") {
            if (val == "true") cfg.mle_data_start = true;
            else if (val == "false") cfg.mle_data_start = false;
            else throw OutOfRange("mle_data_start must be true or false");
        }
        else if (key == "true_g") cfg.true_g = number_list();
        else if (key == "true_b") cfg.true_b = number_list();
        else if (key == "initial_g") cfg.initial_g = number_list();
        else if (key == "initial_b") cfg.initial_b = number_list();
        else throw MalformedBlock("unknown config key '" + key + "'");
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig parse_experiment_config(const std::string& text) {
    std::istringstream in(text);
    return parse_experiment_config(in);
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingField("cannot open config file '" + path + "'");
    return parse_experiment_config(in);
}

}  // namespace gridoed
