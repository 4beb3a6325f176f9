// Command-line front end: closed-loop experiment runs, strategy comparison,
// Pareto sweep export and trade-off curve fitting.

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gridoed/case_io.hpp"
#include "gridoed/report.hpp"
#include "gridoed/runner.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonArgs {
    std::string case_path;
    std::string config_path;
    std::string out_dir = ".";
    std::string format = "csv";
    std::uint64_t seed = 0;
    bool seed_set = false;
    int seeds = 1;
    std::string strategy;
    bool paper_strict = false;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool with_strategy) {
    cmd->add_option("--case", a.case_path, "grid case file (MATPOWER subset or native)")
        ->required();
    cmd->add_option("--config", a.config_path, "experiment config file");
    cmd->add_option("--out", a.out_dir, "output directory (created if missing)");
    cmd->add_option("--format", a.format, "csv|json")
        ->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--seed", a.seed, "base RNG seed")->each([&](const std::string&) {
        a.seed_set = true;
    });
    cmd->add_option("--seeds", a.seeds, "number of seeds (batch: seed, seed+1, ...)")
        ->check(CLI::PositiveNumber);
    if (with_strategy)
        cmd->add_option("--strategy", a.strategy,
                        "opf_mle|pure_oed|oed_opf_autotuned (overrides config)");
    cmd->add_flag("--paper-strict-sensitivity", a.paper_strict,
                  "use the literal sensitivity shorthand (omit the direct dM/dy term)");
}

gridoed::ExperimentConfig effective_config(const CommonArgs& a) {
    gridoed::ExperimentConfig cfg;
    if (!a.config_path.empty()) cfg = gridoed::load_config_file(a.config_path);
    if (!a.strategy.empty()) cfg.strategy = gridoed::strategy_from_string(a.strategy);
    if (a.seed_set) cfg.rng_seed = a.seed;
    if (a.paper_strict) cfg.paper_strict_sensitivity = true;
    return cfg;
}

std::string run_basename(const gridoed::RunSummary& s) {
    return std::string("run_") + gridoed::to_string(s.strategy) + "_seed" +
           std::to_string(s.seed);
}

void write_run_outputs(const fs::path& dir, const gridoed::GridModel& model,
                       const gridoed::RunSummary& s, const std::string& format) {
    const std::string base = run_basename(s);
    if (format == "json") {
        std::ofstream out(dir / (base + ".json"));
        out << gridoed::run_json(model, s) << "\n";
        return;
    }
    {
        std::ofstream csv(dir / (base + ".csv"));
        gridoed::write_records_csv(csv, model, s);
    }
    {
        std::ofstream js(dir / (base + "_summary.json"));
        js << gridoed::summary_json(model, s) << "\n";
    }
}

/// Runs `jobs` configs against one parsed case on a small thread pool;
/// summaries come back in job order.
std::vector<gridoed::RunSummary> run_batch(const gridoed::ParsedCase& parsed,
                                           const std::vector<gridoed::ExperimentConfig>& jobs) {
    std::vector<gridoed::RunSummary> out(jobs.size());
    const unsigned workers = std::min<unsigned>(
        std::max(1u, std::thread::hardware_concurrency()), jobs.size());
    if (workers <= 1) {
        for (std::size_t i = 0; i < jobs.size(); ++i)
            out[i] = gridoed::run_algorithm(parsed, jobs[i]);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < jobs.size(); i = next.fetch_add(1))
                out[i] = gridoed::run_algorithm(parsed, jobs[i]);
        });
    }
    for (auto& t : pool) t.join();
    return out;
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double trace_at(const gridoed::RunSummary& s, int k) {
    // terminated runs keep their final belief
    if (s.records.empty()) return std::numeric_limits<double>::quiet_NaN();
    const int idx = std::min<int>(k, s.terminated_at) - 1;
    return s.records[idx].trace_v;
}

int cmd_run(const CommonArgs& args) {
    const auto parsed = gridoed::load_case_file(args.case_path);
    const auto base_cfg = effective_config(args);
    fs::create_directories(args.out_dir);

    std::vector<gridoed::ExperimentConfig> jobs;
    for (int i = 0; i < args.seeds; ++i) {
        auto cfg = base_cfg;
        cfg.rng_seed = base_cfg.rng_seed + static_cast<std::uint64_t>(i);
        jobs.push_back(cfg);
    }

    const gridoed::GridModel model(parsed.grid);
    const auto summaries = run_batch(parsed, jobs);
    int failures = 0;
    for (const auto& s : summaries) {
        write_run_outputs(args.out_dir, model, s, args.format);
        std::cout << run_basename(s) << ": " << gridoed::to_string(s.reason) << " after "
                  << s.terminated_at << " iterations, Tr(V)=" << s.final_trace
                  << ", cumulative cost $" << s.cumulative_cost << "\n";
        if (s.reason == gridoed::StopReason::aborted) {
            std::cerr << "  aborted: " << s.abort_message << "\n";
            ++failures;
        }
    }
    return failures == 0 ? 0 : 1;
}

int cmd_compare(const CommonArgs& args) {
    const auto parsed = gridoed::load_case_file(args.case_path);
    const auto base_cfg = effective_config(args);
    fs::create_directories(args.out_dir);
    const gridoed::GridModel model(parsed.grid);

    const gridoed::Strategy strategies[] = {gridoed::Strategy::opf_mle,
                                            gridoed::Strategy::pure_oed,
                                            gridoed::Strategy::oed_opf_autotuned};

    std::vector<gridoed::ExperimentConfig> jobs;
    for (auto strat : strategies) {
        for (int i = 0; i < args.seeds; ++i) {
            auto cfg = base_cfg;
            cfg.strategy = strat;
            cfg.rng_seed = base_cfg.rng_seed + static_cast<std::uint64_t>(i);
            jobs.push_back(cfg);
        }
    }
    const auto summaries = run_batch(parsed, jobs);

    json cmp;
    int failures = 0;
    std::vector<std::vector<const gridoed::RunSummary*>> by_strategy(3);
    for (std::size_t i = 0; i < summaries.size(); ++i) {
        write_run_outputs(args.out_dir, model, summaries[i], args.format);
        by_strategy[i / args.seeds].push_back(&summaries[i]);
        if (summaries[i].reason == gridoed::StopReason::aborted) {
            std::cerr << run_basename(summaries[i]) << " aborted: "
                      << summaries[i].abort_message << "\n";
            ++failures;
        }
    }

    // shared-seed comparison at the common termination horizon
    std::vector<double> cost_med[3];
    for (int s = 0; s < args.seeds; ++s) {
        int common = std::numeric_limits<int>::max();
        for (int t = 0; t < 3; ++t)
            common = std::min(common, by_strategy[t][s]->terminated_at);
        if (common <= 0) continue;
        for (int t = 0; t < 3; ++t)
            cost_med[t].push_back(by_strategy[t][s]->records[common - 1].cumulative_cost);
    }
    for (int t = 0; t < 3; ++t) {
        json js;
        js["strategy"] = gridoed::to_string(strategies[t]);
        js["median_cost_at_common_horizon"] = median(cost_med[t]);
        std::vector<double> term;
        for (auto* s : by_strategy[t]) term.push_back(s->terminated_at);
        js["median_terminated_at"] = median(term);
        json traces = json::array();
        for (int k = 1; k <= base_cfg.horizon; ++k) {
            std::vector<double> tk;
            for (auto* s : by_strategy[t])
                if (s->terminated_at > 0) tk.push_back(trace_at(*s, k));
            traces.push_back(median(tk));
        }
        js["median_trace_by_k"] = traces;
        cmp["strategies"].push_back(js);
    }
    cmp["seeds"] = args.seeds;
    cmp["base_seed"] = base_cfg.rng_seed;

    std::ofstream out(fs::path(args.out_dir) / "compare_summary.json");
    out << cmp.dump(2) << "\n";
    std::cout << "compare: " << summaries.size() << " runs -> " << args.out_dir
              << "/compare_summary.json\n";
    return failures == 0 ? 0 : 1;
}

int cmd_sweep(const CommonArgs& args) {
    const auto parsed = gridoed::load_case_file(args.case_path);
    auto cfg = effective_config(args);
    cfg.strategy = gridoed::Strategy::oed_opf_autotuned;
    fs::create_directories(args.out_dir);

    const auto cache = gridoed::build_tradeoff_cache(parsed, cfg);
    for (const auto& w : cache.warnings) std::cerr << "warning: " << w << "\n";

    const fs::path csv_path = fs::path(args.out_dir) / "sweep.csv";
    std::ofstream csv(csv_path);
    gridoed::write_sweep_csv(csv, cache.sweep, cache.filtered);
    std::cout << "sweep: " << cache.sweep.size() << " samples ("
              << cache.filtered.size() << " on the front) -> " << csv_path.string()
              << "\n";
    std::cout << "fit: rho ~= " << cache.fit.amplitude << " * exp(-" << cache.fit.decay
              << " * (1/trace)^2), log-space residual " << cache.fit.residual << "\n";
    return 0;
}

int cmd_fit(const std::string& csv_path, bool all_rows) {
    std::ifstream in(csv_path);
    if (!in) {
        std::cerr << "cannot open '" << csv_path << "'\n";
        return 1;
    }
    const auto samples = gridoed::read_sweep_csv(in, !all_rows);
    const auto filtered = gridoed::pareto_filter(samples);
    const auto fit = gridoed::fit_inverse_tradeoff(filtered);
    json j;
    j["samples"] = samples.size();
    j["front_size"] = filtered.size();
    j["amplitude"] = fit.amplitude;
    j["decay"] = fit.decay;
    j["residual"] = fit.residual;
    std::cout << j.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Transmission-line parameter estimation with cost-aware experiment design"};
    app.require_subcommand(1);

    CommonArgs run_args, cmp_args, sweep_args;
    std::string fit_csv;
    bool fit_all = false;

    auto* run = app.add_subcommand("run", "closed-loop run of one strategy");
    add_common(run, run_args, true);
    auto* cmp = app.add_subcommand("compare", "run all three strategies on shared seeds");
    add_common(cmp, cmp_args, false);
    auto* sweep = app.add_subcommand("sweep", "export the rho trade-off curve as CSV");
    add_common(sweep, sweep_args, false);
    auto* fit = app.add_subcommand("fit", "fit the inverse trade-off curve from a sweep CSV");
    fit->add_option("csv", fit_csv, "sweep CSV file")->required();
    fit->add_flag("--all-rows", fit_all, "use all rows, not just filtered ones");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(run_args);
        if (cmp->parsed()) return cmd_compare(cmp_args);
        if (sweep->parsed()) return cmd_sweep(sweep_args);
        if (fit->parsed()) return cmd_fit(fit_csv, fit_all);
    } catch (const gridoed::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
