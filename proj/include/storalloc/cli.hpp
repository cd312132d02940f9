#pragma once

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <string>

#include "storalloc/harness.hpp"

namespace storalloc {

namespace detail {

inline json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& err) {
        // err.what() carries the byte position of the failure
        throw ConfigError(std::string(err.what()));
    }
}

inline json feasibility_report_json(const Instance& inst) {
    json out;
    const FeasibilityReport flow = hall_check_maxflow(inst);
    out["feasible"] = flow.feasible;
    out["witness_violation"] =
        flow.witness_violation ? json(*flow.witness_violation) : json(nullptr);
    out["sufficient_condition"] = sufficient_condition(inst);
    if (inst.n <= 24) {
        const FeasibilityReport brute = hall_check_bruteforce(inst);
        out["strict"] = brute.strict;
        out["strict_violation"] =
            brute.strict_violation ? json(*brute.strict_violation) : json(nullptr);
        out["method"] = "maxflow+bruteforce";
    } else {
        out["strict"] = nullptr;
        out["strict_violation"] = nullptr;
        out["method"] = "maxflow";
    }
    return out;
}

inline AllocationMatrix matrix_from_json(const json& rows, const Instance& inst) {
    if (!rows.is_array() || static_cast<int>(rows.size()) != inst.n)
        throw ConfigError("config: 'matrix' must be an n-row array");
    AllocationMatrix w(inst.n);
    for (int x = 0; x < inst.n; ++x) {
        const auto row = rows[static_cast<std::size_t>(x)].get<std::vector<int>>();
        if (static_cast<int>(row.size()) != inst.n)
            throw ConfigError("config: 'matrix' rows must have length n");
        for (int y = 0; y < inst.n; ++y)
            if (row[y] != 0) w.add(x, y, row[y]);
    }
    if (!validate_partial(inst, w)) throw ConfigError("config: 'matrix' violates P1-P3");
    return w;
}

inline json nash_report_json(const Instance& inst, const PotentialSpec& spec,
                             const AllocationMatrix& w) {
    const NashReport report = nash_check(inst, spec, w);
    json improving = json::array();
    for (const auto& dev : report.improving)
        improving.push_back(json{{"unit", dev.unit}, {"row", dev.row}, {"gain", json_num(dev.gain)}});
    return json{{"is_nash", report.is_nash}, {"improving", std::move(improving)}};
}

inline int run_exact_check(const json& cfg, const std::string& check, double gamma_flag) {
    const Instance inst = build_instance(cfg.at("instance")).instance;
    const PotentialSpec spec = build_potential(cfg.value("potential", json::object()), inst);
    const json sim = cfg.value("sim", json::object());
    const MoveFamily family = build_move_family(sim);
    const double gamma = gamma_flag >= 0.0 ? gamma_flag : cfg.value("gamma", 1.0);
    const bool churn = cfg.value("churn", false);
    const auto nu_on = detail::rate_field(sim, "nu_on", inst.n, 1.0);
    const auto nu_off = detail::rate_field(sim, "nu_off", inst.n, 1.0);
    const auto nu_act = detail::rate_field(sim, "nu_act", inst.n, inst.n ? 1.0 / inst.n : 1.0);

    json out{{"check", check}};
    if (check == "stationary" || check == "balance") {
        const Generator gen =
            build_generator(inst, spec, family, nu_on, nu_off, nu_act, gamma, churn);
        out["states"] = gen.num_states;
        out["gamma"] = json_num(gamma);
        out["churn"] = churn;
        if (check == "stationary") {
            const std::vector<double> mu = stationary_distribution(gen);
            out["tv_vs_gibbs"] = json_num(total_variation(mu, gibbs_measure(gen)));
        } else {
            const BalanceReport report = detailed_balance_error(gen);
            out["max_rel_error"] = json_num(report.max_rel_error);
            out["pairs"] = report.pairs;
        }
    } else if (check == "connectivity") {
        out["connected"] = connectivity_check(inst, family);
    } else if (check == "nash") {
        if (cfg.contains("matrix")) {
            out["mode"] = "matrix";
            out["report"] = nash_report_json(inst, spec, matrix_from_json(cfg.at("matrix"), inst));
        } else {
            const OptimumReport opt = brute_force_optimum(inst, spec);
            bool all_nash = true;
            for (const AllocationMatrix& w : opt.argmax)
                all_nash = all_nash && nash_check(inst, spec, w).is_nash;
            out["mode"] = "maxima";
            out["checked"] = opt.argmax.size();
            out["all_nash"] = all_nash;
        }
    } else if (check == "reach") {
        AllocationMatrix w0 = cfg.contains("matrix") ? matrix_from_json(cfg.at("matrix"), inst)
                                                     : AllocationMatrix(inst.n);
        const ReachResult result = reachability_check(inst, family, w0);
        out["reached"] = result.reached;
        out["path_length"] = result.path.size();
    } else if (check == "optimum") {
        const OptimumReport opt = brute_force_optimum(inst, spec);
        out["psi_opt"] = json_num(opt.psi_opt);
        out["argmax_count"] = opt.argmax.size();
        if (const auto closed = closed_form_optimum(inst, spec))
            out["closed_form"] = json_num(*closed);
    } else {
        throw ConfigError("unknown exact check '" + check + "'");
    }
    std::cout << out.dump(2) << "\n";
    return 0;
}

}  // namespace detail

/// Entry point shared by the binary and the tests. Exit codes: 0 success,
/// 1 configuration error, 2 guard violation.
inline int run_cli(int argc, const char* const* argv) {
    CLI::App app{"decentralized storage-allocation game: simulator and exact analysis"};
    app.require_subcommand(1);

    std::string config_path, out_dir, engine_override, check, trace_path, trace_out;
    std::int64_t seed_override = -1;
    int replicas_override = -1;
    double gamma_flag = -1.0;

    CLI::App* run = app.add_subcommand("run", "run a simulation experiment");
    run->add_option("config", config_path, "experiment config JSON")->required();
    run->add_option("--seed", seed_override, "override sim.seed");
    run->add_option("--replicas", replicas_override, "override replica count");
    run->add_option("--out-dir", out_dir, "directory for metrics.csv / trace.jsonl");
    run->add_option("--engine", engine_override, "discrete|continuous");

    CLI::App* feas = app.add_subcommand("feasibility", "print the allocation-existence report");
    feas->add_option("config", config_path, "config JSON with an 'instance' field")->required();

    CLI::App* exact = app.add_subcommand("exact", "desk-scale exact Markov-chain analysis");
    exact->add_option("config", config_path, "config JSON")->required();
    exact->add_option("--check", check, "stationary|balance|connectivity|nash|reach|optimum")
        ->required();
    exact->add_option("--gamma", gamma_flag, "inverse noise parameter");

    CLI::App* stats = app.add_subcommand("trace-stats", "potential-vs-time CSV from a trace");
    stats->add_option("trace", trace_path, "trace JSONL file")->required();
    stats->add_option("--out", trace_out, "output CSV path (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (run->parsed()) {
            const json cfg = detail::load_json_file(config_path);
            Experiment e = load_experiment(cfg);
            if (seed_override >= 0) e.sim.seed = static_cast<std::uint64_t>(seed_override);
            if (replicas_override > 0) e.replicas = replicas_override;
            if (!engine_override.empty()) {
                if (engine_override == "discrete") e.sim.engine = Engine::discrete;
                else if (engine_override == "continuous") e.sim.engine = Engine::continuous;
                else throw ConfigError("--engine must be discrete or continuous");
            }
            if (!out_dir.empty()) {
                namespace fs = std::filesystem;
                auto rebase = [&](std::string& path, const char* fallback) {
                    fs::path p = path.empty() ? fs::path(fallback) : fs::path(path);
                    if (p.is_relative()) p = fs::path(out_dir) / p;
                    path = p.string();
                };
                rebase(e.metrics_csv, "metrics.csv");
                rebase(e.trace_jsonl, "trace.jsonl");
            }
            const ExperimentResult result = run_experiment(e);
            std::ostringstream summary;
            write_metrics_csv(summary, result.rows, result.mean);
            std::cout << summary.str();
            return 0;
        }
        if (feas->parsed()) {
            const json cfg = detail::load_json_file(config_path);
            const json inst_json = cfg.contains("instance") ? cfg.at("instance") : cfg;
            const Instance inst = build_instance(inst_json).instance;
            std::cout << detail::feasibility_report_json(inst).dump(2) << "\n";
            return 0;
        }
        if (exact->parsed()) {
            return detail::run_exact_check(detail::load_json_file(config_path), check, gamma_flag);
        }
        if (stats->parsed()) {
            std::ifstream in(trace_path);
            if (!in) throw ConfigError("cannot open trace file '" + trace_path + "'");
            const auto rows = read_trace_jsonl(in);
            if (trace_out.empty()) {
                write_trace_stats_csv(std::cout, rows);
            } else {
                std::ofstream out(trace_out);
                if (!out) throw ConfigError("cannot open output file '" + trace_out + "'");
                write_trace_stats_csv(out, rows);
            }
            return 0;
        }
    } catch (const GuardError& e) {
        std::cerr << "guard violation: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

}  // namespace storalloc
