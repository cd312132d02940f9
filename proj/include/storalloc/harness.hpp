#pragma once

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "storalloc/dynamics.hpp"
#include "storalloc/exact.hpp"
#include "storalloc/feasibility.hpp"

namespace storalloc {

using json = nlohmann::json;

inline std::string fmt_g12(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

// json number with at most 12 significant digits
inline json json_num(double v) { return json::parse(fmt_g12(v)); }

namespace detail {

inline std::vector<int> int_vec_field(const json& j, const char* key, int n,
                                      std::optional<int> fallback = std::nullopt) {
    if (!j.contains(key)) {
        if (fallback) return uniform_vec(n, *fallback);
        throw ConfigError(std::string("config: missing field '") + key + "'");
    }
    const json& v = j.at(key);
    if (v.is_number_integer()) return uniform_vec(n, v.get<int>());
    if (v.is_array()) {
        auto out = v.get<std::vector<int>>();
        if (static_cast<int>(out.size()) != n)
            throw ConfigError(std::string("config: '") + key + "' must have length n");
        return out;
    }
    throw ConfigError(std::string("config: '") + key + "' must be an integer or array");
}

inline std::vector<double> rate_field(const json& j, const char* key, int n, double fallback) {
    if (!j.contains(key)) return std::vector<double>(static_cast<std::size_t>(n), fallback);
    const json& v = j.at(key);
    if (v.is_number()) return std::vector<double>(static_cast<std::size_t>(n), v.get<double>());
    if (v.is_array()) {
        auto out = v.get<std::vector<double>>();
        if (static_cast<int>(out.size()) != n)
            throw ConfigError(std::string("config: '") + key + "' must have length n");
        return out;
    }
    if (v.is_string() && v.get<std::string>() == "auto" && std::string(key) == "nu_act")
        return std::vector<double>(static_cast<std::size_t>(n), 1.0 / n);
    throw ConfigError(std::string("config: '") + key + "' must be a number or array");
}

inline std::vector<std::pair<int, int>> read_edge_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open edge list file '" + path + "'");
    std::vector<std::pair<int, int>> edges;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        int x, y;
        if (ls >> x >> y) edges.emplace_back(x, y);
    }
    return edges;
}

}  // namespace detail

/// Builds an Instance from the config's generator spec. Records the seed of
/// randomly generated topologies so experiments stay reproducible.
struct InstanceBuild {
    Instance instance;
    std::string type;
    std::optional<std::uint64_t> graph_seed;
};

inline InstanceBuild build_instance(const json& j) {
    if (!j.is_object()) throw ConfigError("config: 'instance' must be an object");
    const std::string type = j.value("type", std::string("explicit"));
    InstanceBuild out;
    out.type = type;
    if (type == "complete" || type == "star") {
        const int n = j.at("n").get<int>();
        const auto alpha = detail::int_vec_field(j, "alpha", n);
        const auto beta = detail::int_vec_field(j, "beta", n);
        std::vector<std::pair<int, int>> edges;
        if (type == "complete") {
            for (int x = 0; x < n; ++x)
                for (int y = 0; y < n; ++y)
                    if (x != y) edges.emplace_back(x, y);
        } else {
            for (int leaf = 1; leaf < n; ++leaf) {
                edges.emplace_back(0, leaf);
                edges.emplace_back(leaf, 0);
            }
        }
        out.instance = Instance::from_edges(n, edges, alpha, beta);
    } else if (type == "regular") {
        const int n = j.at("n").get<int>();
        const int degree = j.at("degree").get<int>();
        const std::uint64_t seed = j.value("graph_seed", 0ULL);
        out.graph_seed = seed;
        Instance g = random_regular(n, degree, 0, 0, seed);
        g.alpha = detail::int_vec_field(j, "alpha", n);
        g.beta = detail::int_vec_field(j, "beta", n);
        out.instance = std::move(g);
    } else if (type == "explicit" || type == "file") {
        std::vector<std::pair<int, int>> edges;
        if (type == "file") {
            edges = detail::read_edge_list(j.at("path").get<std::string>());
        } else {
            for (const auto& e : j.at("edges")) {
                if (!e.is_array() || e.size() != 2)
                    throw ConfigError("config: each edge must be a pair [x, y]");
                edges.emplace_back(e[0].get<int>(), e[1].get<int>());
            }
        }
        int n = 0;
        for (auto [x, y] : edges) n = std::max({n, x + 1, y + 1});
        if (j.contains("n")) n = std::max(n, j.at("n").get<int>());
        if (j.value("undirected", false)) {
            const auto base = edges;
            for (auto [x, y] : base) edges.emplace_back(y, x);
        }
        out.instance = Instance::from_edges(n, edges, detail::int_vec_field(j, "alpha", n),
                                            detail::int_vec_field(j, "beta", n));
    } else {
        throw ConfigError("config: unknown instance type '" + type + "'");
    }
    return out;
}

inline json instance_to_json(const Instance& inst) {
    json edges = json::array();
    for (int x = 0; x < inst.n; ++x)
        for (int y : inst.out[x]) edges.push_back(json::array({x, y}));
    return json{{"type", "explicit"},
                {"n", inst.n},
                {"edges", std::move(edges)},
                {"alpha", inst.alpha},
                {"beta", inst.beta}};
}

inline json potential_to_json(const PotentialSpec& spec) {
    return json{{"c_all", json_num(spec.c_all)},
                {"c_agg", json_num(spec.c_agg)},
                {"c_con", spec.c_con},
                {"congestion", spec.congestion == Congestion::quadratic ? "quadratic" : "hamming"}};
}

inline PotentialSpec build_potential(const json& j, const Instance& inst) {
    if (!j.is_object()) throw ConfigError("config: 'potential' must be an object");
    PotentialSpec spec;
    spec.c_agg = j.value("c_agg", 0.0);
    const std::string variant = j.value("congestion", std::string("quadratic"));
    if (variant == "quadratic") spec.congestion = Congestion::quadratic;
    else if (variant == "hamming") spec.congestion = Congestion::hamming;
    else throw ConfigError("config: congestion must be 'quadratic' or 'hamming'");
    if (j.contains("c_con") && j.at("c_con").is_array()) {
        spec.c_con = j.at("c_con").get<std::vector<double>>();
        if (static_cast<int>(spec.c_con.size()) != inst.n)
            throw ConfigError("config: 'c_con' must have length n");
    } else {
        spec.c_con.assign(static_cast<std::size_t>(inst.n), j.value("c_con", 1.0));
    }
    for (double c : spec.c_con)
        if (!(c > 0.0)) throw ConfigError("config: c_con entries must be positive");
    const double c_con_max = *std::max_element(spec.c_con.begin(), spec.c_con.end());
    if (!j.contains("c_all") || (j.at("c_all").is_string() && j.at("c_all") == "auto"))
        spec.c_all = default_c_all(inst, spec.c_agg, c_con_max);
    else
        spec.c_all = j.at("c_all").get<double>();
    return spec;
}

inline PotentialSpec build_potential_default(const Instance& inst) {
    return build_potential(json::object(), inst);
}

inline MoveFamily build_move_family(const json& j) {
    const std::string kind = j.value("move_family", std::string("granular"));
    if (kind == "granular") {
        std::vector<int> q{1};
        if (j.contains("granularity")) q = j.at("granularity").get<std::vector<int>>();
        return MoveFamily::granular(std::move(q));
    }
    if (kind == "single_resource") return MoveFamily::single_resource();
    if (kind == "full") return MoveFamily::full();
    throw ConfigError("config: unknown move_family '" + kind + "'");
}

inline SimConfig build_sim_config(const json& j, const Instance& inst) {
    if (!j.is_object()) throw ConfigError("config: 'sim' must be an object");
    SimConfig cfg;
    const std::string engine = j.value("engine", std::string("discrete"));
    if (engine == "discrete") cfg.engine = Engine::discrete;
    else if (engine == "continuous") cfg.engine = Engine::continuous;
    else throw ConfigError("config: engine must be 'discrete' or 'continuous'");
    cfg.gamma0 = j.value("gamma0", 1.0);
    if (!(cfg.gamma0 > 0.0)) throw ConfigError("config: gamma0 must be positive");
    cfg.gamma_increment = j.value("gamma_increment", 1e-5);
    if (cfg.gamma_increment < 0.0) throw ConfigError("config: gamma_increment must be >= 0");
    if (!j.contains("horizon") || (j.at("horizon").is_string() && j.at("horizon") == "auto"))
        cfg.horizon = 5.0 * static_cast<double>(inst.total_alpha());
    else
        cfg.horizon = j.at("horizon").get<double>();
    if (cfg.horizon < 0.0) throw ConfigError("config: horizon must be >= 0");
    cfg.move_family = build_move_family(j);
    cfg.nu_on = detail::rate_field(j, "nu_on", inst.n, 1.0);
    cfg.nu_off = detail::rate_field(j, "nu_off", inst.n, 0.0);
    cfg.nu_act = detail::rate_field(j, "nu_act", inst.n, inst.n > 0 ? 1.0 / inst.n : 1.0);
    cfg.seed = j.value("seed", 0ULL);
    return cfg;
}

struct Experiment {
    InstanceBuild built;
    PotentialSpec potential;
    SimConfig sim;
    int replicas = 10;
    std::string metrics_csv;  // empty: not written
    std::string trace_jsonl;  // empty: not written (replica 0's trace)
};

inline Experiment load_experiment(const json& j) {
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    if (j.value("version", 0) != 1) throw ConfigError("config: expected \"version\": 1");
    Experiment e;
    e.built = build_instance(j.at("instance"));
    e.potential = build_potential(j.value("potential", json::object()), e.built.instance);
    e.sim = build_sim_config(j.value("sim", json::object()), e.built.instance);
    e.replicas = j.value("replicas", 10);
    if (e.replicas < 1) throw ConfigError("config: replicas must be >= 1");
    if (j.contains("outputs")) {
        const json& o = j.at("outputs");
        e.metrics_csv = o.value("metrics_csv", std::string());
        e.trace_jsonl = o.value("trace_jsonl", std::string());
    }
    return e;
}

struct MetricsRow {
    std::uint64_t seed = 0;
    long long delta = 0;
    double nu_moves = 0.0;
    std::optional<double> psi_ratio;
    double degree = 0.0;
    double wall_ms = 0.0;
};

/// The four performance metrics of a finished run: unallocated atoms,
/// moves per atom, potential ratio to the optimum, mean resources per unit.
inline MetricsRow compute_metrics(const Instance& inst, const PotentialSpec& spec,
                                  const Trace& trace, const AllocationMatrix& w_t,
                                  std::optional<double> psi_opt) {
    MetricsRow row;
    row.delta = inst.total_alpha() - w_t.total();
    double moves_per_atom = 0.0;
    int counted = 0;
    for (int x = 0; x < inst.n; ++x) {
        if (inst.alpha[x] == 0) continue;
        moves_per_atom += static_cast<double>(trace.per_unit_moves[x]) / inst.alpha[x];
        ++counted;
    }
    row.nu_moves = counted > 0 ? moves_per_atom / counted : 0.0;
    if (psi_opt) row.psi_ratio = psi(inst, spec, w_t) / *psi_opt;
    long long support = 0;
    for (int x = 0; x < inst.n; ++x)
        for (int y = 0; y < inst.n; ++y)
            if (w_t.at(x, y) > 0) ++support;
    row.degree = inst.n > 0 ? static_cast<double>(support) / inst.n : 0.0;
    return row;
}

inline const char* event_kind_name(EventKind k) {
    switch (k) {
        case EventKind::turn_on: return "on";
        case EventKind::turn_off: return "off";
        case EventKind::activate: return "activate";
    }
    return "?";
}

inline void write_trace_jsonl(std::ostream& out, const Trace& trace) {
    for (const TraceEvent& ev : trace.events) {
        out << "{\"t\":" << fmt_g12(ev.t) << ",\"kind\":\"" << event_kind_name(ev.kind)
            << "\",\"actor\":" << ev.actor;
        if (ev.kind == EventKind::activate) {
            if (!ev.moved) {
                out << ",\"move\":\"stay\"";
            } else {
                const char* mk = ev.move_kind == MoveKind::allocation    ? "alloc"
                                 : ev.move_kind == MoveKind::distribution ? "dist"
                                                                          : "full_row";
                out << ",\"move\":\"" << mk << "\"";
                if (ev.from >= 0) out << ",\"from\":" << ev.from;
                if (ev.to >= 0) out << ",\"to\":" << ev.to;
                if (ev.amount > 0) out << ",\"amount\":" << ev.amount;
            }
        }
        out << ",\"psi\":" << fmt_g12(ev.psi_after) << ",\"mass\":" << ev.mass_after << "}\n";
    }
}

/// Replica-index-ordered average of the metric rows.
struct MeanRow {
    double delta = 0.0;
    double nu_moves = 0.0;
    std::optional<double> psi_ratio;
    double degree = 0.0;
    double wall_ms = 0.0;
};

inline MeanRow mean_of(const std::vector<MetricsRow>& rows) {
    MeanRow mean;
    double psi_sum = 0.0;
    int psi_count = 0;
    for (const MetricsRow& r : rows) {
        mean.delta += static_cast<double>(r.delta);
        mean.nu_moves += r.nu_moves;
        mean.degree += r.degree;
        mean.wall_ms += r.wall_ms;
        if (r.psi_ratio) {
            psi_sum += *r.psi_ratio;
            ++psi_count;
        }
    }
    const double k = rows.empty() ? 1.0 : static_cast<double>(rows.size());
    mean.delta /= k;
    mean.nu_moves /= k;
    mean.degree /= k;
    mean.wall_ms /= k;
    if (psi_count > 0) mean.psi_ratio = psi_sum / psi_count;
    return mean;
}

inline void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows,
                              const MeanRow& mean) {
    out << "seed,delta,nu_moves,psi_ratio,degree,wall_ms\n";
    for (const MetricsRow& r : rows) {
        out << r.seed << ',' << r.delta << ',' << fmt_g12(r.nu_moves) << ','
            << (r.psi_ratio ? fmt_g12(*r.psi_ratio) : std::string()) << ',' << fmt_g12(r.degree)
            << ',' << fmt_g12(r.wall_ms) << "\n";
    }
    out << "mean," << fmt_g12(mean.delta) << ',' << fmt_g12(mean.nu_moves) << ','
        << (mean.psi_ratio ? fmt_g12(*mean.psi_ratio) : std::string()) << ','
        << fmt_g12(mean.degree) << ',' << fmt_g12(mean.wall_ms) << "\n";
}

struct ExperimentResult {
    std::vector<MetricsRow> rows;
    MeanRow mean;
    std::optional<double> psi_opt;
    bool feasible = true;
    Trace first_trace;  // replica 0's trace (with events iff a trace output is set)
};

/// Runs `replicas` independent seeded simulations (concurrently), computes
/// per-replica metrics and the mean row, and writes the configured outputs.
/// Metrics are folded in replica order, so results do not depend on how the
/// replicas were scheduled.
inline ExperimentResult run_experiment(const Experiment& e) {
    const Instance& inst = e.built.instance;
    ExperimentResult result;
    result.feasible = hall_check_maxflow(inst).feasible;
    if (!result.feasible)
        std::fprintf(stderr,
                     "warning: instance fails the allocation-existence condition; "
                     "runs may not complete allocation\n");

    result.psi_opt = closed_form_optimum(inst, e.potential);
    if (!result.psi_opt) {
        try {
            if (detail::state_count_estimate(inst, true) <= 1e6)
                result.psi_opt = brute_force_optimum(inst, e.potential).psi_opt;
        } catch (const GuardError&) {
        } catch (const std::invalid_argument&) {
        }
    }

    struct ReplicaOut {
        MetricsRow row;
        Trace trace;
    };
    auto run_one = [&](int replica) -> ReplicaOut {
        SimConfig cfg = e.sim;
        cfg.seed = mix64(mix64(e.sim.seed) + static_cast<std::uint64_t>(replica));
        const bool keep_events = replica == 0 && !e.trace_jsonl.empty();
        AllocationMatrix w(inst.n);
        const auto t0 = std::chrono::steady_clock::now();
        Trace trace = e.sim.engine == Engine::discrete
                          ? run_discrete(inst, e.potential, cfg, w, {}, keep_events)
                          : run_continuous(inst, e.potential, cfg, w, all_on(inst.n), {},
                                           keep_events);
        const auto t1 = std::chrono::steady_clock::now();
        ReplicaOut out;
        out.row = compute_metrics(inst, e.potential, trace, w, result.psi_opt);
        out.row.seed = cfg.seed;
        out.row.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        out.trace = std::move(trace);
        return out;
    };

    std::vector<std::future<ReplicaOut>> futures;
    futures.reserve(static_cast<std::size_t>(e.replicas));
    for (int r = 0; r < e.replicas; ++r)
        futures.push_back(std::async(std::launch::async, run_one, r));
    for (int r = 0; r < e.replicas; ++r) {
        ReplicaOut out = futures[static_cast<std::size_t>(r)].get();
        if (r == 0) result.first_trace = std::move(out.trace);
        result.rows.push_back(out.row);
    }
    result.mean = mean_of(result.rows);

    auto open_out = [](const std::string& path) {
        std::filesystem::path p(path);
        if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
        std::ofstream out(p);
        if (!out) throw ConfigError("cannot open output file '" + path + "'");
        return out;
    };
    if (!e.metrics_csv.empty()) {
        auto out = open_out(e.metrics_csv);
        write_metrics_csv(out, result.rows, result.mean);
    }
    if (!e.trace_jsonl.empty()) {
        auto out = open_out(e.trace_jsonl);
        write_trace_jsonl(out, result.first_trace);
    }
    return result;
}

struct TraceStatsRow {
    double t;
    double psi;
    long long mass;
};

inline std::vector<TraceStatsRow> read_trace_jsonl(std::istream& in) {
    std::vector<TraceStatsRow> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& err) {
            throw ConfigError("trace line " + std::to_string(line_no) + ": " + err.what());
        }
        rows.push_back(TraceStatsRow{j.at("t").get<double>(), j.at("psi").get<double>(),
                                     j.at("mass").get<long long>()});
    }
    return rows;
}

/// Potential-vs-time series as CSV, for external plotting.
inline void write_trace_stats_csv(std::ostream& out, const std::vector<TraceStatsRow>& rows) {
    out << "t,psi,mass\n";
    for (const TraceStatsRow& r : rows)
        out << fmt_g12(r.t) << ',' << fmt_g12(r.psi) << ',' << r.mass << "\n";
}

}  // namespace storalloc
