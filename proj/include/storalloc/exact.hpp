#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "storalloc/errors.hpp"
#include "storalloc/feasibility.hpp"
#include "storalloc/sampler.hpp"

namespace storalloc {

namespace detail {

// Upper bound on |W_p| / |W| ignoring column constraints: product over units
// of the number of row compositions.
inline double state_count_estimate(const Instance& inst, bool complete_only) {
    double estimate = 1.0;
    for (int x = 0; x < inst.n; ++x) {
        const int d = inst.out_degree(x);
        const int a = inst.alpha[x];
        // compositions of (<=) a into d labelled parts
        double rows = 1.0;
        if (d == 0) {
            rows = 1.0;  // only the empty row (complete requires a == 0)
        } else {
            // C(a+d-1, d-1) for exact sum, C(a+d, d) for sum <= a
            double c = 1.0;
            const int top = complete_only ? a + d - 1 : a + d;
            const int bottom = complete_only ? d - 1 : d;
            for (int i = 1; i <= bottom; ++i) c *= static_cast<double>(top - bottom + i) / i;
            rows = c;
        }
        estimate *= rows;
        if (estimate > 1e18) return estimate;
    }
    return estimate;
}

}  // namespace detail

/// Materializes W_p (or W when complete_only) by per-row composition search
/// with column-capacity pruning. Guarded by an upper-bound estimate and a
/// running count.
inline std::vector<AllocationMatrix> enumerate_states(const Instance& inst, bool complete_only,
                                                      std::size_t guard = 1'000'000) {
    const double estimate = detail::state_count_estimate(inst, complete_only);
    if (estimate > 1e9)
        throw GuardError("enumerate_states: estimated state count " + std::to_string(estimate) +
                         " exceeds hard cap");
    std::vector<AllocationMatrix> states;
    AllocationMatrix w(inst.n);
    std::vector<int> col_left(inst.beta.begin(), inst.beta.end());

    auto fill_rows = [&](auto&& self, int x) -> void {
        if (x == inst.n) {
            states.push_back(w);
            if (states.size() > guard)
                throw GuardError("enumerate_states: state count exceeds guard " +
                                 std::to_string(guard) + " (estimate " + std::to_string(estimate) +
                                 ")");
            return;
        }
        const auto& targets = inst.out[x];
        auto place = [&](auto&& inner, std::size_t j, int remaining) -> void {
            if (j == targets.size()) {
                if (remaining == 0 || !complete_only) self(self, x + 1);
                return;
            }
            const int y = targets[j];
            const int hi = std::min(remaining, col_left[y]);
            for (int v = 0; v <= hi; ++v) {
                if (v > 0) {
                    w.add(x, y, v);
                    col_left[y] -= v;
                }
                inner(inner, j + 1, remaining - v);
                if (v > 0) {
                    w.add(x, y, -v);
                    col_left[y] += v;
                }
            }
        };
        if (targets.empty()) {
            if (inst.alpha[x] == 0 || !complete_only) self(self, x + 1);
            return;
        }
        place(place, 0, inst.alpha[x]);
    };
    fill_rows(fill_rows, 0);
    return states;
}

struct StateEdge {
    int actor;
    int target;  // node index
    Move move;
};

/// Transition graph on W_p (or W) under a move family with all units on.
struct StateGraph {
    std::vector<AllocationMatrix> nodes;
    std::unordered_map<std::vector<int>, int, VecIntHash> index;
    std::vector<std::vector<StateEdge>> adj;
    bool complete_only = false;

    int find(const AllocationMatrix& w) const {
        auto it = index.find(w.cells());
        return it == index.end() ? -1 : it->second;
    }
};

inline StateGraph build_state_graph(const Instance& inst, const MoveFamily& family,
                                    bool complete_only, std::size_t guard = 1'000'000) {
    StateGraph g;
    g.complete_only = complete_only;
    g.nodes = enumerate_states(inst, complete_only, guard);
    for (int i = 0; i < static_cast<int>(g.nodes.size()); ++i) g.index[g.nodes[i].cells()] = i;
    g.adj.resize(g.nodes.size());
    const FunctionalState xi = all_on(inst.n);
    for (int i = 0; i < static_cast<int>(g.nodes.size()); ++i) {
        AllocationMatrix w = g.nodes[i];
        for (int actor = 0; actor < inst.n; ++actor) {
            for (const Move& m : enumerate_moves(inst, family, w, xi, actor)) {
                const MoveUndo undo = apply_move(w, m);
                const int j = g.find(w);
                undo_move(w, undo);
                if (j >= 0) g.adj[i].push_back(StateEdge{actor, j, m});
            }
        }
    }
    return g;
}

struct ReachResult {
    bool reached = false;
    std::vector<AllocationMatrix> path;  // states after each move; empty if W0 complete
};

/// BFS over the transition graph from W0 to the set of complete allocations.
/// Under the Hall condition this must succeed for any admissible family;
/// failure is surfaced as an implementation bug.
inline ReachResult reachability_check(const Instance& inst, const MoveFamily& family,
                                      const AllocationMatrix& w0, std::size_t guard = 1'000'000) {
    if (!validate_partial(inst, w0))
        throw std::invalid_argument("reachability_check: W0 violates P1-P3");
    if (!hall_check_maxflow(inst).feasible)
        throw std::invalid_argument("reachability_check: instance is not feasible");
    ReachResult result;
    if (w0.is_complete(inst)) {
        result.reached = true;
        return result;
    }
    const FunctionalState xi = all_on(inst.n);
    std::unordered_map<std::vector<int>, int, VecIntHash> seen;
    std::vector<AllocationMatrix> states{w0};
    std::vector<int> parent{-1};
    seen[w0.cells()] = 0;
    std::deque<int> queue{0};
    int goal = -1;
    while (!queue.empty() && goal < 0) {
        const int cur = queue.front();
        queue.pop_front();
        AllocationMatrix w = states[static_cast<std::size_t>(cur)];
        for (int actor = 0; actor < inst.n && goal < 0; ++actor) {
            for (const Move& m : enumerate_moves(inst, family, w, xi, actor)) {
                const MoveUndo undo = apply_move(w, m);
                if (!seen.count(w.cells())) {
                    const int id = static_cast<int>(states.size());
                    if (states.size() > guard)
                        throw GuardError("reachability_check: explored states exceed guard");
                    seen[w.cells()] = id;
                    states.push_back(w);
                    parent.push_back(cur);
                    if (w.is_complete(inst)) {
                        goal = id;
                        undo_move(w, undo);
                        break;
                    }
                    queue.push_back(id);
                }
                undo_move(w, undo);
            }
        }
    }
    if (goal < 0)
        throw std::logic_error(
            "reachability_check: no path to a complete allocation on a feasible instance; "
            "this indicates a bug in the move enumeration");
    result.reached = true;
    for (int v = goal; v != 0; v = parent[static_cast<std::size_t>(v)])
        result.path.push_back(states[static_cast<std::size_t>(v)]);
    std::reverse(result.path.begin(), result.path.end());
    return result;
}

/// True iff the restriction of the transition graph to complete allocations
/// is one connected component.
inline bool connectivity_check(const Instance& inst, const MoveFamily& family,
                               std::size_t guard = 1'000'000) {
    const StateGraph g = build_state_graph(inst, family, /*complete_only=*/true, guard);
    if (g.nodes.size() <= 1) return true;
    std::vector<char> visited(g.nodes.size(), 0);
    std::deque<int> queue{0};
    visited[0] = 1;
    std::size_t count = 1;
    while (!queue.empty()) {
        const int v = queue.front();
        queue.pop_front();
        for (const StateEdge& e : g.adj[static_cast<std::size_t>(v)]) {
            if (!visited[static_cast<std::size_t>(e.target)]) {
                visited[static_cast<std::size_t>(e.target)] = 1;
                ++count;
                queue.push_back(e.target);
            }
        }
    }
    return count == g.nodes.size();
}

/// Exact rate matrix of the process restricted to complete allocations,
/// optionally augmented with the on/off state. Rows sum to zero.
struct Generator {
    int num_states = 0;
    bool churn = false;
    int n_units = 0;
    double gamma = 0.0;
    std::vector<double> rates;       // dense, row-major
    std::vector<int> w_index;        // per state: node in `nodes`
    std::vector<std::uint32_t> xi_mask;
    std::vector<double> psi_value;   // per state: Psi(W)
    std::vector<double> nu_weight;   // per state: product of on/off rate factors
    std::vector<AllocationMatrix> nodes;

    double rate(int i, int j) const {
        return rates[static_cast<std::size_t>(i) * num_states + j];
    }
};

inline Generator build_generator(const Instance& inst, const PotentialSpec& spec,
                                 const MoveFamily& family, const std::vector<double>& nu_on,
                                 const std::vector<double>& nu_off,
                                 const std::vector<double>& nu_act, double gamma,
                                 bool include_churn, std::size_t guard = 10'000) {
    Generator gen;
    gen.churn = include_churn;
    gen.n_units = inst.n;
    gen.gamma = gamma;
    gen.nodes = enumerate_states(inst, /*complete_only=*/true, guard);
    std::unordered_map<std::vector<int>, int, VecIntHash> node_index;
    for (int i = 0; i < static_cast<int>(gen.nodes.size()); ++i)
        node_index[gen.nodes[i].cells()] = i;

    const int n_xi = include_churn ? 1 << inst.n : 1;
    const std::size_t n_states = gen.nodes.size() * static_cast<std::size_t>(n_xi);
    if (n_states > guard)
        throw GuardError("build_generator: state space " + std::to_string(n_states) +
                         " exceeds guard " + std::to_string(guard));
    gen.num_states = static_cast<int>(n_states);
    gen.rates.assign(n_states * n_states, 0.0);
    gen.w_index.resize(n_states);
    gen.xi_mask.resize(n_states);
    gen.psi_value.resize(n_states);
    gen.nu_weight.resize(n_states);

    auto state_id = [&](int node, std::uint32_t mask) {
        return node * n_xi + static_cast<int>(include_churn ? mask : 0);
    };

    for (int node = 0; node < static_cast<int>(gen.nodes.size()); ++node) {
        const double psi_w = psi(inst, spec, gen.nodes[static_cast<std::size_t>(node)]);
        for (std::uint32_t mask = 0; mask < static_cast<std::uint32_t>(n_xi); ++mask) {
            const int sid = state_id(node, mask);
            gen.w_index[sid] = node;
            gen.xi_mask[sid] = include_churn ? mask : (1u << inst.n) - 1;
            gen.psi_value[sid] = psi_w;
            double weight = 1.0;
            if (include_churn)
                for (int x = 0; x < inst.n; ++x)
                    weight *= (mask >> x & 1u) ? nu_on[x] : nu_off[x];
            gen.nu_weight[sid] = weight;
        }
    }

    for (int node = 0; node < static_cast<int>(gen.nodes.size()); ++node) {
        AllocationMatrix w = gen.nodes[static_cast<std::size_t>(node)];
        for (std::uint32_t mask = 0; mask < static_cast<std::uint32_t>(n_xi); ++mask) {
            const int sid = state_id(node, mask);
            FunctionalState xi(static_cast<std::size_t>(inst.n), 1);
            if (include_churn)
                for (int x = 0; x < inst.n; ++x) xi[x] = mask >> x & 1u ? 1 : 0;
            // functional flips
            if (include_churn) {
                for (int x = 0; x < inst.n; ++x) {
                    const std::uint32_t flipped = mask ^ (1u << x);
                    const double rate = (mask >> x & 1u) ? nu_off[x] : nu_on[x];
                    gen.rates[static_cast<std::size_t>(sid) * gen.num_states +
                              state_id(node, flipped)] += rate;
                }
            }
            // activations
            for (int actor = 0; actor < inst.n; ++actor) {
                if (!xi[actor] || nu_act[actor] <= 0.0) continue;
                const GibbsDistribution dist =
                    gibbs_distribution_reference(inst, spec, family, w, xi, actor, gamma);
                for (std::size_t k = 0; k < dist.moves.size(); ++k) {
                    if (dist.probs[k] <= 0.0) continue;
                    const MoveUndo undo = apply_move(w, dist.moves[k]);
                    const auto it = node_index.find(w.cells());
                    undo_move(w, undo);
                    if (it == node_index.end()) continue;  // left W (cannot happen from W)
                    gen.rates[static_cast<std::size_t>(sid) * gen.num_states +
                              state_id(it->second, mask)] += nu_act[actor] * dist.probs[k];
                }
            }
        }
    }
    // diagonal: rows sum to zero
    for (int i = 0; i < gen.num_states; ++i) {
        double off = 0.0;
        for (int j = 0; j < gen.num_states; ++j)
            if (j != i) off += gen.rate(i, j);
        gen.rates[static_cast<std::size_t>(i) * gen.num_states + i] = -off;
    }
    return gen;
}

/// Closed-form Gibbs measure of the generator's state space:
/// mu(W, xi) proportional to (product of nu factors) * e^{gamma Psi(W)}.
inline std::vector<double> gibbs_measure(const Generator& gen) {
    double max_psi = kNegInf;
    for (int i = 0; i < gen.num_states; ++i) max_psi = std::max(max_psi, gen.psi_value[i]);
    std::vector<double> mu(static_cast<std::size_t>(gen.num_states));
    double z = 0.0;
    for (int i = 0; i < gen.num_states; ++i) {
        mu[i] = gen.nu_weight[i] * std::exp(gen.gamma * (gen.psi_value[i] - max_psi));
        z += mu[i];
    }
    for (double& v : mu) v /= z;
    return mu;
}

/// Solves mu Lambda = 0, sum mu = 1 by dense least squares. Reducible chains
/// (kernel dimension > 1) are rejected.
inline std::vector<double> stationary_distribution(const Generator& gen) {
    const int n = gen.num_states;
    if (n == 0) return {};
    Eigen::MatrixXd lambda_t(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) lambda_t(j, i) = gen.rate(i, j);

    Eigen::FullPivLU<Eigen::MatrixXd> lu(lambda_t);
    lu.setThreshold(1e-9);
    if (n - lu.rank() != 1)
        throw std::runtime_error("stationary_distribution: chain is reducible (kernel dimension " +
                                 std::to_string(n - lu.rank()) + ")");

    Eigen::MatrixXd a(n + 1, n);
    a.topRows(n) = lambda_t;
    a.row(n).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n + 1);
    b(n) = 1.0;
    Eigen::VectorXd mu = a.colPivHouseholderQr().solve(b);

    double residual = 0.0;
    for (int j = 0; j < n; ++j) residual = std::max(residual, std::abs(lambda_t.row(j).dot(mu)));
    if (residual > 1e-10)
        throw std::runtime_error("stationary_distribution: residual " + std::to_string(residual) +
                                 " exceeds 1e-10");
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out[i] = std::max(0.0, mu(i));
    const double total = std::accumulate(out.begin(), out.end(), 0.0);
    for (double& v : out) v /= total;
    return out;
}

inline double total_variation(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
    return 0.5 * d;
}

struct BalanceReport {
    double max_rel_error = 0.0;
    long long pairs = 0;  // ordered pairs with a transition in either direction
};

/// Largest relative violation of rho_i L_ij = rho_j L_ji over all transition
/// pairs, with rho the (unnormalized) reversible measure of the chain.
inline BalanceReport detailed_balance_error(const Generator& gen) {
    double max_psi = kNegInf;
    for (int i = 0; i < gen.num_states; ++i) max_psi = std::max(max_psi, gen.psi_value[i]);
    std::vector<double> rho(static_cast<std::size_t>(gen.num_states));
    for (int i = 0; i < gen.num_states; ++i)
        rho[i] = gen.nu_weight[i] * std::exp(gen.gamma * (gen.psi_value[i] - max_psi));
    BalanceReport report;
    for (int i = 0; i < gen.num_states; ++i) {
        for (int j = i + 1; j < gen.num_states; ++j) {
            const double fwd = gen.rate(i, j), bwd = gen.rate(j, i);
            if (fwd == 0.0 && bwd == 0.0) continue;
            ++report.pairs;
            const double lhs = rho[i] * fwd, rhs = rho[j] * bwd;
            const double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-300});
            report.max_rel_error = std::max(report.max_rel_error, std::abs(lhs - rhs) / scale);
        }
    }
    return report;
}

struct NashReport {
    struct Deviation {
        int unit;
        std::vector<int> row;
        double gain;
    };
    bool is_nash = true;
    std::vector<Deviation> improving;
};

/// Checks the Nash inequality over all feasible alternative rows of every
/// unit (rows may shrink; deviations range over all of W_p, not the move
/// sets). Guarded per row.
inline NashReport nash_check(const Instance& inst, const PotentialSpec& spec,
                             const AllocationMatrix& w) {
    if (!validate_partial(inst, w))
        throw std::invalid_argument("nash_check: W violates P1-P3");
    NashReport report;
    AllocationMatrix scratch = w;
    for (int x = 0; x < inst.n; ++x) {
        if (inst.alpha[x] > 8 || inst.out_degree(x) > 5)
            throw GuardError("nash_check: row enumeration gated to alpha <= 8, degree <= 5");
        const double u_base = utility(inst, spec, scratch, x);
        const std::vector<int> current = scratch.row(x);
        const auto& targets = inst.out[x];
        std::vector<int> caps(targets.size());
        for (std::size_t j = 0; j < targets.size(); ++j)
            caps[j] = inst.beta[targets[j]] - (scratch.col_sum(targets[j]) - scratch.at(x, targets[j]));
        std::vector<int> row(static_cast<std::size_t>(inst.n), 0);
        auto visit = [&](auto&& self, std::size_t j, int used) -> void {
            if (j == targets.size()) {
                scratch.set_row(x, row);
                const double u = utility(inst, spec, scratch, x);
                const double tol = 1e-9 * std::max(1.0, std::abs(u_base));
                if (u > u_base + tol)
                    report.improving.push_back(NashReport::Deviation{x, row, u - u_base});
                return;
            }
            const int hi = std::min(caps[j], inst.alpha[x] - used);
            for (int v = 0; v <= hi; ++v) {
                row[targets[j]] = v;
                self(self, j + 1, used + v);
            }
            row[targets[j]] = 0;
            return;
        };
        visit(visit, 0, 0);
        scratch.set_row(x, current);
    }
    report.is_nash = report.improving.empty();
    return report;
}

struct OptimumReport {
    double psi_opt = 0.0;
    std::vector<AllocationMatrix> argmax;
};

/// Max of Psi over all complete allocations, with the full argmax set.
inline OptimumReport brute_force_optimum(const Instance& inst, const PotentialSpec& spec,
                                         std::size_t guard = 1'000'000) {
    const std::vector<AllocationMatrix> states = enumerate_states(inst, true, guard);
    if (states.empty()) throw std::invalid_argument("brute_force_optimum: no complete allocation");
    OptimumReport report;
    report.psi_opt = kNegInf;
    for (const AllocationMatrix& w : states)
        report.psi_opt = std::max(report.psi_opt, psi(inst, spec, w));
    const double tol = 1e-9 * std::max(1.0, std::abs(report.psi_opt));
    for (const AllocationMatrix& w : states)
        if (psi(inst, spec, w) >= report.psi_opt - tol) report.argmax.push_back(w);
    return report;
}

}  // namespace storalloc
