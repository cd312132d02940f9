#pragma once

#include <algorithm>
#include <optional>
#include <queue>
#include <vector>

#include "storalloc/allocation.hpp"
#include "storalloc/errors.hpp"
#include "storalloc/instance.hpp"

namespace storalloc {

struct FeasibilityReport {
    bool feasible = false;
    std::optional<std::vector<int>> witness_violation;  // D with sum alpha_D > sum beta_N(D)
    bool strict = false;                                // strict Hall condition
    std::optional<std::vector<int>> strict_violation;   // A with sum alpha_A >= sum beta_N(A)
};

/// Hall condition by subset scan: a complete allocation exists iff every
/// subset's demand fits in its joint neighborhood. Also evaluates the strict
/// variant that ergodicity needs. Nonempty subsets only.
inline FeasibilityReport hall_check_bruteforce(const Instance& inst) {
    if (inst.n > 24) throw GuardError("hall_check_bruteforce: n > 24");
    FeasibilityReport report;
    report.feasible = true;
    report.strict = true;
    const std::uint32_t limit = 1u << inst.n;
    for (std::uint32_t mask = 1; mask < limit; ++mask) {
        long long demand = 0;
        std::uint32_t nbhd = 0;
        for (int x = 0; x < inst.n; ++x) {
            if (!(mask >> x & 1u)) continue;
            demand += inst.alpha[x];
            for (int y : inst.out[x]) nbhd |= 1u << y;
        }
        long long capacity = 0;
        for (int y = 0; y < inst.n; ++y)
            if (nbhd >> y & 1u) capacity += inst.beta[y];
        auto subset = [&] {
            std::vector<int> d;
            for (int x = 0; x < inst.n; ++x)
                if (mask >> x & 1u) d.push_back(x);
            return d;
        };
        if (demand > capacity && report.feasible) {
            report.feasible = false;
            report.witness_violation = subset();
        }
        if (demand >= capacity && report.strict) {
            report.strict = false;
            report.strict_violation = subset();
        }
    }
    return report;
}

namespace detail {

// Dinic on the bipartite network source -> users (alpha) -> resources (inf on
// graph edges) -> sink (beta). Small integer capacities, exact.
class MaxFlow {
  public:
    explicit MaxFlow(int nodes) : head_(nodes, -1), level_(nodes), iter_(nodes) {}

    void add_edge(int a, int b, long long cap) {
        edges_.push_back({b, head_[a], cap});
        head_[a] = static_cast<int>(edges_.size()) - 1;
        edges_.push_back({a, head_[b], 0});
        head_[b] = static_cast<int>(edges_.size()) - 1;
    }

    long long run(int s, int t) {
        long long flow = 0;
        while (bfs(s, t)) {
            iter_ = head_;
            long long f;
            while ((f = dfs(s, t, kInf)) > 0) flow += f;
        }
        return flow;
    }

    // After run: true iff `v` is reachable from the source in the residual.
    bool source_side(int v) const { return level_[v] >= 0; }

    static constexpr long long kInf = 1LL << 60;

  private:
    struct Edge { int to; int next; long long cap; };

    bool bfs(int s, int t) {
        std::fill(level_.begin(), level_.end(), -1);
        std::queue<int> q;
        level_[s] = 0;
        q.push(s);
        while (!q.empty()) {
            int v = q.front();
            q.pop();
            for (int e = head_[v]; e >= 0; e = edges_[e].next) {
                if (edges_[e].cap > 0 && level_[edges_[e].to] < 0) {
                    level_[edges_[e].to] = level_[v] + 1;
                    q.push(edges_[e].to);
                }
            }
        }
        return level_[t] >= 0;
    }

    long long dfs(int v, int t, long long limit) {
        if (v == t) return limit;
        for (int& e = iter_[v]; e >= 0; e = edges_[e].next) {
            Edge& ed = edges_[e];
            if (ed.cap > 0 && level_[ed.to] == level_[v] + 1) {
                const long long d = dfs(ed.to, t, std::min(limit, ed.cap));
                if (d > 0) {
                    ed.cap -= d;
                    edges_[e ^ 1].cap += d;
                    return d;
                }
            }
        }
        return 0;
    }

    std::vector<Edge> edges_;
    std::vector<int> head_, level_, iter_;
};

}  // namespace detail

/// Polynomial feasibility oracle: max flow equals total demand iff the Hall
/// condition holds. On failure the min cut yields a violating subset. Does
/// not evaluate the strict condition.
inline FeasibilityReport hall_check_maxflow(const Instance& inst) {
    const int n = inst.n;
    const int source = 2 * n, sink = 2 * n + 1;
    detail::MaxFlow net(2 * n + 2);
    for (int x = 0; x < n; ++x) {
        net.add_edge(source, x, inst.alpha[x]);
        for (int y : inst.out[x]) net.add_edge(x, n + y, detail::MaxFlow::kInf);
    }
    for (int y = 0; y < n; ++y) net.add_edge(n + y, sink, inst.beta[y]);

    const long long flow = net.run(source, sink);
    FeasibilityReport report;
    report.feasible = flow == inst.total_alpha();
    if (!report.feasible) {
        std::vector<int> witness;
        for (int x = 0; x < n; ++x)
            if (net.source_side(x)) witness.push_back(x);
        report.witness_violation = std::move(witness);
    }
    return report;
}

/// For homogeneous alpha=a, beta=b with a <= b: the allocation W^sigma that
/// sends each unit's whole demand to a distinct matched neighbor. Augmenting
/// path search on the derived bipartite graph.
inline std::optional<AllocationMatrix> matching_allocation(const Instance& inst) {
    if (!inst.homogeneous_alpha() || !inst.homogeneous_beta()) return std::nullopt;
    if (inst.n == 0) return AllocationMatrix(0);
    const int a = inst.alpha[0], b = inst.beta[0];
    if (a > b) return std::nullopt;
    if (a == 0) return AllocationMatrix(inst.n);

    std::vector<int> match_of(static_cast<std::size_t>(inst.n), -1);  // resource -> user
    std::vector<char> visited;
    auto augment = [&](auto&& self, int x) -> bool {
        for (int y : inst.out[x]) {
            if (visited[y]) continue;
            visited[y] = 1;
            if (match_of[y] < 0 || self(self, match_of[y])) {
                match_of[y] = x;
                return true;
            }
        }
        return false;
    };
    for (int x = 0; x < inst.n; ++x) {
        visited.assign(static_cast<std::size_t>(inst.n), 0);
        if (!augment(augment, x)) return std::nullopt;
    }
    AllocationMatrix w(inst.n);
    for (int y = 0; y < inst.n; ++y)
        if (match_of[y] >= 0) w.add(match_of[y], y, a);
    return w;
}

/// W_xy = (a/s) A_xy on an undirected s-regular graph when s divides a.
inline std::optional<AllocationMatrix> diffused_allocation(const Instance& inst) {
    if (!inst.homogeneous_alpha() || !inst.homogeneous_beta()) return std::nullopt;
    if (inst.n == 0) return AllocationMatrix(0);
    const int a = inst.alpha[0], b = inst.beta[0];
    const int s = inst.regular_degree();
    if (s < 0 || a > b) return std::nullopt;
    if (a == 0) return AllocationMatrix(inst.n);
    if (s == 0 || a % s != 0) return std::nullopt;
    AllocationMatrix w(inst.n);
    const int share = a / s;
    for (int x = 0; x < inst.n; ++x)
        for (int y : inst.out[x]) w.add(x, y, share);
    if (!validate_partial(inst, w)) return std::nullopt;
    return w;
}

/// Degree-based sufficient condition: max demand per unit at most
/// min capacity scaled by d_min/d^-_max. Implies feasibility.
inline bool sufficient_condition(const Instance& inst) {
    if (inst.n == 0) return true;
    const int a_max = *std::max_element(inst.alpha.begin(), inst.alpha.end());
    if (a_max == 0) return true;
    const int b_min = *std::min_element(inst.beta.begin(), inst.beta.end());
    int d_min = inst.n, d_in_max = 0;
    for (int x = 0; x < inst.n; ++x) {
        d_min = std::min(d_min, inst.out_degree(x));
        d_in_max = std::max(d_in_max, inst.in_degree(x));
    }
    if (d_in_max == 0) return false;  // demand exists but no edges at all
    return static_cast<long long>(a_max) * d_in_max <= static_cast<long long>(b_min) * d_min;
}

}  // namespace storalloc
