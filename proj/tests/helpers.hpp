#pragma once

#include <utility>
#include <vector>

#include "storalloc/allocation.hpp"
#include "storalloc/instance.hpp"
#include "storalloc/rng.hpp"

namespace test_helpers {

using namespace storalloc;

// Five units on an undirected ring with heterogeneous capacities:
// alpha = 4 everywhere, beta = (7, 2, 4, 6, 6).
inline Instance five_cycle() { return make_cycle(5, 4, std::vector<int>{7, 2, 4, 6, 6}); }

// Two reference states of it, labelled by computed row sums: the first is a
// complete allocation, the second is partial (unit 1's row sums to 3) with
// unit 1 saturated. Both are Nash equilibria under strong aggregation.
inline AllocationMatrix five_cycle_complete() {
    return matrix_from_rows({{0, 0, 0, 0, 4},
                             {3, 0, 1, 0, 0},
                             {0, 0, 0, 4, 0},
                             {0, 0, 3, 0, 1},
                             {4, 0, 0, 0, 0}});
}

inline AllocationMatrix five_cycle_partial() {
    return matrix_from_rows({{0, 0, 0, 0, 4},
                             {3, 0, 0, 0, 0},
                             {0, 0, 0, 4, 0},
                             {0, 0, 4, 0, 0},
                             {4, 0, 0, 0, 0}});
}

// The three allocation states of the 3-unit example (alpha = 2, complete graph).
inline AllocationMatrix w1_matching() { return matrix_from_rows({{0, 2, 0}, {0, 0, 2}, {2, 0, 0}}); }
inline AllocationMatrix w2_matching() { return matrix_from_rows({{0, 0, 2}, {2, 0, 0}, {0, 2, 0}}); }
inline AllocationMatrix w3_diffused() { return matrix_from_rows({{0, 1, 1}, {1, 0, 1}, {1, 1, 0}}); }

struct RandomInstanceOptions {
    int n_min = 2, n_max = 4;
    int alpha_max = 2, beta_max = 3;
    bool undirected = true;
    double edge_prob = 0.7;
};

inline Instance random_instance(std::mt19937_64& rng, const RandomInstanceOptions& opt = {}) {
    const int n = opt.n_min + static_cast<int>(rand_index(
                                  rng, static_cast<std::uint64_t>(opt.n_max - opt.n_min + 1)));
    std::vector<std::pair<int, int>> edges;
    for (int x = 0; x < n; ++x) {
        for (int y = opt.undirected ? x + 1 : 0; y < n; ++y) {
            if (x == y) continue;
            if (rand_u01(rng) < opt.edge_prob) {
                edges.emplace_back(x, y);
                if (opt.undirected) edges.emplace_back(y, x);
            }
        }
    }
    std::vector<int> alpha(n), beta(n);
    for (int x = 0; x < n; ++x) {
        alpha[x] = static_cast<int>(rand_index(rng, opt.alpha_max + 1));
        beta[x] = static_cast<int>(rand_index(rng, opt.beta_max + 1));
    }
    return Instance::from_edges(n, edges, alpha, beta);
}

// A random partial allocation built by a greedy sequence of random feasible
// placements; uniform it is not, but it covers the space well.
inline AllocationMatrix random_partial_state(std::mt19937_64& rng, const Instance& inst) {
    AllocationMatrix w(inst.n);
    const int rounds = static_cast<int>(rand_index(rng, 3 * inst.n + 1));
    for (int k = 0; k < rounds; ++k) {
        const int x = static_cast<int>(rand_index(rng, inst.n));
        if (inst.out[x].empty()) continue;
        const int y = inst.out[x][rand_index(rng, inst.out[x].size())];
        const int cap = std::min(inst.alpha[x] - w.row_sum(x), inst.beta[y] - w.col_sum(y));
        if (cap <= 0) continue;
        w.add(x, y, 1 + static_cast<int>(rand_index(rng, cap)));
    }
    return w;
}

// A random alternative row for `x` that keeps P1-P3 given the other rows.
inline std::vector<int> random_feasible_row(std::mt19937_64& rng, const Instance& inst,
                                            const AllocationMatrix& w, int x) {
    std::vector<int> row(static_cast<std::size_t>(inst.n), 0);
    int budget = inst.alpha[x];
    for (int y : inst.out[x]) {
        const int cap = std::min(budget, inst.beta[y] - (w.col_sum(y) - w.at(x, y)));
        if (cap <= 0) continue;
        const int v = static_cast<int>(rand_index(rng, cap + 1));
        row[y] = v;
        budget -= v;
    }
    return row;
}

}  // namespace test_helpers
