#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "storalloc/errors.hpp"
#include "storalloc/rng.hpp"

namespace storalloc {

/// A unit is both a user (demands alpha atoms of backup) and a resource
/// (offers beta atoms of storage). Edge (x,y) means x may store data in y.
struct Instance {
    int n = 0;
    std::vector<int> alpha;                // demand per unit
    std::vector<int> beta;                 // capacity per unit
    std::vector<std::vector<int>> out;     // out-neighborhoods N_x, sorted
    std::vector<std::vector<int>> in;      // in-neighborhoods N^-_y, sorted

    bool has_edge(int x, int y) const { return adj_[static_cast<std::size_t>(x) * n + y] != 0; }
    int out_degree(int x) const { return static_cast<int>(out[x].size()); }
    int in_degree(int y) const { return static_cast<int>(in[y].size()); }

    long long total_alpha() const {
        return std::accumulate(alpha.begin(), alpha.end(), 0LL);
    }
    long long total_beta() const {
        return std::accumulate(beta.begin(), beta.end(), 0LL);
    }

    bool homogeneous_alpha() const {
        return std::adjacent_find(alpha.begin(), alpha.end(), std::not_equal_to<>()) == alpha.end();
    }
    bool homogeneous_beta() const {
        return std::adjacent_find(beta.begin(), beta.end(), std::not_equal_to<>()) == beta.end();
    }

    bool symmetric() const {
        for (int x = 0; x < n; ++x)
            for (int y : out[x])
                if (!has_edge(y, x)) return false;
        return true;
    }

    // Degree s if the graph is undirected and s-regular, -1 otherwise.
    int regular_degree() const {
        if (n == 0) return -1;
        const int s = out_degree(0);
        for (int x = 0; x < n; ++x)
            if (out_degree(x) != s || in_degree(x) != s) return -1;
        return symmetric() ? s : -1;
    }

    static Instance from_edges(int n, const std::vector<std::pair<int, int>>& edges,
                               std::vector<int> alpha, std::vector<int> beta) {
        if (n < 0) throw ConfigError("instance: n must be non-negative");
        if (static_cast<int>(alpha.size()) != n || static_cast<int>(beta.size()) != n)
            throw ConfigError("instance: alpha/beta size must equal n");
        for (int x = 0; x < n; ++x)
            if (alpha[x] < 0 || beta[x] < 0)
                throw ConfigError("instance: alpha/beta must be non-negative");
        Instance g;
        g.n = n;
        g.alpha = std::move(alpha);
        g.beta = std::move(beta);
        g.out.assign(n, {});
        g.in.assign(n, {});
        g.adj_.assign(static_cast<std::size_t>(n) * n, 0);
        for (auto [x, y] : edges) {
            if (x < 0 || x >= n || y < 0 || y >= n)
                throw ConfigError("instance: edge endpoint out of range");
            if (x == y) throw ConfigError("instance: self-loop (" + std::to_string(x) + ") not allowed");
            auto& cell = g.adj_[static_cast<std::size_t>(x) * n + y];
            if (cell) continue;  // duplicate edge, keep one
            cell = 1;
            g.out[x].push_back(y);
            g.in[y].push_back(x);
        }
        for (auto& v : g.out) std::sort(v.begin(), v.end());
        for (auto& v : g.in) std::sort(v.begin(), v.end());
        return g;
    }

  private:
    std::vector<std::uint8_t> adj_;
};

inline std::vector<int> uniform_vec(int n, int value) { return std::vector<int>(static_cast<std::size_t>(n), value); }

inline Instance make_complete(int n, int a, int b) {
    std::vector<std::pair<int, int>> edges;
    for (int x = 0; x < n; ++x)
        for (int y = 0; y < n; ++y)
            if (x != y) edges.emplace_back(x, y);
    return Instance::from_edges(n, edges, uniform_vec(n, a), uniform_vec(n, b));
}

inline Instance make_cycle(int n, int a, std::vector<int> beta) {
    std::vector<std::pair<int, int>> edges;
    for (int x = 0; x < n; ++x) {
        int y = (x + 1) % n;
        edges.emplace_back(x, y);
        edges.emplace_back(y, x);
    }
    return Instance::from_edges(n, edges, uniform_vec(n, a), std::move(beta));
}

inline Instance make_cycle(int n, int a, int b) { return make_cycle(n, a, uniform_vec(n, b)); }

// Hub is unit 0; every hub-leaf pair is connected in both directions.
inline Instance make_star(int n, int a, int b) {
    std::vector<std::pair<int, int>> edges;
    for (int leaf = 1; leaf < n; ++leaf) {
        edges.emplace_back(0, leaf);
        edges.emplace_back(leaf, 0);
    }
    return Instance::from_edges(n, edges, uniform_vec(n, a), uniform_vec(n, b));
}

/// Random simple d-regular undirected graph by configuration-model stub
/// pairing. Invalid partners (self-loop / multi-edge) are rejected per stub;
/// a dead end restarts the whole pairing. Deterministic per seed.
inline Instance random_regular(int n, int degree, int a, int b, std::uint64_t seed,
                               int max_restarts = 500) {
    if (degree < 0 || degree >= n)
        throw ConfigError("random_regular: need 0 <= degree < n");
    if ((static_cast<long long>(n) * degree) % 2 != 0)
        throw ConfigError("random_regular: n*degree must be even");
    auto rng = make_rng(seed);
    for (int attempt = 0; attempt < max_restarts; ++attempt) {
        std::vector<int> stubs;
        stubs.reserve(static_cast<std::size_t>(n) * degree);
        for (int v = 0; v < n; ++v)
            for (int k = 0; k < degree; ++k) stubs.push_back(v);
        std::set<std::pair<int, int>> used;
        std::vector<std::pair<int, int>> edges;
        bool dead_end = false;
        while (!stubs.empty()) {
            // pick a random stub, then a random valid partner
            std::size_t i = rand_index(rng, stubs.size());
            std::swap(stubs[i], stubs.back());
            int u = stubs.back();
            stubs.pop_back();
            std::vector<std::size_t> candidates;
            for (std::size_t k = 0; k < stubs.size(); ++k) {
                int v = stubs[k];
                if (v != u && !used.count({std::min(u, v), std::max(u, v)}))
                    candidates.push_back(k);
            }
            if (candidates.empty()) { dead_end = true; break; }
            std::size_t k = candidates[rand_index(rng, candidates.size())];
            int v = stubs[k];
            std::swap(stubs[k], stubs.back());
            stubs.pop_back();
            used.insert({std::min(u, v), std::max(u, v)});
            edges.emplace_back(u, v);
            edges.emplace_back(v, u);
        }
        if (!dead_end)
            return Instance::from_edges(n, edges, uniform_vec(n, a), uniform_vec(n, b));
    }
    throw std::runtime_error("random_regular: no simple pairing found after " +
                             std::to_string(max_restarts) + " restarts (n=" + std::to_string(n) +
                             ", degree=" + std::to_string(degree) + ")");
}

/// On/off availability vector; xi[x] != 0 means unit x is on.
using FunctionalState = std::vector<std::uint8_t>;

inline FunctionalState all_on(int n) { return FunctionalState(static_cast<std::size_t>(n), 1); }

}  // namespace storalloc
