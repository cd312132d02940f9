#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "storalloc/moves.hpp"
#include "storalloc/potential.hpp"
#include "storalloc/rng.hpp"

namespace storalloc {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double logsumexp(const std::vector<double>& v) {
    double m = kNegInf;
    for (double x : v) m = std::max(m, x);
    if (m == kNegInf) return kNegInf;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

// Column-local pieces of a move's effect. A distribution move touches two
// distinct columns, so its utility/potential change is the sum of a removal
// term at the source and an addition term at the target.

namespace detail {

inline std::size_t amount_index(const std::vector<int>& q, int n) {
    return static_cast<std::size_t>(std::lower_bound(q.begin(), q.end(), n) - q.begin());
}

inline double add_cost_change(const PotentialSpec& spec, int y, int cell, int col, int n) {
    if (spec.congestion == Congestion::quadratic)
        return -spec.c_con[y] * (2.0 * col * n + static_cast<double>(n) * n);
    return cell == 0 && n > 0 ? -spec.c_con[y] : 0.0;
}

inline double remove_cost_change(const PotentialSpec& spec, int y, int cell, int col, int n) {
    if (spec.congestion == Congestion::quadratic)
        return -spec.c_con[y] * (static_cast<double>(n) * n - 2.0 * col * n);
    return cell == n && n > 0 ? spec.c_con[y] : 0.0;
}

// Reward change from placing n more atoms of `actor` at y. `gated` selects
// whether the congestion term counts (utility: only if y is an in-neighbor of
// the actor; potential: always).
inline double add_term(const Instance& inst, const PotentialSpec& spec, const AllocationMatrix& w,
                       int actor, int y, int n, bool gated) {
    const int cell = w.at(actor, y);
    double d = spec.c_all * n + spec.c_agg * (2.0 * cell * n + static_cast<double>(n) * n);
    if (!gated || inst.has_edge(y, actor)) d += add_cost_change(spec, y, cell, w.col_sum(y), n);
    return d;
}

inline double remove_term(const Instance& inst, const PotentialSpec& spec,
                          const AllocationMatrix& w, int actor, int y, int n, bool gated) {
    const int cell = w.at(actor, y);
    double d = -spec.c_all * n + spec.c_agg * (static_cast<double>(n) * n - 2.0 * cell * n);
    if (!gated || inst.has_edge(y, actor)) d += remove_cost_change(spec, y, cell, w.col_sum(y), n);
    return d;
}

inline double row_change(const Instance& inst, const PotentialSpec& spec,
                         const AllocationMatrix& w, const Move& m, bool gated) {
    // full_row: diff every modified column
    double d = 0.0;
    long long sq_old = 0, sq_new = 0, sum_old = 0, sum_new = 0;
    for (int y = 0; y < inst.n; ++y) {
        const int before = w.at(m.actor, y);
        const int after = m.row[y];
        sum_old += before;
        sum_new += after;
        sq_old += static_cast<long long>(before) * before;
        sq_new += static_cast<long long>(after) * after;
        if (before == after) continue;
        if (gated && !inst.has_edge(y, m.actor)) continue;
        const int col = w.col_sum(y);
        const int delta = after - before;
        if (spec.congestion == Congestion::quadratic) {
            d += -spec.c_con[y] *
                 (2.0 * col * delta + static_cast<double>(delta) * delta);
        } else {
            d += -spec.c_con[y] * ((after > 0 ? 1 : 0) - (before > 0 ? 1 : 0));
        }
    }
    d += spec.c_all * static_cast<double>(sum_new - sum_old);
    d += spec.c_agg * static_cast<double>(sq_new - sq_old);
    return d;
}

}  // namespace detail

/// Psi(W + m) - Psi(W), evaluated in O(1) for allocation/distribution moves.
inline double psi_delta(const Instance& inst, const PotentialSpec& spec, const AllocationMatrix& w,
                        const Move& m) {
    switch (m.kind) {
        case MoveKind::allocation:
            return detail::add_term(inst, spec, w, m.actor, m.to, m.amount, false);
        case MoveKind::distribution:
            return detail::remove_term(inst, spec, w, m.actor, m.from, m.amount, false) +
                   detail::add_term(inst, spec, w, m.actor, m.to, m.amount, false);
        case MoveKind::full_row:
            return detail::row_change(inst, spec, w, m, false);
    }
    return 0.0;
}

/// U_actor(W + m) - U_actor(W), same shape but congestion gated to N^-_actor.
inline double utility_delta(const Instance& inst, const PotentialSpec& spec,
                            const AllocationMatrix& w, const Move& m) {
    switch (m.kind) {
        case MoveKind::allocation:
            return detail::add_term(inst, spec, w, m.actor, m.to, m.amount, true);
        case MoveKind::distribution:
            return detail::remove_term(inst, spec, w, m.actor, m.from, m.amount, true) +
                   detail::add_term(inst, spec, w, m.actor, m.to, m.amount, true);
        case MoveKind::full_row:
            return detail::row_change(inst, spec, w, m, true);
    }
    return 0.0;
}

/// The move-selection law of one activation: candidate moves with their
/// probabilities, and the residual stay probability.
struct GibbsDistribution {
    std::vector<Move> moves;
    std::vector<double> probs;
    double stay_probability = 1.0;
    double gamma = 0.0;
};

/// log of Z^(W,xi)_actor(gamma) = sum over M_actor(W,xi) of e^{gamma U}.
/// Utilities are evaluated from scratch on each candidate state so that the
/// value is bit-identical no matter which side of a move asks for it.
inline double log_partition(const Instance& inst, const PotentialSpec& spec,
                            const MoveFamily& family, const AllocationMatrix& w,
                            const FunctionalState& xi, int actor, double gamma) {
    AllocationMatrix scratch = w;
    const std::vector<Move> moves = enumerate_moves(inst, family, scratch, xi, actor);
    std::vector<double> logits;
    logits.reserve(moves.size());
    for (const Move& m : moves) {
        const MoveUndo u = apply_move(scratch, m);
        logits.push_back(gamma * utility(inst, spec, scratch, actor));
        undo_move(scratch, u);
    }
    return logsumexp(logits);
}

/// Reference evaluation of the move law: allocation moves are weighted
/// e^{gamma U}/Z^(W,xi); mass-preserving moves divide by the larger of the
/// partition sums at W and at the destination, which is what makes the chain
/// on complete allocations reversible. Exact but O(|M|^2).
inline GibbsDistribution gibbs_distribution_reference(const Instance& inst,
                                                      const PotentialSpec& spec,
                                                      const MoveFamily& family,
                                                      const AllocationMatrix& w,
                                                      const FunctionalState& xi, int actor,
                                                      double gamma) {
    if (!xi[actor]) throw std::invalid_argument("gibbs_distribution: actor is off");
    GibbsDistribution dist;
    dist.gamma = gamma;
    AllocationMatrix scratch = w;
    dist.moves = enumerate_moves(inst, family, scratch, xi, actor);
    if (dist.moves.empty()) return dist;

    const long long base_mass = scratch.total();
    std::vector<double> logits(dist.moves.size());
    std::vector<long long> masses(dist.moves.size());
    for (std::size_t i = 0; i < dist.moves.size(); ++i) {
        const MoveUndo u = apply_move(scratch, dist.moves[i]);
        logits[i] = gamma * utility(inst, spec, scratch, actor);
        masses[i] = scratch.total();
        undo_move(scratch, u);
    }
    const double log_z = logsumexp(logits);

    dist.probs.resize(dist.moves.size());
    double total = 0.0;
    for (std::size_t i = 0; i < dist.moves.size(); ++i) {
        double log_den = log_z;
        if (masses[i] == base_mass) {
            const MoveUndo u = apply_move(scratch, dist.moves[i]);
            log_den = std::max(log_z, log_partition(inst, spec, family, scratch, xi, actor, gamma));
            undo_move(scratch, u);
        }
        dist.probs[i] = std::exp(logits[i] - log_den);
        total += dist.probs[i];
    }
    dist.stay_probability = std::max(0.0, 1.0 - total);
    return dist;
}

namespace detail {

// Factored evaluation of log Z(state)/e^{gamma U(state)} for granular
// families. Candidate weights separate into per-column removal/addition
// terms, so the partition sum is a handful of log-sum-exps instead of a
// quadratic enumeration. Buffers are reused across the per-candidate calls.
struct GranularCtx {
    int deg = 0;
    std::vector<int> cols;            // on out-neighbors of the actor
    std::vector<int> cell, col, hr;   // per column: actor's cell, column sum, headroom
    std::vector<double> log_add;      // [q*deg + j], -inf when infeasible
    std::vector<double> log_rem;
    std::vector<double> pre, suf;     // prefix/suffix log-sum-exp scratch
    std::vector<double> terms;

    void fill_column(const Instance& inst, const PotentialSpec& spec, int actor, double gamma,
                     const std::vector<int>& q, int j) {
        const int y = cols[j];
        const bool counts = inst.has_edge(y, actor);
        for (std::size_t k = 0; k < q.size(); ++k) {
            const int n = q[k];
            double a = kNegInf, d = kNegInf;
            if (hr[j] >= n) {
                a = spec.c_all * n + spec.c_agg * (2.0 * cell[j] * n + static_cast<double>(n) * n);
                if (counts) a += add_cost_change(spec, y, cell[j], col[j], n);
                a *= gamma;
            }
            if (cell[j] >= n) {
                d = -spec.c_all * n + spec.c_agg * (static_cast<double>(n) * n - 2.0 * cell[j] * n);
                if (counts) d += remove_cost_change(spec, y, cell[j], col[j], n);
                d *= gamma;
            }
            log_add[k * deg + j] = a;
            log_rem[k * deg + j] = d;
        }
    }

    // log sum over candidate moves of e^{gamma * dU}; allocation block plus
    // source/target pairs with the diagonal excluded via prefix/suffix sums.
    double log_relative_partition(const std::vector<int>& q, int row_free) {
        terms.clear();
        for (std::size_t k = 0; k < q.size(); ++k) {
            const double* a = &log_add[k * deg];
            const double* d = &log_rem[k * deg];
            if (row_free >= q[k])
                for (int j = 0; j < deg; ++j)
                    if (a[j] != kNegInf) terms.push_back(a[j]);
            // pre[j] = lse(a[0..j]), suf[j] = lse(a[j..deg-1])
            pre.assign(deg, kNegInf);
            suf.assign(deg, kNegInf);
            double run = kNegInf;
            for (int j = 0; j < deg; ++j) {
                run = lse2(run, a[j]);
                pre[j] = run;
            }
            run = kNegInf;
            for (int j = deg - 1; j >= 0; --j) {
                run = lse2(run, a[j]);
                suf[j] = run;
            }
            for (int j = 0; j < deg; ++j) {
                if (d[j] == kNegInf) continue;
                const double others = lse2(j > 0 ? pre[j - 1] : kNegInf,
                                           j + 1 < deg ? suf[j + 1] : kNegInf);
                if (others != kNegInf) terms.push_back(d[j] + others);
            }
        }
        return logsumexp(terms);
    }

    static double lse2(double a, double b) {
        if (a == kNegInf) return b;
        if (b == kNegInf) return a;
        const double m = std::max(a, b);
        return m + std::log(std::exp(a - m) + std::exp(b - m));
    }
};

}  // namespace detail

/// Fast path for granular families; identical law to the reference
/// implementation, O(|M| * deg * |Q|) per activation.
inline GibbsDistribution gibbs_distribution_granular(const Instance& inst,
                                                     const PotentialSpec& spec,
                                                     const MoveFamily& family,
                                                     const AllocationMatrix& w,
                                                     const FunctionalState& xi, int actor,
                                                     double gamma) {
    if (!xi[actor]) throw std::invalid_argument("gibbs_distribution: actor is off");
    GibbsDistribution dist;
    dist.gamma = gamma;
    dist.moves = enumerate_moves(inst, family, w, xi, actor);
    if (dist.moves.empty()) return dist;

    const std::vector<int>& q = family.amounts;
    detail::GranularCtx ctx;
    for (int y : inst.out[actor])
        if (xi[y]) ctx.cols.push_back(y);
    ctx.deg = static_cast<int>(ctx.cols.size());
    ctx.cell.resize(ctx.deg);
    ctx.col.resize(ctx.deg);
    ctx.hr.resize(ctx.deg);
    ctx.log_add.assign(q.size() * ctx.deg, kNegInf);
    ctx.log_rem.assign(q.size() * ctx.deg, kNegInf);
    std::vector<int> pos(static_cast<std::size_t>(inst.n), -1);
    for (int j = 0; j < ctx.deg; ++j) {
        const int y = ctx.cols[j];
        pos[y] = j;
        ctx.cell[j] = w.at(actor, y);
        ctx.col[j] = w.col_sum(y);
        ctx.hr[j] = inst.beta[y] - ctx.col[j];
        ctx.fill_column(inst, spec, actor, gamma, q, j);
    }
    const int row_free = inst.alpha[actor] - w.row_sum(actor);
    const double log_t_base = ctx.log_relative_partition(q, row_free);

    dist.probs.resize(dist.moves.size());
    double total = 0.0;
    for (std::size_t i = 0; i < dist.moves.size(); ++i) {
        const Move& m = dist.moves[i];
        const int jt = pos[m.to];
        if (m.kind == MoveKind::allocation) {
            const double logit = ctx.log_add[detail::amount_index(q, m.amount) * ctx.deg + jt];
            dist.probs[i] = std::exp(logit - log_t_base);
        } else {
            const int jf = pos[m.from];
            const std::size_t k = detail::amount_index(q, m.amount);
            const double logit = ctx.log_rem[k * ctx.deg + jf] + ctx.log_add[k * ctx.deg + jt];
            // re-evaluate the two touched columns under the moved state
            const int n = m.amount;
            ctx.cell[jf] -= n; ctx.col[jf] -= n; ctx.hr[jf] += n;
            ctx.cell[jt] += n; ctx.col[jt] += n; ctx.hr[jt] -= n;
            ctx.fill_column(inst, spec, actor, gamma, q, jf);
            ctx.fill_column(inst, spec, actor, gamma, q, jt);
            const double log_t_moved = ctx.log_relative_partition(q, row_free);
            ctx.cell[jf] += n; ctx.col[jf] += n; ctx.hr[jf] -= n;
            ctx.cell[jt] -= n; ctx.col[jt] -= n; ctx.hr[jt] += n;
            ctx.fill_column(inst, spec, actor, gamma, q, jf);
            ctx.fill_column(inst, spec, actor, gamma, q, jt);
            dist.probs[i] = std::exp(logit - std::max(log_t_base, logit + log_t_moved));
        }
        total += dist.probs[i];
    }
    dist.stay_probability = std::max(0.0, 1.0 - total);
    return dist;
}

/// Move-selection law of one activation at inverse noise gamma.
inline GibbsDistribution gibbs_distribution(const Instance& inst, const PotentialSpec& spec,
                                            const MoveFamily& family, const AllocationMatrix& w,
                                            const FunctionalState& xi, int actor, double gamma) {
    if (family.kind == FamilyKind::granular)
        return gibbs_distribution_granular(inst, spec, family, w, xi, actor, gamma);
    return gibbs_distribution_reference(inst, spec, family, w, xi, actor, gamma);
}

/// One categorical draw; returns the index of the chosen move, -1 for stay.
inline int sample_action(const GibbsDistribution& dist, std::mt19937_64& rng) {
    if (dist.moves.empty()) return -1;
    double u = rand_u01(rng);
    for (std::size_t i = 0; i < dist.probs.size(); ++i) {
        u -= dist.probs[i];
        if (u < 0.0) return static_cast<int>(i);
    }
    return -1;
}

}  // namespace storalloc
