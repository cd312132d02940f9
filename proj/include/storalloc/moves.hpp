#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "storalloc/allocation.hpp"
#include "storalloc/errors.hpp"
#include "storalloc/instance.hpp"

namespace storalloc {

enum class FamilyKind { full, single_resource, granular };

/// An admissible move family M_x(W, xi). Granular moves amounts drawn from a
/// fixed set Q (which must contain 1); SingleResource allows any feasible
/// amount; Full allows arbitrary row rewrites and is gated to tiny rows.
struct MoveFamily {
    FamilyKind kind = FamilyKind::granular;
    std::vector<int> amounts{1};  // Q, sorted ascending; granular only

    static MoveFamily granular(std::vector<int> q) {
        std::sort(q.begin(), q.end());
        q.erase(std::unique(q.begin(), q.end()), q.end());
        if (q.empty() || q.front() < 1)
            throw ConfigError("move family: Q must contain positive amounts");
        if (!std::binary_search(q.begin(), q.end(), 1))
            throw ConfigError("move family: Q must contain 1");
        MoveFamily f;
        f.kind = FamilyKind::granular;
        f.amounts = std::move(q);
        return f;
    }
    static MoveFamily single_resource() { return MoveFamily{FamilyKind::single_resource, {}}; }
    static MoveFamily full() { return MoveFamily{FamilyKind::full, {}}; }
};

enum class MoveKind { allocation, distribution, full_row };

/// One admissible modification of the actor's row. Allocation adds `amount`
/// new atoms at `to`; distribution relocates `amount` atoms from `from` to
/// `to`; full_row replaces the entire row.
struct Move {
    int actor = -1;
    MoveKind kind = MoveKind::allocation;
    int from = -1;
    int to = -1;
    int amount = 0;
    std::vector<int> row;  // full_row replacement, length n

    long long mass_delta() const {
        return kind == MoveKind::allocation ? amount : 0;  // full_row handled by caller
    }
};

struct MoveUndo {
    Move move;
    std::vector<int> old_row;  // full_row only
};

/// Applies `m` to `w`; the returned record reverses it exactly.
inline MoveUndo apply_move(AllocationMatrix& w, const Move& m) {
    MoveUndo undo{m, {}};
    switch (m.kind) {
        case MoveKind::allocation:
            w.add(m.actor, m.to, m.amount);
            break;
        case MoveKind::distribution:
            w.add(m.actor, m.from, -m.amount);
            w.add(m.actor, m.to, m.amount);
            break;
        case MoveKind::full_row:
            undo.old_row = w.row(m.actor);
            w.set_row(m.actor, m.row);
            break;
    }
    return undo;
}

inline void undo_move(AllocationMatrix& w, const MoveUndo& u) {
    switch (u.move.kind) {
        case MoveKind::allocation:
            w.add(u.move.actor, u.move.to, -u.move.amount);
            break;
        case MoveKind::distribution:
            w.add(u.move.actor, u.move.to, -u.move.amount);
            w.add(u.move.actor, u.move.from, u.move.amount);
            break;
        case MoveKind::full_row:
            w.set_row(u.move.actor, u.old_row);
            break;
    }
}

/// N_x(W, xi): neighbor resources that are on and not at capacity.
inline std::vector<int> available_resources(const Instance& inst, const AllocationMatrix& w,
                                            const FunctionalState& xi, int x) {
    std::vector<int> avail;
    for (int y : inst.out[x])
        if (xi[y] && w.col_sum(y) < inst.beta[y]) avail.push_back(y);
    return avail;
}

struct UnitClasses {
    std::vector<int> fully_allocated;  // W^x = alpha_x
    std::vector<int> saturated;        // incomplete and no available resource
    std::vector<int> active;           // everyone else
    bool saturated_state = false;      // W in W_p^sat: active empty, W incomplete
};

/// Partition of the units under W with all units on.
inline UnitClasses classify_units(const Instance& inst, const AllocationMatrix& w) {
    UnitClasses c;
    bool complete = true;
    for (int x = 0; x < inst.n; ++x) {
        if (w.row_sum(x) == inst.alpha[x]) {
            c.fully_allocated.push_back(x);
            continue;
        }
        complete = false;
        bool has_space = false;
        for (int y : inst.out[x])
            if (w.col_sum(y) < inst.beta[y]) { has_space = true; break; }
        (has_space ? c.active : c.saturated).push_back(x);
    }
    c.saturated_state = c.active.empty() && !complete;
    return c;
}

namespace detail {

inline void full_row_candidates(const Instance& inst, const AllocationMatrix& w,
                                const FunctionalState& xi, int actor, std::vector<Move>& out) {
    if (inst.alpha[actor] > 6 || inst.out_degree(actor) > 4)
        throw GuardError("full move family gated to alpha <= 6 and degree <= 4");
    std::vector<int> cols;  // modifiable columns
    std::vector<int> caps;  // max value of the cell given the other rows
    int frozen = 0;         // row mass locked in off columns
    for (int y : inst.out[actor]) {
        if (!xi[y]) { frozen += w.at(actor, y); continue; }
        cols.push_back(y);
        caps.push_back(inst.beta[y] - (w.col_sum(y) - w.at(actor, y)));
    }
    const int budget = inst.alpha[actor] - frozen;
    const int floor_mass = w.row_sum(actor) - frozen;  // row mass may not shrink
    std::vector<int> current = w.row(actor);
    std::vector<int> row = current;
    auto emit = [&](auto&& self, std::size_t i, int used) -> void {
        if (i == cols.size()) {
            if (used < floor_mass) return;
            if (row == current) return;
            Move m;
            m.actor = actor;
            m.kind = MoveKind::full_row;
            m.row = row;
            out.push_back(std::move(m));
            return;
        }
        const int y = cols[i];
        const int hi = std::min(caps[i], budget - used);
        for (int v = 0; v <= hi; ++v) {
            row[y] = v;
            self(self, i + 1, used + v);
        }
        row[y] = current[y];
    };
    emit(emit, 0, 0);
}

}  // namespace detail

/// M_x(W, xi) for the chosen family, in a canonical order: allocations by
/// (target, amount), then distributions by (source, target, amount), then full
/// row rewrites. Every result keeps P1-P3 and never shrinks the actor's row.
inline std::vector<Move> enumerate_moves(const Instance& inst, const MoveFamily& family,
                                         const AllocationMatrix& w, const FunctionalState& xi,
                                         int actor) {
    if (!xi[actor]) throw std::invalid_argument("enumerate_moves: actor is off");
    std::vector<Move> out;
    if (family.kind == FamilyKind::full) {
        detail::full_row_candidates(inst, w, xi, actor, out);
        return out;
    }
    const std::vector<int> avail = available_resources(inst, w, xi, actor);
    const int row_free = inst.alpha[actor] - w.row_sum(actor);
    // allocation moves
    for (int y : avail) {
        const int cap = std::min(row_free, inst.beta[y] - w.col_sum(y));
        if (family.kind == FamilyKind::granular) {
            for (int n : family.amounts) {
                if (n > cap) break;
                out.push_back(Move{actor, MoveKind::allocation, -1, y, n, {}});
            }
        } else {
            for (int n = 1; n <= cap; ++n)
                out.push_back(Move{actor, MoveKind::allocation, -1, y, n, {}});
        }
    }
    // distribution moves
    for (int from : inst.out[actor]) {
        const int held = w.at(actor, from);
        if (held <= 0 || !xi[from]) continue;
        for (int to : avail) {
            if (to == from) continue;
            const int cap = std::min(held, inst.beta[to] - w.col_sum(to));
            if (family.kind == FamilyKind::granular) {
                for (int n : family.amounts) {
                    if (n > cap) break;
                    out.push_back(Move{actor, MoveKind::distribution, from, to, n, {}});
                }
            } else {
                for (int n = 1; n <= cap; ++n)
                    out.push_back(Move{actor, MoveKind::distribution, from, to, n, {}});
            }
        }
    }
    return out;
}

}  // namespace storalloc
