#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "storalloc/sampler.hpp"

namespace storalloc {

enum class Engine { discrete, continuous };

struct SimConfig {
    std::vector<double> nu_on, nu_off, nu_act;  // per-unit Poisson clock rates
    Engine engine = Engine::discrete;
    double gamma0 = 1.0;
    double gamma_increment = 1e-5;  // per step (discrete) / per time unit (continuous)
    double horizon = 0.0;           // steps or time
    MoveFamily move_family = MoveFamily::granular({1});
    std::uint64_t seed = 0;
};

inline double gamma_at(const SimConfig& cfg, double t) {
    return cfg.gamma0 + cfg.gamma_increment * t;
}

enum class EventKind { turn_on, turn_off, activate };

struct TraceEvent {
    double t = 0.0;
    EventKind kind = EventKind::activate;
    int actor = -1;
    bool moved = false;           // activation chose a move rather than stay
    MoveKind move_kind = MoveKind::allocation;
    int from = -1, to = -1, amount = 0;
    long long mass_after = 0;
    double psi_after = 0.0;
};

struct Trace {
    std::vector<TraceEvent> events;
    std::vector<long long> per_unit_moves;  // m_x: allocation + distribution moves by x
    long long steps = 0;
    double end_time = 0.0;
};

/// Called after every event with the event record and the current state.
using EventObserver = std::function<void(const TraceEvent&, const AllocationMatrix&)>;

/// Discrete-time engine: `horizon` steps, one uniformly random unit activates
/// per step, all units on, gamma advances by the increment after each step.
/// With equal activation rates this is the uniformized chain of the
/// continuous process, so long-run occupation frequencies match it.
/// `w` is mutated in place; on return it holds the terminal state.
inline Trace run_discrete(const Instance& inst, const PotentialSpec& spec, const SimConfig& cfg,
                          AllocationMatrix& w, const EventObserver& observer = {},
                          bool record_events = true) {
    if (!validate_partial(inst, w))
        throw std::invalid_argument("run_discrete: W0 violates P1-P3");
    FunctionalState xi = all_on(inst.n);
    auto rng = make_rng(cfg.seed);
    Trace trace;
    trace.per_unit_moves.assign(static_cast<std::size_t>(inst.n), 0);
    const long long steps = static_cast<long long>(cfg.horizon);
    if (record_events) trace.events.reserve(static_cast<std::size_t>(std::min(steps, 1LL << 22)));
    double psi_now = psi(inst, spec, w);
    int refresh_countdown = 4096;

    for (long long step = 0; step < steps; ++step) {
        const double gamma = gamma_at(cfg, static_cast<double>(step));
        const int actor = static_cast<int>(rand_index(rng, static_cast<std::uint64_t>(inst.n)));
        const GibbsDistribution dist =
            gibbs_distribution(inst, spec, cfg.move_family, w, xi, actor, gamma);
        const int pick = sample_action(dist, rng);
        TraceEvent ev;
        ev.t = static_cast<double>(step);
        ev.kind = EventKind::activate;
        ev.actor = actor;
        if (pick >= 0) {
            const Move& m = dist.moves[static_cast<std::size_t>(pick)];
            psi_now += psi_delta(inst, spec, w, m);
            apply_move(w, m);
            if (--refresh_countdown == 0) {
                psi_now = psi(inst, spec, w);
                refresh_countdown = 4096;
            }
            ++trace.per_unit_moves[actor];
            ev.moved = true;
            ev.move_kind = m.kind;
            ev.from = m.from;
            ev.to = m.to;
            ev.amount = m.amount;
        }
        ev.mass_after = w.total();
        ev.psi_after = psi_now;
        if (record_events) trace.events.push_back(ev);
        if (observer) observer(ev, w);
        ++trace.steps;
    }
    trace.end_time = static_cast<double>(steps);
    return trace;
}

/// Continuous-time engine: exponential race over the on/off/activation
/// clocks with the transition rates of the augmented process. gamma advances
/// with physical time. `w` is mutated in place.
inline Trace run_continuous(const Instance& inst, const PotentialSpec& spec, const SimConfig& cfg,
                            AllocationMatrix& w, const FunctionalState& xi0,
                            const EventObserver& observer = {}, bool record_events = true) {
    if (!validate_partial(inst, w))
        throw std::invalid_argument("run_continuous: W0 violates P1-P3");
    FunctionalState xi = xi0;
    auto rng = make_rng(cfg.seed);
    Trace trace;
    trace.per_unit_moves.assign(static_cast<std::size_t>(inst.n), 0);
    double t = 0.0;
    double psi_now = psi(inst, spec, w);
    int refresh_countdown = 4096;

    while (true) {
        double total_rate = 0.0;
        for (int x = 0; x < inst.n; ++x)
            total_rate += xi[x] ? cfg.nu_off[x] + cfg.nu_act[x] : cfg.nu_on[x];
        if (total_rate <= 0.0) break;
        t += rand_exponential(rng, total_rate);
        if (t > cfg.horizon) break;

        double pick = rand_u01(rng) * total_rate;
        int actor = -1;
        bool is_activation = false;
        int last_actor = -1;
        bool last_was_activation = false;
        for (int x = 0; x < inst.n && actor < 0; ++x) {
            if (xi[x]) {
                if (cfg.nu_off[x] > 0.0) {
                    last_actor = x;
                    last_was_activation = false;
                    if ((pick -= cfg.nu_off[x]) < 0.0) actor = x;
                }
                if (actor < 0 && cfg.nu_act[x] > 0.0) {
                    last_actor = x;
                    last_was_activation = true;
                    if ((pick -= cfg.nu_act[x]) < 0.0) {
                        actor = x;
                        is_activation = true;
                    }
                }
            } else if (cfg.nu_on[x] > 0.0) {
                last_actor = x;
                last_was_activation = false;
                if ((pick -= cfg.nu_on[x]) < 0.0) actor = x;
            }
        }
        if (actor < 0) {  // rounding at the top edge: take the last live clock
            actor = last_actor;
            is_activation = last_was_activation;
        }

        TraceEvent ev;
        ev.t = t;
        ev.actor = actor;
        if (!is_activation) {
            xi[actor] ^= 1;
            ev.kind = xi[actor] ? EventKind::turn_on : EventKind::turn_off;
        } else {
            ev.kind = EventKind::activate;
            const GibbsDistribution dist =
                gibbs_distribution(inst, spec, cfg.move_family, w, xi, actor, gamma_at(cfg, t));
            const int k = sample_action(dist, rng);
            if (k >= 0) {
                const Move& m = dist.moves[static_cast<std::size_t>(k)];
                psi_now += psi_delta(inst, spec, w, m);
                apply_move(w, m);
                if (--refresh_countdown == 0) {
                    psi_now = psi(inst, spec, w);
                    refresh_countdown = 4096;
                }
                ++trace.per_unit_moves[actor];
                ev.moved = true;
                ev.move_kind = m.kind;
                ev.from = m.from;
                ev.to = m.to;
                ev.amount = m.amount;
            }
        }
        ev.mass_after = w.total();
        ev.psi_after = psi_now;
        if (record_events) trace.events.push_back(ev);
        if (observer) observer(ev, w);
        ++trace.steps;
    }
    trace.end_time = std::min(t, cfg.horizon);
    return trace;
}

}  // namespace storalloc
