#include "catch_amalgamated.hpp"

#include "helpers.hpp"
#include "storalloc/dynamics.hpp"

using namespace storalloc;
using namespace test_helpers;

namespace {

SimConfig protocol_schedule(const Instance& inst, double horizon, std::uint64_t seed,
                         double gamma0 = 1.0) {
    SimConfig cfg;
    cfg.nu_on.assign(inst.n, 1.0);
    cfg.nu_off.assign(inst.n, 0.0);
    cfg.nu_act.assign(inst.n, 1.0 / inst.n);
    cfg.gamma0 = gamma0;
    cfg.gamma_increment = 1e-5;
    cfg.horizon = horizon;
    cfg.move_family = MoveFamily::granular({1});
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("gamma_at") {
    SimConfig cfg;
    cfg.gamma0 = 1.0;
    cfg.gamma_increment = 1e-5;
    CHECK(gamma_at(cfg, 100000.0) == Catch::Approx(2.0));
    CHECK(gamma_at(cfg, 0.0) == 1.0);
    cfg.gamma_increment = 0.0;
    CHECK(gamma_at(cfg, 1e9) == 1.0);
}

TEST_CASE("discrete engine basics") {
    const Instance inst = five_cycle();
    const PotentialSpec spec = PotentialSpec::uniform(5, 57.0, 3.0, 1.0);
    SECTION("zero horizon leaves the state untouched") {
        SimConfig cfg = protocol_schedule(inst, 0.0, 11);
        AllocationMatrix w(5);
        const Trace trace = run_discrete(inst, spec, cfg, w);
        CHECK(trace.events.empty());
        CHECK(w == AllocationMatrix(5));
    }
    SECTION("invalid W0 is rejected") {
        SimConfig cfg = protocol_schedule(inst, 10.0, 11);
        AllocationMatrix w(5);
        w.add(0, 1, 1);  // 0-1 is an edge, but overfill column 1: beta_1 = 2
        w.add(0, 1, 2);
        CHECK_FALSE(validate_partial(inst, w));
        CHECK_THROWS_AS(run_discrete(inst, spec, cfg, w), std::invalid_argument);
    }
    SECTION("P1-P3 hold after every event and mass only grows") {
        // gamma0 = 0.1: noisy enough to escape the saturated partial-Nash traps
        SimConfig cfg = protocol_schedule(inst, 300.0, 5, 0.1);
        AllocationMatrix w(5);
        long long last_mass = 0;
        long long alloc_mass = 0;
        const Trace trace = run_discrete(
            inst, spec, cfg, w,
            [&](const TraceEvent& ev, const AllocationMatrix& state) {
                REQUIRE(validate_partial(inst, state));
                REQUIRE(ev.mass_after >= last_mass);
                if (ev.moved && ev.move_kind == MoveKind::allocation) {
                    REQUIRE(ev.mass_after == last_mass + ev.amount);
                    alloc_mass += ev.amount;
                } else {
                    REQUIRE(ev.mass_after == last_mass);
                }
                last_mass = ev.mass_after;
            });
        CHECK(trace.steps == 300);
        CHECK(alloc_mass == w.total());
        // this horizon suffices to complete this instance
        CHECK(w.is_complete(inst));
    }
    SECTION("per-unit move counts add up") {
        SimConfig cfg = protocol_schedule(inst, 200.0, 3);
        AllocationMatrix w(5);
        const Trace trace = run_discrete(inst, spec, cfg, w);
        long long from_events = 0;
        for (const TraceEvent& ev : trace.events)
            if (ev.moved) ++from_events;
        long long from_counts = 0;
        for (long long c : trace.per_unit_moves) from_counts += c;
        CHECK(from_events == from_counts);
    }
    SECTION("identical seeds give identical traces") {
        SimConfig cfg = protocol_schedule(inst, 150.0, 77);
        AllocationMatrix w1(5), w2(5);
        const Trace a = run_discrete(inst, spec, cfg, w1);
        const Trace b = run_discrete(inst, spec, cfg, w2);
        REQUIRE(a.events.size() == b.events.size());
        CHECK(w1 == w2);
        for (std::size_t i = 0; i < a.events.size(); ++i) {
            CHECK(a.events[i].actor == b.events[i].actor);
            CHECK(a.events[i].mass_after == b.events[i].mass_after);
        }
    }
    SECTION("tracked psi matches scratch recomputation at the end") {
        SimConfig cfg = protocol_schedule(inst, 250.0, 9);
        AllocationMatrix w(5);
        const Trace trace = run_discrete(inst, spec, cfg, w);
        REQUIRE_FALSE(trace.events.empty());
        const double tracked = trace.events.back().psi_after;
        const double scratch = psi(inst, spec, w);
        CHECK_THAT(tracked, Catch::Matchers::WithinRel(scratch, 1e-9));
    }
}

TEST_CASE("continuous engine basics") {
    const Instance inst = make_cycle(4, 2, 3);
    const PotentialSpec spec = PotentialSpec::uniform(4, 21.0, 1.0, 1.0);
    SECTION("all clocks zero and everyone off: no events at all") {
        SimConfig cfg;
        cfg.nu_on.assign(4, 0.0);
        cfg.nu_off.assign(4, 0.0);
        cfg.nu_act.assign(4, 0.0);
        cfg.horizon = 100.0;
        AllocationMatrix w(4);
        const Trace trace = run_continuous(inst, spec, cfg, w, FunctionalState(4, 0));
        CHECK(trace.events.empty());
    }
    SECTION("nu_off zero keeps everyone on for the whole trace") {
        SimConfig cfg;
        cfg.nu_on.assign(4, 1.0);
        cfg.nu_off.assign(4, 0.0);
        cfg.nu_act.assign(4, 1.0);
        cfg.horizon = 50.0;
        cfg.seed = 4;
        AllocationMatrix w(4);
        const Trace trace = run_continuous(inst, spec, cfg, w, all_on(4));
        for (const TraceEvent& ev : trace.events) CHECK(ev.kind == EventKind::activate);
    }
    SECTION("on/off churn flips the functional state only") {
        SimConfig cfg;
        cfg.nu_on.assign(4, 2.0);
        cfg.nu_off.assign(4, 2.0);
        cfg.nu_act.assign(4, 0.0);
        cfg.horizon = 20.0;
        cfg.seed = 8;
        AllocationMatrix w(4);
        const Trace trace = run_continuous(inst, spec, cfg, w, all_on(4));
        REQUIRE_FALSE(trace.events.empty());
        for (const TraceEvent& ev : trace.events) {
            CHECK(ev.kind != EventKind::activate);
            CHECK(ev.mass_after == 0);
        }
    }
    SECTION("event times are increasing and within the horizon") {
        SimConfig cfg;
        cfg.nu_on.assign(4, 1.0);
        cfg.nu_off.assign(4, 0.5);
        cfg.nu_act.assign(4, 1.0);
        cfg.horizon = 30.0;
        cfg.seed = 15;
        AllocationMatrix w(4);
        const Trace trace = run_continuous(inst, spec, cfg, w, all_on(4));
        double last = 0.0;
        for (const TraceEvent& ev : trace.events) {
            CHECK(ev.t >= last);
            CHECK(ev.t <= 30.0);
            last = ev.t;
        }
    }
}

TEST_CASE("once complete, the allocation set is invariant without churn") {
    const Instance inst = make_complete(3, 2, 3);
    const PotentialSpec spec = PotentialSpec::uniform(3, 15.0, -1.0, 1.0);
    SimConfig cfg = protocol_schedule(inst, 400.0, 21);
    AllocationMatrix w(3);
    bool was_complete = false;
    run_discrete(inst, spec, cfg, w,
                 [&](const TraceEvent&, const AllocationMatrix& state) {
                     const bool complete = state.is_complete(inst);
                     if (was_complete) REQUIRE(complete);
                     was_complete = complete;
                 });
    CHECK(was_complete);
}

TEST_CASE("finite-time full allocation over 1000 seeded continuous runs") {
    // n=5 instance; horizon far beyond the mixing scale at gamma0 = 0.1
    const Instance inst = five_cycle();
    const PotentialSpec spec = PotentialSpec::uniform(5, 57.0, 3.0, 1.0);
    int completed = 0;
    for (int seed = 0; seed < 1000; ++seed) {
        SimConfig cfg;
        cfg.nu_on.assign(5, 1.0);
        cfg.nu_off.assign(5, 0.0);
        cfg.nu_act.assign(5, 1.0);
        cfg.gamma0 = 0.1;
        cfg.gamma_increment = 1e-5;
        cfg.horizon = 200.0;
        cfg.move_family = MoveFamily::granular({1});
        cfg.seed = static_cast<std::uint64_t>(seed);
        AllocationMatrix w(5);
        run_continuous(inst, spec, cfg, w, all_on(5), {}, /*record_events=*/false);
        if (w.is_complete(inst)) ++completed;
    }
    CHECK(completed == 1000);
}

TEST_CASE("engines run the full move family through the reference law") {
    const Instance inst = make_cycle(4, 2, 3);
    const PotentialSpec spec = PotentialSpec::uniform(4, 21.0, -1.0, 1.0);
    SimConfig cfg;
    cfg.nu_on.assign(4, 1.0);
    cfg.nu_off.assign(4, 0.0);
    cfg.nu_act.assign(4, 0.25);
    cfg.gamma0 = 0.5;
    cfg.gamma_increment = 1e-5;
    cfg.horizon = 120.0;
    cfg.move_family = MoveFamily::full();
    cfg.seed = 31;
    AllocationMatrix w(4);
    long long last_mass = 0;
    run_discrete(inst, spec, cfg, w,
                 [&](const TraceEvent& ev, const AllocationMatrix& state) {
                     REQUIRE(validate_partial(inst, state));
                     REQUIRE(ev.mass_after >= last_mass);
                     last_mass = ev.mass_after;
                 });
    CHECK(w.is_complete(inst));
}

TEST_CASE("at gamma = 1 the saturated partial Nash state is a long-lived trap") {
    // The saturated partial Nash state of the 5-cycle instance: every escape
    // move costs at least 12 utility units, so its selection probability at
    // gamma = 1 is below e^{-12} and the annealed run cannot leave within 10 T.
    const Instance inst = five_cycle();
    const PotentialSpec spec = PotentialSpec::uniform(5, 57.0, 3.0, 1.0);
    const AllocationMatrix w = five_cycle_partial();
    const FunctionalState xi = all_on(5);
    for (int actor = 0; actor < 5; ++actor) {
        const auto dist = gibbs_distribution(inst, spec, MoveFamily::granular({1}), w, xi,
                                             actor, 1.0);
        for (std::size_t i = 0; i < dist.probs.size(); ++i) {
            CHECK(utility_delta(inst, spec, w, dist.moves[i]) <= -12.0);
            CHECK(dist.probs[i] < 1e-5);
        }
        CHECK(dist.stay_probability > 1.0 - 1e-4);
    }
}
