#include "catch_amalgamated.hpp"

#include <set>

#include "helpers.hpp"
#include "storalloc/exact.hpp"

using namespace storalloc;
using namespace test_helpers;
using Catch::Matchers::WithinAbs;

namespace {

// the usual exact-analysis instance: 8 complete states
Instance eight_state() { return make_complete(3, 1, 2); }

std::vector<double> uniform_rates(int n, double v) {
    return std::vector<double>(static_cast<std::size_t>(n), v);
}

}  // namespace

TEST_CASE("enumerate_states counts") {
    SECTION("n=3 complete, alpha=1, beta=2: 8 complete states") {
        CHECK(enumerate_states(eight_state(), true).size() == 8);
    }
    SECTION("two units on a bidirectional edge: a single complete state") {
        const Instance inst = Instance::from_edges(2, {{0, 1}, {1, 0}}, {1, 1}, {2, 2});
        CHECK(enumerate_states(inst, true).size() == 1);
    }
    SECTION("zero demand: exactly the zero matrix") {
        const Instance inst = make_complete(3, 0, 2);
        const auto complete = enumerate_states(inst, true);
        REQUIRE(complete.size() == 1);
        CHECK(complete[0] == AllocationMatrix(3));
        CHECK(enumerate_states(inst, false).size() == 1);
    }
    SECTION("partial states include everything below the demand") {
        // each unit places 0 or 1 atoms on either neighbor: 1 + 2 options per
        // unit on the complete graph
        CHECK(enumerate_states(eight_state(), false).size() == 27);
    }
    SECTION("the guard rejects oversized spaces") {
        CHECK_THROWS_AS(enumerate_states(make_complete(10, 45, 50), true), GuardError);
        CHECK_THROWS_AS(enumerate_states(make_complete(4, 3, 3), true, 10), GuardError);
    }
    SECTION("no duplicates and all valid") {
        const Instance inst = make_cycle(4, 2, 3);
        const auto states = enumerate_states(inst, false);
        std::set<std::vector<int>> keys;
        for (const auto& w : states) {
            CHECK(validate_partial(inst, w));
            keys.insert(w.cells());
        }
        CHECK(keys.size() == states.size());
    }
}

TEST_CASE("build_state_graph") {
    SECTION("the 8-state graph under unit moves is 3-regular and symmetric") {
        const StateGraph g = build_state_graph(eight_state(), MoveFamily::granular({1}), true);
        REQUIRE(g.nodes.size() == 8);
        for (int i = 0; i < 8; ++i) {
            CHECK(g.adj[i].size() == 3);
            for (const StateEdge& e : g.adj[i]) {
                const bool back = std::any_of(g.adj[e.target].begin(), g.adj[e.target].end(),
                                              [&](const StateEdge& r) { return r.target == i; });
                CHECK(back);
            }
        }
    }
    SECTION("singleton allocation set has no edges") {
        const Instance inst = Instance::from_edges(2, {{0, 1}, {1, 0}}, {1, 1}, {2, 2});
        const StateGraph g = build_state_graph(inst, MoveFamily::granular({1}), true);
        REQUIRE(g.nodes.size() == 1);
        CHECK(g.adj[0].empty());
    }
    SECTION("adjacency on complete allocations is symmetric on a random corpus") {
        auto rng = make_rng(606);
        int checked = 0;
        for (int trial = 0; trial < 500 && checked < 20; ++trial) {
            RandomInstanceOptions opt;
            opt.n_max = 3;
            opt.alpha_max = 2;
            opt.beta_max = 4;
            opt.undirected = trial % 2 == 0;
            const Instance inst = random_instance(rng, opt);
            StateGraph g;
            try {
                g = build_state_graph(inst, MoveFamily::granular({1}), true, 500);
            } catch (const GuardError&) {
                continue;
            }
            if (g.nodes.size() < 2) continue;
            ++checked;
            for (std::size_t i = 0; i < g.nodes.size(); ++i)
                for (const StateEdge& e : g.adj[i]) {
                    const bool back =
                        std::any_of(g.adj[e.target].begin(), g.adj[e.target].end(),
                                    [&](const StateEdge& r) {
                                        return r.target == static_cast<int>(i);
                                    });
                    CHECK(back);
                }
        }
        CHECK(checked == 20);
    }
}

TEST_CASE("reachability_check") {
    SECTION("the saturated 5-cycle state reaches a complete allocation") {
        const auto result =
            reachability_check(five_cycle(), MoveFamily::granular({1}), five_cycle_partial());
        REQUIRE(result.reached);
        REQUIRE_FALSE(result.path.empty());
        CHECK(result.path.back().is_complete(five_cycle()));
        // path moves are admissible one-step transitions
        for (const auto& w : result.path) CHECK(validate_partial(five_cycle(), w));
    }
    SECTION("an already complete state yields an empty path") {
        const auto result =
            reachability_check(five_cycle(), MoveFamily::granular({1}), five_cycle_complete());
        CHECK(result.reached);
        CHECK(result.path.empty());
    }
    SECTION("infeasible instances are rejected up front") {
        CHECK_THROWS_AS(
            reachability_check(make_star(4, 3, 6), MoveFamily::granular({1}), AllocationMatrix(4)),
            std::invalid_argument);
    }
    SECTION("every partial state reaches the allocation set on a small corpus") {
        auto rng = make_rng(1212);
        int instances = 0;
        for (int trial = 0; trial < 60 && instances < 12; ++trial) {
            RandomInstanceOptions opt;
            opt.n_max = 3;
            opt.alpha_max = 2;
            opt.undirected = trial % 2 == 0;
            const Instance inst = random_instance(rng, opt);
            if (!hall_check_maxflow(inst).feasible) continue;
            std::vector<AllocationMatrix> partials;
            try {
                partials = enumerate_states(inst, false, 400);
            } catch (const GuardError&) {
                continue;
            }
            ++instances;
            for (const auto& w0 : partials)
                CHECK(reachability_check(inst, MoveFamily::granular({1}), w0).reached);
        }
        CHECK(instances == 12);
    }
}

TEST_CASE("connectivity_check") {
    SECTION("strictly feasible: connected") {
        CHECK(connectivity_check(eight_state(), MoveFamily::granular({1})));
    }
    SECTION("alpha = beta on the complete graph: every allocation is a sink") {
        CHECK_FALSE(connectivity_check(make_complete(3, 2, 2), MoveFamily::granular({1})));
    }
    SECTION("a singleton allocation set is trivially connected") {
        const Instance inst = Instance::from_edges(2, {{0, 1}, {1, 0}}, {1, 1}, {2, 2});
        CHECK(connectivity_check(inst, MoveFamily::granular({1})));
    }
}

TEST_CASE("build_generator structure") {
    const Instance inst = eight_state();
    const PotentialSpec spec = PotentialSpec::uniform(3, 9.0, 1.0, 1.0);
    const MoveFamily family = MoveFamily::granular({1});
    SECTION("rows sum to zero") {
        for (const bool churn : {false, true}) {
            const Generator gen =
                build_generator(inst, spec, family, uniform_rates(3, 1.0), uniform_rates(3, 1.0),
                                uniform_rates(3, 1.0), 0.7, churn);
            CHECK(gen.num_states == (churn ? 64 : 8));
            for (int i = 0; i < gen.num_states; ++i) {
                double row = 0.0;
                for (int j = 0; j < gen.num_states; ++j) row += gen.rate(i, j);
                CHECK_THAT(row, WithinAbs(0.0, 1e-12));
                for (int j = 0; j < gen.num_states; ++j)
                    if (j != i) CHECK(gen.rate(i, j) >= 0.0);
            }
        }
    }
    SECTION("without churn only activation transitions exist") {
        const Generator gen =
            build_generator(inst, spec, family, uniform_rates(3, 2.0), uniform_rates(3, 0.5),
                            uniform_rates(3, 1.0), 0.7, false);
        // all off-diagonal mass moves between distinct allocation states
        for (int i = 0; i < gen.num_states; ++i)
            for (int j = 0; j < gen.num_states; ++j)
                if (i != j && gen.rate(i, j) > 0.0) CHECK(gen.w_index[i] != gen.w_index[j]);
    }
    SECTION("guard on the augmented space") {
        CHECK_THROWS_AS(build_generator(inst, spec, family, uniform_rates(3, 1.0),
                                        uniform_rates(3, 1.0), uniform_rates(3, 1.0), 0.7, true,
                                        32),
                        GuardError);
    }
}

TEST_CASE("detailed balance of the exact generator") {
    const Instance inst = eight_state();
    const PotentialSpec spec = PotentialSpec::uniform(3, 9.0, 1.0, 1.0);
    const MoveFamily family = MoveFamily::granular({1});
    SECTION("without churn") {
        const Generator gen =
            build_generator(inst, spec, family, uniform_rates(3, 1.0), uniform_rates(3, 1.0),
                            uniform_rates(3, 1.0 / 3), 1.3, false);
        const BalanceReport report = detailed_balance_error(gen);
        CHECK(report.pairs >= 12);
        CHECK(report.max_rel_error <= 1e-9);
    }
    SECTION("with churn and asymmetric rates") {
        const Generator gen = build_generator(inst, spec, family, {2.0, 1.0, 0.5},
                                              {0.25, 1.0, 2.0}, {0.2, 0.4, 0.6}, 0.9, true);
        const BalanceReport report = detailed_balance_error(gen);
        CHECK(report.pairs > 100);
        CHECK(report.max_rel_error <= 1e-9);
    }
}

TEST_CASE("stationary distribution matches the Gibbs closed form") {
    const Instance inst = eight_state();
    const PotentialSpec spec = PotentialSpec::uniform(3, 9.0, 1.0, 1.0);
    const MoveFamily family = MoveFamily::granular({1});
    SECTION("churn off, several gammas") {
        for (double gamma : {0.0, 0.3, 1.0, 5.0}) {
            const Generator gen =
                build_generator(inst, spec, family, uniform_rates(3, 1.0), uniform_rates(3, 1.0),
                                uniform_rates(3, 1.0 / 3), gamma, false);
            const auto mu = stationary_distribution(gen);
            CHECK(total_variation(mu, gibbs_measure(gen)) <= 1e-9);
        }
    }
    SECTION("gamma = 0 is uniform over the 8 states") {
        const Generator gen =
            build_generator(inst, spec, family, uniform_rates(3, 1.0), uniform_rates(3, 1.0),
                            uniform_rates(3, 1.0 / 3), 0.0, false);
        const auto mu = stationary_distribution(gen);
        for (double p : mu) CHECK_THAT(p, WithinAbs(0.125, 1e-10));
    }
    SECTION("churn on: product form with the on/off factors") {
        const Generator gen = build_generator(inst, spec, family, uniform_rates(3, 1.0),
                                              uniform_rates(3, 1.0), uniform_rates(3, 1.0 / 3),
                                              0.8, true);
        const auto mu = stationary_distribution(gen);
        CHECK(total_variation(mu, gibbs_measure(gen)) <= 1e-9);
    }
    SECTION("churn on with asymmetric on/off rates") {
        const Generator gen = build_generator(inst, spec, family, {2.0, 1.5, 1.0},
                                              {0.5, 1.0, 0.25}, uniform_rates(3, 0.5), 0.8, true);
        const auto mu = stationary_distribution(gen);
        CHECK(total_variation(mu, gibbs_measure(gen)) <= 1e-9);
    }
    SECTION("a reducible chain is flagged") {
        const Generator gen =
            build_generator(make_complete(3, 2, 2), spec, family, uniform_rates(3, 1.0),
                            uniform_rates(3, 1.0), uniform_rates(3, 1.0 / 3), 1.0, false);
        CHECK_THROWS(stationary_distribution(gen));
    }
}

TEST_CASE("Gibbs measure concentrates on the maximizers as gamma grows") {
    const Instance inst = eight_state();
    const PotentialSpec spec = PotentialSpec::uniform(3, 9.0, 1.0, 1.0);
    const OptimumReport opt = brute_force_optimum(inst, spec);
    std::set<std::vector<int>> argmax_keys;
    for (const auto& w : opt.argmax) argmax_keys.insert(w.cells());
    double last_mass = 0.0;
    for (double gamma : {1.0, 5.0, 20.0}) {
        const Generator gen = build_generator(inst, spec, MoveFamily::granular({1}),
                                              uniform_rates(3, 1.0), uniform_rates(3, 1.0),
                                              uniform_rates(3, 1.0 / 3), gamma, false);
        const auto mu = gibbs_measure(gen);
        double mass = 0.0;
        for (int i = 0; i < gen.num_states; ++i)
            if (argmax_keys.count(gen.nodes[gen.w_index[i]].cells())) mass += mu[i];
        CHECK(mass > last_mass);
        last_mass = mass;
    }
    CHECK(last_mass > 0.999);
}

TEST_CASE("nash_check on the 3-unit example") {
    const Instance inst = make_complete(3, 2, 3);  // b = 3
    SECTION("all three allocation states are Nash inside the verified window") {
        // simultaneous window: -C_con <= C_agg <= C_con
        for (double c_agg : {-1.0, -0.5, 0.5, 1.0}) {
            const PotentialSpec spec =
                PotentialSpec::uniform(3, default_c_all(inst, c_agg, 1.0), c_agg, 1.0);
            CHECK(nash_check(inst, spec, w1_matching()).is_nash);
            CHECK(nash_check(inst, spec, w2_matching()).is_nash);
            CHECK(nash_check(inst, spec, w3_diffused()).is_nash);
        }
        // a pinned parameter point: C_agg = 1/2, C_all = 9
        const PotentialSpec pinned = PotentialSpec::uniform(3, 9.0, 0.5, 1.0);
        CHECK(nash_check(inst, pinned, w1_matching()).is_nash);
        CHECK(nash_check(inst, pinned, w2_matching()).is_nash);
        CHECK(nash_check(inst, pinned, w3_diffused()).is_nash);
    }
    SECTION("counterexample to the wider window: C_agg = -3 breaks the matchings") {
        const PotentialSpec spec =
            PotentialSpec::uniform(3, default_c_all(inst, -3.0, 1.0), -3.0, 1.0);
        const NashReport report = nash_check(inst, spec, w1_matching());
        CHECK_FALSE(report.is_nash);
        // the profitable deviation splits the stack across both neighbors
        bool split_found = false;
        for (const auto& dev : report.improving) {
            int support = 0;
            for (int v : dev.row) support += v > 0 ? 1 : 0;
            if (support == 2) split_found = true;
        }
        CHECK(split_found);
        CHECK(nash_check(inst, spec, w3_diffused()).is_nash);  // diffused stays Nash
    }
    SECTION("below b = 3 all three are Nash regardless of the aggregation sign") {
        const Instance tight = make_complete(3, 2, 2);
        for (double c_agg : {-6.0, -3.0, 3.0}) {
            const PotentialSpec spec =
                PotentialSpec::uniform(3, default_c_all(tight, c_agg, 1.0), c_agg, 1.0);
            CHECK(nash_check(tight, spec, w1_matching()).is_nash);
            CHECK(nash_check(tight, spec, w2_matching()).is_nash);
            CHECK(nash_check(tight, spec, w3_diffused()).is_nash);
        }
    }
}

TEST_CASE("nash_check guards oversized row enumerations") {
    const Instance big = make_complete(10, 45, 50);
    const PotentialSpec spec = PotentialSpec::uniform(10, 555.0, 3.0, 1.0);
    CHECK_THROWS_AS(nash_check(big, spec, AllocationMatrix(10)), GuardError);
}

TEST_CASE("nash_check on the 5-cycle example") {
    const Instance inst = five_cycle();
    const PotentialSpec spec = PotentialSpec::uniform(5, 57.0, 3.0, 1.0);
    CHECK(nash_check(inst, spec, five_cycle_complete()).is_nash);
    CHECK(nash_check(inst, spec, five_cycle_partial()).is_nash);
    // the complete matrix stops being Nash once aggregation weakens
    const PotentialSpec weak = PotentialSpec::uniform(5, 57.0, 1.0, 1.0);
    CHECK_FALSE(nash_check(inst, weak, five_cycle_complete()).is_nash);
}

TEST_CASE("potential maxima are Nash equilibria") {
    auto rng = make_rng(515);
    int checked = 0;
    for (int trial = 0; trial < 60 && checked < 15; ++trial) {
        RandomInstanceOptions opt;
        opt.n_max = 3;
        opt.alpha_max = 2;
        opt.beta_max = 4;
        const Instance inst = random_instance(rng, opt);
        const double c_agg = -1.5 + 3.0 * rand_u01(rng);
        const PotentialSpec spec =
            PotentialSpec::uniform(inst.n, default_c_all(inst, c_agg, 1.0), c_agg, 1.0);
        OptimumReport opt_report;
        try {
            opt_report = brute_force_optimum(inst, spec, 500);
        } catch (const GuardError&) {
            continue;
        } catch (const std::invalid_argument&) {
            continue;  // no complete allocation exists
        }
        ++checked;
        for (const auto& w : opt_report.argmax) CHECK(nash_check(inst, spec, w).is_nash);
    }
    CHECK(checked == 15);
}

TEST_CASE("brute_force_optimum on the 3-unit example with b = 3") {
    const Instance inst = make_complete(3, 2, 3);
    SECTION("positive aggregation: exactly the two matchings") {
        const PotentialSpec spec = PotentialSpec::uniform(3, 15.0, 1.0, 1.0);
        const OptimumReport report = brute_force_optimum(inst, spec);
        REQUIRE(report.argmax.size() == 2);
        std::set<std::vector<int>> keys;
        for (const auto& w : report.argmax) keys.insert(w.cells());
        CHECK(keys.count(w1_matching().cells()) == 1);
        CHECK(keys.count(w2_matching().cells()) == 1);
        CHECK(report.psi_opt == Catch::Approx(90.0));
    }
    SECTION("negative aggregation: exactly the diffused state") {
        const PotentialSpec spec = PotentialSpec::uniform(3, 15.0, -1.0, 1.0);
        const OptimumReport report = brute_force_optimum(inst, spec);
        REQUIRE(report.argmax.size() == 1);
        CHECK(report.argmax[0] == w3_diffused());
    }
    SECTION("zero demand: the zero matrix at zero potential") {
        const Instance none = make_complete(3, 0, 3);
        const OptimumReport report = brute_force_optimum(none, PotentialSpec::uniform(3, 15.0, 1.0, 1.0));
        CHECK(report.psi_opt == 0.0);
        REQUIRE(report.argmax.size() == 1);
        CHECK(report.argmax[0] == AllocationMatrix(3));
    }
}
