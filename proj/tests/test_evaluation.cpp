#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "aoce/baselines.hpp"
#include "aoce/evaluation.hpp"
#include "aoce/simulate.hpp"
#include "test_helpers.hpp"

using namespace aoce;

TEST_CASE("stationary distribution facts") {
    SECTION("perfect channel concentrates on sync and fresh errors") {
        auto source = make_symmetric_source(2, 0.3);
        TruncatedMdp mdp(source, SignificanceProfile::uniform(2, 1.0, AgeFunction::linear(1.0, 0.0)),
                         1.0, 0.5, 5);
        auto policy = expand(SwitchingPolicy::always_transmit_on_error(2), mdp);
        auto mu = stationary_distribution(mdp, policy);
        double deep = 0.0;
        for (int s : mu.support)
            if (mdp.space().state(s).age > 1) deep += mu.probability[s];
        CHECK(deep == Catch::Approx(0.0).margin(1e-14));
        double total = 0.0;
        for (int s : mu.support) total += mu.probability[s];
        CHECK(total == Catch::Approx(1.0).margin(1e-12));
    }
    SECTION("uniform two-state source splits mass evenly between sync and error") {
        auto source = make_symmetric_source(2, 0.5);
        TruncatedMdp mdp(source, SignificanceProfile::uniform(2, 1.0, AgeFunction::linear(1.0, 0.0)),
                         0.7, 0.5, 6);
        for (const auto& sw :
             {SwitchingPolicy::always_transmit_on_error(2), SwitchingPolicy::uniform(2, 3)}) {
            auto mu = stationary_distribution(mdp, expand(sw, mdp));
            double synced = 0.0;
            for (int s : mu.support)
                if (mdp.space().state(s).synced()) synced += mu.probability[s];
            CHECK(synced == Catch::Approx(0.5).margin(1e-12));
        }
    }
    SECTION("fixed point residual") {
        auto mdp = testing::example2_mdp(3.0);
        auto policy = expand(SwitchingPolicy::uniform(4, 2), mdp);
        auto mu = stationary_distribution(mdp, policy);
        std::vector<double> next(mu.probability.size(), 0.0);
        for (int s : mu.support)
            for (const auto& t : mdp.transitions(s, policy(s)))
                next[t.to] += mu.probability[s] * t.prob;
        for (std::size_t s = 0; s < next.size(); ++s)
            CHECK(std::abs(next[s] - mu.probability[s]) <= 1e-10);
    }
}

TEST_CASE("exact average costs of the comparison policies") {
    SECTION("zero weights kill the cost entirely") {
        auto source = make_symmetric_source(3, 0.2);
        TruncatedMdp mdp(source, SignificanceProfile::uniform(3, 0.0, AgeFunction::exponential(1.3, 1.0)),
                         0.9, 0.0, 6);
        CHECK(average_cost_exact(mdp, expand(SwitchingPolicy::uniform(3, 2), mdp)) ==
              Catch::Approx(0.0).margin(1e-15));
    }
    SECTION("benchmark values on the asymmetric source") {
        auto mdp0 = testing::example2_mdp(0.0);
        auto opt0 = structured_policy_iteration(mdp0);
        CHECK(average_cost_exact(mdp0, opt0.policy) == Catch::Approx(0.31).margin(0.02));

        auto mdp3 = testing::example2_mdp(3.0);
        auto opt3 = structured_policy_iteration(mdp3);
        CHECK(average_cost_exact(mdp3, opt3.policy) == Catch::Approx(0.80).margin(0.02));
    }
}

TEST_CASE("simulation agrees with the stationary analysis") {
    auto mdp = testing::example2_mdp(3.0);
    auto solved = structured_policy_iteration(mdp);
    const double exact = average_cost_exact(mdp, solved.policy);
    auto report = simulate(mdp, StateTablePolicy{solved.policy}, 400000, 99);
    CHECK(std::abs(report.mean_cost - exact) <= 3.0 * report.half_width_95);

    SECTION("identical seeds give identical reports") {
        auto again = simulate(mdp, StateTablePolicy{solved.policy}, 400000, 99);
        CHECK(again.mean_cost == report.mean_cost);
        CHECK(again.half_width_95 == report.half_width_95);
        CHECK(again.tx_rate == report.tx_rate);
        auto different = simulate(mdp, StateTablePolicy{solved.policy}, 400000, 100);
        CHECK(different.mean_cost != report.mean_cost);
    }
    SECTION("transmission rate matches the stationary transmit mass") {
        auto mu = stationary_distribution(mdp, solved.policy);
        double tx_mass = 0.0;
        for (int s : mu.support) tx_mass += solved.policy(s) ? mu.probability[s] : 0.0;
        CHECK(report.tx_rate == Catch::Approx(tx_mass).margin(0.003));
    }
}

TEST_CASE("open-loop and trace policies simulate deterministically") {
    auto mdp = testing::example2_mdp(1.0, 0.9, 10);
    for (const auto& [name, policy] :
         std::vector<std::pair<std::string, SimPolicy>>{
             {"randomized", RandomizedPolicy{0.4}},
             {"periodic", PeriodicPolicy{3}},
             {"reactive", ReactivePolicy{}},
             {"delivery-age", DeliveryAgePolicy{2}},
         }) {
        INFO(name);
        auto a = simulate(mdp, policy, 50000, 7);
        auto b = simulate(mdp, policy, 50000, 7);
        CHECK(a.mean_cost == b.mean_cost);
        CHECK(a.mean_cost >= 0.0);
        CHECK(a.half_width_95 >= 0.0);
    }
}

TEST_CASE("reactive baseline: augmented-chain evaluation matches simulation") {
    auto mdp = testing::example2_mdp(2.0);
    auto reactive = make_baseline(BaselineSpec::of(BaselineKind::reactive), mdp);
    auto exact = exact_average_cost(mdp, reactive);
    REQUIRE(exact.has_value());
    auto report = simulate(mdp, reactive.sim, 400000, 5);
    CHECK(std::abs(report.mean_cost - *exact) <= 3.0 * report.half_width_95);
}

TEST_CASE("truncation gap bounds") {
    SECTION("reference policy at the benchmark truncation is far converged") {
        auto mdp = testing::example1_mdp(3.0);
        auto solved = structured_policy_iteration(mdp);
        auto thresholds = extract_thresholds(solved.policy, mdp);
        REQUIRE(thresholds.is_switching);
        auto bounds = truncation_gap_bound(mdp, thresholds.thresholds);
        REQUIRE_FALSE(bounds.empty());
        for (const auto& b : bounds) CHECK(b.bound < 1e-6);
    }
    SECTION("bounded penalties have exactly zero gap") {
        auto source = make_symmetric_source(3, 0.2);
        TruncatedMdp mdp(source, SignificanceProfile::uniform(3, 2.0, AgeFunction::constant(1.5)),
                         0.8, 1.0, 8);
        auto bounds = truncation_gap_bound(mdp, SwitchingPolicy::uniform(3, 2));
        for (const auto& b : bounds) CHECK(b.bound == 0.0);
    }
    SECTION("threshold at the boundary still yields a finite bound") {
        auto mdp = testing::example1_mdp(3.0, 0.9, 6);
        auto bounds = truncation_gap_bound(mdp, SwitchingPolicy::uniform(4, 6));
        for (const auto& b : bounds) {
            CHECK(std::isfinite(b.bound));
            CHECK(b.bound >= 0.0);
        }
    }
    SECTION("diverging series is refused") {
        auto source = make_symmetric_source(4, 0.1);
        auto profile = SignificanceProfile::alarm_classes(
            source, testing::reference_profile(source).weights(),
            AgeFunction::exponential(20.0, 1.0), AgeFunction::logarithmic(1.0, 1.0),
            AgeFunction::constant(1.0));
        TruncatedMdp mdp(source, profile, 0.9, 3.0, 8);
        CHECK_THROWS_AS(truncation_gap_bound(mdp, SwitchingPolicy::uniform(4, 2)),
                        std::domain_error);
    }
}

TEST_CASE("truncation sweep behavior") {
    auto source = make_symmetric_source(4, 0.1);
    auto profile = testing::reference_profile(source);

    SECTION("single size: solve without a fit") {
        auto sweep = truncation_sweep(source, profile, 0.9, 3.0, {10});
        CHECK(sweep.points.size() == 1);
        CHECK_FALSE(sweep.fitted_ratio.has_value());
    }
    SECTION("perfect channel converges once the thresholds fit") {
        auto sweep = truncation_sweep(source, profile, 1.0, 3.0, {6, 8, 10, 12});
        for (const auto& p : sweep.points)
            CHECK(p.average_cost == Catch::Approx(sweep.points.back().average_cost).margin(1e-10));
        CHECK_FALSE(sweep.fitted_ratio.has_value());  // all gaps under the noise floor
        CHECK(sweep.theoretical_ratio == Catch::Approx(0.0).margin(1e-15));
    }
    SECTION("existence failures are refused") {
        auto bad = SignificanceProfile::alarm_classes(
            source, profile.weights(), AgeFunction::exponential(20.0, 1.0),
            AgeFunction::logarithmic(1.0, 1.0), AgeFunction::constant(1.0));
        CHECK_THROWS_AS(truncation_sweep(source, bad, 0.9, 3.0, {4, 6, 8}), std::domain_error);
    }
}

TEST_CASE("grid searches find the right parameters") {
    SECTION("threshold search is exact and matches the structured solver on symmetric sources") {
        auto source = make_symmetric_source(3, 0.15);
        TruncatedMdp mdp(source,
                         SignificanceProfile::uniform(3, 1.0, AgeFunction::exponential(1.5, 1.0)),
                         0.9, 2.0, 10);
        std::vector<double> grid;
        for (int d = 1; d <= 10; ++d) grid.push_back(d);
        grid.push_back(std::numeric_limits<double>::infinity());
        auto best = grid_search_baseline(BaselineKind::threshold, grid, mdp, 0, 0);
        auto spi = structured_policy_iteration(mdp);
        CHECK(best.exact);
        CHECK(best.best_cost == Catch::Approx(spi.average_cost).margin(1e-9));
    }
    SECTION("free transmissions favor always transmitting") {
        auto mdp = testing::example2_mdp(0.0, 0.9, 8);
        auto best = grid_search_baseline(BaselineKind::randomized, {0.0, 0.25, 0.5, 0.75, 1.0},
                                         mdp, 300000, 3);
        CHECK(best.best_parameter == 1.0);
    }
    SECTION("empty grids are rejected") {
        auto mdp = testing::example2_mdp(1.0, 0.9, 6);
        CHECK_THROWS_AS(grid_search_baseline(BaselineKind::randomized, {}, mdp, 1000, 1),
                        std::invalid_argument);
    }
}
