#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "aoce/evaluation.hpp"
#include "aoce/policy.hpp"
#include "aoce/solvers.hpp"
#include "test_helpers.hpp"

using namespace aoce;

namespace {

/// Long-run average cost by plain power iteration from a start state; an
/// implementation-independent check on the linear-algebra evaluation path.
double power_iteration_cost(const TruncatedMdp& mdp, const Policy& policy, int start,
                            int iterations = 20000) {
    std::vector<double> dist(static_cast<std::size_t>(mdp.n_states()), 0.0);
    dist[static_cast<std::size_t>(start)] = 1.0;
    std::vector<double> next(dist.size());
    for (int it = 0; it < iterations; ++it) {
        std::fill(next.begin(), next.end(), 0.0);
        for (int s = 0; s < mdp.n_states(); ++s) {
            if (dist[s] == 0.0) continue;
            for (const auto& t : mdp.transitions(s, policy(s))) next[t.to] += dist[s] * t.prob;
        }
        dist.swap(next);
    }
    double cost = 0.0;
    for (int s = 0; s < mdp.n_states(); ++s) cost += dist[s] * mdp.cost(s, policy(s));
    return cost;
}

SwitchingPolicy classed_thresholds(std::int64_t missed, std::int64_t falsed, std::int64_t other) {
    SwitchingPolicy sw(4);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            if (i == j) continue;
            std::int64_t tau = other;
            if (i == 0) tau = missed;
            else if (j == 0) tau = falsed;
            if (tau != SwitchingPolicy::never) sw.set_threshold(i, j, tau);
        }
    return sw;
}

}  // namespace

TEST_CASE("policy evaluation agrees with the stationary route") {
    auto source = make_symmetric_source(2, 0.3);
    TruncatedMdp mdp(source, SignificanceProfile::uniform(2, 1.0, AgeFunction::linear(1.0, 0.0)),
                     0.8, 1.5, 4);
    auto policy = expand(SwitchingPolicy::always_transmit_on_error(2), mdp);
    auto value = policy_evaluation(mdp, policy, 0);
    CHECK(value.h[0] == 0.0);

    auto mu = stationary_distribution(mdp, policy);
    double via_mu = 0.0;
    for (int s : mu.support) via_mu += mu.probability[s] * mdp.cost(s, policy(s));
    CHECK(value.average_cost == Catch::Approx(via_mu).margin(1e-12));
    CHECK(value.average_cost == Catch::Approx(power_iteration_cost(mdp, policy, 0)).margin(1e-9));
}

TEST_CASE("never-transmit evaluates on the reference state's closed group") {
    auto mdp = testing::example1_mdp(2.0, 0.9, 12);
    auto silent = expand(SwitchingPolicy(4), mdp);
    auto value = policy_evaluation(mdp, silent, 0);
    // oracle: power iteration over the chain entered at the synced reference
    CHECK(value.average_cost ==
          Catch::Approx(power_iteration_cost(mdp, silent, 0)).margin(1e-8));
    // cost carries no transmissions, so it cannot depend on the price
    auto pricier = testing::example1_mdp(50.0, 0.9, 12);
    CHECK(policy_evaluation(pricier, silent, 0).average_cost ==
          Catch::Approx(value.average_cost).margin(1e-10));
}

TEST_CASE("multichain evaluation errors only when several classes are reachable") {
    Eigen::MatrixXd q(3, 3);
    q << 0.2, 0.4, 0.4, 0.3, 0.4, 0.3, 0.25, 0.25, 0.5;
    SourceModel source(q);
    TruncatedMdp mdp(source, SignificanceProfile::uniform(3, 1.0, AgeFunction::constant(1.0)), 0.9,
                     1.0, 4);
    // transmit only in the two errors that move the estimate off the first
    // state: the estimate then freezes on whichever of the other two states
    // it reaches first, so two closed groups are reachable from sync
    SwitchingPolicy sw(3);
    sw.set_threshold(1, 0, 1);
    sw.set_threshold(2, 0, 1);
    CHECK_THROWS_AS(policy_evaluation(mdp, expand(sw, mdp), 0), EvaluationError);
    CHECK_THROWS_AS(stationary_distribution(mdp, expand(sw, mdp), 0), EvaluationError);
    // the exact multichain evaluation itself has no such restriction
    auto eval = evaluate_policy_multichain(mdp, expand(sw, mdp));
    CHECK(eval.recurrent_classes.size() == 2);
}

TEST_CASE("relative value iteration endpoints") {
    SECTION("free transmissions: transmit in every error") {
        auto mdp = testing::example1_mdp(0.0);
        auto result = relative_value_iteration(mdp);
        auto extracted = extract_thresholds(result.policy, mdp);
        REQUIRE(extracted.is_switching);
        for (const auto& b : mdp.error_blocks())
            CHECK(extracted.thresholds.threshold(b.source, b.estimate) == 1);
        testing::check_solution_structure(mdp, result);
    }
    SECTION("prohibitive transmissions: never transmit") {
        auto mdp = testing::example1_mdp(1e6);
        auto result = relative_value_iteration(mdp);
        for (int s = 0; s < mdp.n_states(); ++s) CHECK(result.policy(s) == 0);
    }
    SECTION("cross-check against direct evaluation of the known thresholds") {
        auto mdp = testing::example1_mdp(3.0);
        auto result = relative_value_iteration(mdp);
        auto value = policy_evaluation(
            mdp, expand(classed_thresholds(2, 3, SwitchingPolicy::never), mdp), 0);
        CHECK(result.average_cost == Catch::Approx(value.average_cost).margin(1e-8));
    }
    SECTION("iteration budget produces a diagnosable failure") {
        auto mdp = testing::example1_mdp(3.0);
        SolveOptions opts;
        opts.max_iterations = 3;
        CHECK_THROWS_AS(relative_value_iteration(mdp, 0, opts), SolverError);
    }
}

TEST_CASE("structured policy iteration reproduces the benchmark thresholds") {
    struct Expected {
        double lambda;
        std::int64_t missed, falsed, other;
    };
    const Expected table[] = {
        {2.0, 1, 1, SwitchingPolicy::never},
        {3.0, 2, 3, SwitchingPolicy::never},
        {4.0, 3, 11, SwitchingPolicy::never},
        {5.0, 3, SwitchingPolicy::never, SwitchingPolicy::never},
    };
    for (const auto& row : table) {
        auto mdp = testing::example1_mdp(row.lambda);
        auto result = structured_policy_iteration(mdp);
        auto extracted = extract_thresholds(result.policy, mdp);
        REQUIRE(extracted.is_switching);
        INFO("lambda = " << row.lambda);
        CHECK(extracted.thresholds == classed_thresholds(row.missed, row.falsed, row.other));
        testing::check_solution_structure(mdp, result);
    }
}

TEST_CASE("solvers agree and the reference state does not matter") {
    for (double lambda : {0.0, 1.0, 3.0}) {
        auto mdp = testing::example2_mdp(lambda, 0.9, 12);
        auto spi = structured_policy_iteration(mdp);
        auto rvi = relative_value_iteration(mdp);
        auto pi = classical_policy_iteration(
            mdp, expand(SwitchingPolicy::always_transmit_on_error(4), mdp));
        INFO("lambda = " << lambda);
        CHECK(spi.average_cost == Catch::Approx(rvi.average_cost).margin(1e-8));
        CHECK(spi.average_cost == Catch::Approx(pi.average_cost).margin(1e-9));

        auto spi_other = structured_policy_iteration(mdp, 3);
        auto spi_error = structured_policy_iteration(mdp, 7);
        CHECK(spi.average_cost == Catch::Approx(spi_other.average_cost).margin(1e-9));
        CHECK(spi.average_cost == Catch::Approx(spi_error.average_cost).margin(1e-9));

        testing::check_solution_structure(mdp, spi);
        testing::check_solution_structure(mdp, pi);
    }
}

TEST_CASE("exhaustive search validates the structured solver") {
    SECTION("two-state symmetric model across the full threshold range") {
        auto source = make_symmetric_source(2, 0.25);
        TruncatedMdp mdp(source,
                         SignificanceProfile::uniform(2, 1.0, AgeFunction::exponential(1.4, 1.0)),
                         0.85, 1.2, 8);
        auto brute = brute_force_switching_search(mdp, 8);
        auto spi = structured_policy_iteration(mdp);
        CHECK(spi.average_cost == Catch::Approx(brute.average_cost).margin(1e-9));
    }
    SECTION("free transmissions make every threshold one") {
        auto source = make_symmetric_source(2, 0.25);
        TruncatedMdp mdp(source, SignificanceProfile::uniform(2, 1.0, AgeFunction::linear(1.0, 0.0)),
                         0.85, 0.0, 6);
        auto brute = brute_force_switching_search(mdp, 6);
        CHECK(brute.thresholds == SwitchingPolicy::always_transmit_on_error(2));
    }
    SECTION("seeded three-state instance") {
        std::mt19937_64 rng(1234);
        auto source = testing::random_source(rng, 3);
        auto profile = testing::random_admissible_profile(rng, source, 0.2);
        TruncatedMdp mdp(source, profile, 0.8, 1.0, 5);
        auto brute = brute_force_switching_search(mdp, 5);
        auto spi = structured_policy_iteration(mdp);
        CHECK(spi.average_cost == Catch::Approx(brute.average_cost).margin(1e-9));
    }
    SECTION("combinatorial guard refuses oversized searches") {
        auto mdp = testing::example1_mdp(3.0);  // 12 errors, 21 candidates each
        CHECK_THROWS_AS(brute_force_switching_search(mdp, 20), std::invalid_argument);
    }
}

TEST_CASE("improvement sweeps stop at the threshold surface") {
    auto mdp = testing::example1_mdp(3.0);
    auto result = structured_policy_iteration(mdp);
    auto extracted = extract_thresholds(result.policy, mdp);
    REQUIRE(extracted.is_switching);
    long surface = 0;
    for (const auto& b : mdp.error_blocks()) {
        const auto tau = extracted.thresholds.threshold(b.source, b.estimate);
        surface += std::min<std::int64_t>(tau, b.length);
    }
    const long errors = static_cast<long>(mdp.error_blocks().size());
    // every iteration visits at most the (next) threshold surface
    CHECK(result.bellman_backups <= result.iterations * (surface + errors) * 2);
    // and the final fixed-point sweep visits it exactly
    CHECK(result.bellman_backups >= surface);
}
