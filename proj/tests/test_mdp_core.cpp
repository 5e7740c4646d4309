#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <map>
#include <random>

#include "aoce/mdp.hpp"
#include "aoce/policy.hpp"
#include "test_helpers.hpp"

using namespace aoce;

namespace {

std::map<int, double> row_as_map(const std::vector<Transition>& row) {
    std::map<int, double> out;
    for (const auto& t : row) out[t.to] += t.prob;
    return out;
}

}  // namespace

TEST_CASE("error age recursion") {
    CHECK(aoce_update({0, 1, 3}, 0, 1, 20) == 4);   // same error keeps aging
    CHECK(aoce_update({0, 1, 3}, 2, 1, 20) == 1);   // error change resets
    CHECK(aoce_update({0, 1, 20}, 0, 1, 20) == 20); // saturates at the cap
    CHECK(aoce_update({0, 1, 3}, 1, 1, 20) == 0);   // sync clears the age
    CHECK(aoce_update({2, 2, 0}, 0, 2, 20) == 1);   // fresh error from sync
}

TEST_CASE("state space enumeration and size") {
    SECTION("reference model size") {
        auto mdp = testing::example1_mdp(3.0);
        CHECK(mdp.n_states() == 244);  // 16 - 12 + 12 * 20
        // synced first, then error ladders in lexicographic order
        CHECK(mdp.space().state(0) == SystemState{0, 0, 0});
        CHECK(mdp.space().state(4) == SystemState{0, 1, 1});
        CHECK(mdp.space().state(4 + 19) == SystemState{0, 1, 20});
        CHECK(mdp.space().state(4 + 20) == SystemState{0, 2, 1});
    }
    SECTION("two states, unit truncation") {
        auto source = make_symmetric_source(2, 0.3);
        TruncatedMdp mdp(source, SignificanceProfile::uniform(2, 1.0, AgeFunction::constant(1.0)),
                         0.9, 1.0, 1);
        CHECK(mdp.n_states() == 4);
    }
    SECTION("a state without self-transition gets a single-age ladder") {
        Eigen::MatrixXd q(2, 2);
        q << 0.0, 1.0, 0.5, 0.5;
        TruncatedMdp mdp(SourceModel(q), SignificanceProfile::uniform(2, 1.0, AgeFunction::constant(1.0)),
                         0.9, 1.0, 6);
        CHECK(mdp.space().block(0, 1).length == 1);
        CHECK(mdp.space().block(1, 0).length == 6);
        CHECK(mdp.n_states() == 2 + 1 + 6);
        CHECK_THROWS_AS(mdp.transitions(SystemState{0, 1, 2}, 0), std::domain_error);
    }
    SECTION("inadmissible sources are rejected") {
        auto profile = SignificanceProfile::uniform(2, 1.0, AgeFunction::constant(1.0));
        CHECK_THROWS_AS(
            TruncatedMdp(SourceModel(Eigen::MatrixXd::Identity(2, 2)), profile, 0.9, 1.0, 5),
            std::invalid_argument);
    }
}

TEST_CASE("kernel rows match the controlled dynamics") {
    auto mdp = testing::example1_mdp(3.0);
    const auto& space = mdp.space();

    SECTION("silent action from an error state") {
        auto row = row_as_map(mdp.transitions(SystemState{0, 1, 3}, 0));
        REQUIRE(row.size() == 4);
        CHECK(row[space.index_of({0, 1, 4})] == Catch::Approx(0.7).margin(1e-15));
        CHECK(row[space.index_of({1, 1, 0})] == Catch::Approx(0.1).margin(1e-15));
        CHECK(row[space.index_of({2, 1, 1})] == Catch::Approx(0.1).margin(1e-15));
        CHECK(row[space.index_of({3, 1, 1})] == Catch::Approx(0.1).margin(1e-15));
    }
    SECTION("transmit action from an error state") {
        auto row = row_as_map(mdp.transitions(SystemState{0, 1, 3}, 1));
        REQUIRE(row.size() == 8);
        CHECK(row[space.index_of({0, 0, 0})] == Catch::Approx(0.63).margin(1e-15));
        CHECK(row[space.index_of({1, 0, 1})] == Catch::Approx(0.09).margin(1e-15));
        CHECK(row[space.index_of({2, 0, 1})] == Catch::Approx(0.09).margin(1e-15));
        CHECK(row[space.index_of({3, 0, 1})] == Catch::Approx(0.09).margin(1e-15));
        CHECK(row[space.index_of({0, 1, 4})] == Catch::Approx(0.07).margin(1e-15));
        CHECK(row[space.index_of({1, 1, 0})] == Catch::Approx(0.01).margin(1e-15));
        CHECK(row[space.index_of({2, 1, 1})] == Catch::Approx(0.01).margin(1e-15));
        CHECK(row[space.index_of({3, 1, 1})] == Catch::Approx(0.01).margin(1e-15));
    }
    SECTION("synced states ignore the action") {
        for (int i = 0; i < 4; ++i) {
            const auto& silent = mdp.transitions(i, 0);
            const auto& transmit = mdp.transitions(i, 1);
            REQUIRE(silent.size() == transmit.size());
            for (std::size_t k = 0; k < silent.size(); ++k) {
                CHECK(silent[k].to == transmit[k].to);
                CHECK(silent[k].prob == transmit[k].prob);
            }
        }
    }
    SECTION("age saturates at the cap") {
        auto row = row_as_map(mdp.transitions(SystemState{0, 1, 20}, 0));
        CHECK(row[space.index_of({0, 1, 20})] == Catch::Approx(0.7).margin(1e-15));
    }
}

TEST_CASE("kernel properties on random instances") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 15; ++trial) {
        const int m = 2 + static_cast<int>(rng() % 3);
        const int cap = 2 + static_cast<int>(rng() % 6);
        const double ps = 0.05 + 0.95 * (static_cast<double>(rng() % 1000) / 1000.0);
        auto source = testing::random_source(rng, m);
        auto profile = testing::random_admissible_profile(rng, source, 1.0 - ps);
        TruncatedMdp mdp(source, profile, ps, 1.0, cap);
        INFO("trial " << trial << " m=" << m << " cap=" << cap << " ps=" << ps);

        for (int s = 0; s < mdp.n_states(); ++s) {
            for (int a = 0; a < 2; ++a) {
                double sum = 0.0;
                for (const auto& t : mdp.transitions(s, a)) {
                    sum += t.prob;
                    REQUIRE(t.to >= 0);
                    REQUIRE(t.to < mdp.n_states());
                    CHECK(mdp.space().state(t.to).age <= cap);
                    CHECK(t.prob > 0.0);
                }
                CHECK(sum == Catch::Approx(1.0).margin(1e-12));
            }
        }

        // merge correctness: rebuild each transmit row from the raw
        // success/failure branches and compare
        for (const auto& b : mdp.error_blocks()) {
            const int i = b.source;
            const int j = b.estimate;
            for (int d = 1; d <= b.length; ++d) {
                std::map<int, double> expected;
                const int up = mdp.space().try_index({i, j, std::min(d + 1, cap)});
                auto put = [&](int to, double p) {
                    if (p > 0.0) expected[to] += p;
                };
                put(i, source.prob(i, i) * ps);
                for (int k = 0; k < m; ++k)
                    if (k != i) put(mdp.space().index_of({k, i, 1}), source.prob(i, k) * ps);
                if (up >= 0) put(up, source.prob(i, i) * (1.0 - ps));
                put(j, source.prob(i, j) * (1.0 - ps));
                for (int k = 0; k < m; ++k)
                    if (k != i && k != j)
                        put(mdp.space().index_of({k, j, 1}), source.prob(i, k) * (1.0 - ps));
                auto actual = row_as_map(mdp.transitions(mdp.space().index_of({i, j, d}), 1));
                REQUIRE(actual.size() == expected.size());
                for (const auto& [to, p] : expected)
                    CHECK(actual[to] == Catch::Approx(p).margin(1e-15));
            }
        }
    }
}

TEST_CASE("symmetric sources lump by age to the reduced kernel") {
    std::mt19937_64 rng(29);
    for (int trial = 0; trial < 8; ++trial) {
        const int m = 2 + static_cast<int>(rng() % 4);
        std::uniform_real_distribution<double> unif(0.02, 1.0 / m - 0.01);
        const double p = unif(rng);
        const double pbar = 1.0 - (m - 1) * p;
        const double ps = 0.1 + 0.8 * (static_cast<double>(rng() % 1000) / 1000.0);
        const double pf = 1.0 - ps;
        const int cap = 3 + static_cast<int>(rng() % 5);
        auto source = make_symmetric_source(m, p);
        TruncatedMdp mdp(source, SignificanceProfile::uniform(m, 1.0, AgeFunction::linear(1.0, 0.0)),
                         ps, 1.0, cap);

        // lump: class 0 = synced, class d = all errors at age d
        auto lumped = [&](int state, int action) {
            std::vector<double> mass(static_cast<std::size_t>(cap) + 1, 0.0);
            for (const auto& t : mdp.transitions(state, action))
                mass[static_cast<std::size_t>(mdp.space().state(t.to).age)] += t.prob;
            return mass;
        };

        for (int i = 0; i < m; ++i) {  // synced rows
            for (int a = 0; a < 2; ++a) {
                auto mass = lumped(i, a);
                CHECK(mass[0] == Catch::Approx(pbar).margin(1e-12));
                CHECK(mass[1] == Catch::Approx(1.0 - pbar).margin(1e-12));
            }
        }
        for (const auto& b : mdp.error_blocks()) {
            for (int d = 1; d <= b.length; ++d) {
                const int idx = b.first + d - 1;
                const int up = std::min(d + 1, cap);
                auto silent = lumped(idx, 0);
                CHECK(silent[0] == Catch::Approx(p).margin(1e-12));
                CHECK(silent[static_cast<std::size_t>(up)] ==
                      Catch::Approx(pbar + (up == 1 ? (m - 2) * p : 0.0)).margin(1e-12));
                if (up > 1)
                    CHECK(silent[1] == Catch::Approx((m - 2) * p).margin(1e-12));
                auto tx = lumped(idx, 1);
                CHECK(tx[0] == Catch::Approx(pbar * ps + p * pf).margin(1e-12));
                const double fresh = 1.0 - pbar - p * pf;
                if (up > 1) {
                    CHECK(tx[static_cast<std::size_t>(up)] == Catch::Approx(pbar * pf).margin(1e-12));
                    CHECK(tx[1] == Catch::Approx(fresh).margin(1e-12));
                } else {
                    CHECK(tx[1] == Catch::Approx(pbar * pf + fresh).margin(1e-12));
                }
            }
        }
    }
}

TEST_CASE("always-transmit recurrence check") {
    CHECK(check_recurrence_always_transmit(testing::example1_mdp(3.0, 0.9)));
    CHECK(check_recurrence_always_transmit(testing::example2_mdp(3.0, 0.9)));

    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 6; ++trial) {
        const double ps = 0.05 + 0.9 * (static_cast<double>(rng() % 1000) / 1000.0);
        CHECK(check_recurrence_always_transmit(testing::example1_mdp(1.0, ps, 6)));
    }

    // with a dead channel the estimate can never move, so the chain splits
    CHECK_FALSE(check_recurrence_always_transmit(testing::example1_mdp(1.0, 0.0, 6)));
    // with a perfect channel the deep age ladder is unreachable
    CHECK_FALSE(check_recurrence_always_transmit(testing::example1_mdp(1.0, 1.0, 6)));
}

TEST_CASE("kernel checksum is reproducible") {
    auto a = testing::example1_mdp(3.0);
    auto b = testing::example1_mdp(3.0);
    CHECK(a.kernel_checksum() == b.kernel_checksum());
    auto c = testing::example1_mdp(3.0, 0.8);
    CHECK(a.kernel_checksum() != c.kernel_checksum());
}
