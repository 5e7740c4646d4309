#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <variant>
#include <vector>

#include "aoce/aux_models.hpp"
#include "aoce/mdp.hpp"
#include "aoce/policy.hpp"

namespace aoce {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

}  // namespace detail

/**
 * Deterministic per-purpose random streams derived from one master seed via
 * splitmix64: stream 0 drives source transitions, stream 1 the channel,
 * stream 2 policy coin flips. Keeping the streams separate means adding or
 * changing a policy never perturbs the source and channel sample paths.
 */
class StreamRng {
public:
    explicit StreamRng(std::uint64_t seed) {
        std::uint64_t s = seed;
        source_.seed(detail::splitmix64(s));
        channel_.seed(detail::splitmix64(s));
        coin_.seed(detail::splitmix64(s));
    }

    double source_uniform() { return to_unit(source_()); }
    bool channel_success(double p) { return to_unit(channel_()) < p; }
    bool coin(double p) { return to_unit(coin_()) < p; }

private:
    static double to_unit(std::uint64_t x) { return static_cast<double>(x >> 11) * 0x1.0p-53; }

    std::mt19937_64 source_;
    std::mt19937_64 channel_;
    std::mt19937_64 coin_;
};

// ---------------------------------------------------------------------------
// Simulation-facing policy forms. Closed-loop table policies act on the
// truncated system state (ages past the cap act like the boundary age); the
// open-loop and age-statistic rules consume the extended trace the simulator
// maintains.
// ---------------------------------------------------------------------------

struct StateTablePolicy {
    Policy actions;
};

struct RandomizedPolicy {
    double tx_prob = 1.0;
};

struct PeriodicPolicy {
    std::int64_t period = 1;
};

/// Transmit on source change (needs the previous source state).
struct ReactivePolicy {};

/// Transmit once the delivery age reaches the threshold (synced or not).
struct DeliveryAgePolicy {
    std::int64_t threshold = 1;
};

/// Table over the sync-age model's states, indexed by (source, estimate,
/// capped sync age).
struct SyncAgePolicy {
    Policy actions;
    int state_count = 0;
    int age_cap = 1;
};

using SimPolicy = std::variant<StateTablePolicy, RandomizedPolicy, PeriodicPolicy, ReactivePolicy,
                               DeliveryAgePolicy, SyncAgePolicy>;

struct SimulationReport {
    double mean_cost = 0.0;
    double half_width_95 = 0.0;
    std::int64_t horizon = 0;
    std::uint64_t seed = 0;
    double tx_rate = 0.0;
};

namespace detail {

struct TraceContext {
    int source = 0;
    int estimate = 0;
    std::int64_t error_age = 0;     // untruncated consecutive-error age
    std::int64_t delivery_age = 1;  // slots since the newest delivered measurement was generated
    std::int64_t sync_age = 0;      // consecutive erroneous slots
    int prev_source = 0;
    std::int64_t t = 1;
};

struct ActionVisitor {
    const TruncatedMdp& mdp;
    const TraceContext& ctx;
    StreamRng& rng;

    int operator()(const StateTablePolicy& p) const {
        const std::int64_t capped = std::min<std::int64_t>(ctx.error_age, mdp.age_cap());
        const int idx = mdp.space().index_of({ctx.source, ctx.estimate, capped});
        return p.actions(idx);
    }
    int operator()(const RandomizedPolicy& p) const { return rng.coin(p.tx_prob) ? 1 : 0; }
    int operator()(const PeriodicPolicy& p) const { return (ctx.t - 1) % p.period == 0 ? 1 : 0; }
    int operator()(const ReactivePolicy&) const { return ctx.source != ctx.prev_source ? 1 : 0; }
    int operator()(const DeliveryAgePolicy& p) const {
        return ctx.delivery_age >= p.threshold ? 1 : 0;
    }
    int operator()(const SyncAgePolicy& p) const {
        // same (source, estimate, capped age) indexing as SyncAgeModel::index_of
        const int m = p.state_count;
        if (ctx.source == ctx.estimate) return p.actions(ctx.source);
        const int block = ctx.source * (m - 1) + (ctx.estimate < ctx.source ? ctx.estimate : ctx.estimate - 1);
        const int age = static_cast<int>(std::min<std::int64_t>(ctx.sync_age, p.age_cap));
        return p.actions(m + block * p.age_cap + age - 1);
    }
};

}  // namespace detail

/**
 * Monte Carlo rollout of the closed loop: source, Bernoulli channel, last
 * received measurement as the estimate, untruncated error-age recursion, and
 * the per-stage cost of the model's significance profile. Deterministic for
 * a fixed seed. The channel stream advances every slot whether or not a
 * transmission happens, so sample paths couple across policies. The 95%
 * half-width comes from twenty batch means.
 */
inline SimulationReport simulate(const TruncatedMdp& mdp, const SimPolicy& policy,
                                 std::int64_t horizon, std::uint64_t seed) {
    if (horizon < 1) throw std::invalid_argument("simulate: horizon must be >= 1");
    StreamRng rng(seed);
    const auto& q = mdp.source().transition();
    const int m = mdp.source().state_count();
    const double ps = mdp.success_prob();
    const double lambda = mdp.tx_cost();

    detail::TraceContext ctx;  // start synced in the first source state

    const int n_batches = 20;
    const std::int64_t batch_len = std::max<std::int64_t>(1, horizon / n_batches);
    std::vector<double> batch_sum(static_cast<std::size_t>(n_batches), 0.0);

    double total = 0.0;
    std::int64_t transmissions = 0;

    for (std::int64_t t = 1; t <= horizon; ++t) {
        ctx.t = t;
        const int action = std::visit(detail::ActionVisitor{mdp, ctx, rng}, policy);
        const double stage =
            per_stage_cost(mdp.profile(), {ctx.source, ctx.estimate, ctx.error_age}, action, lambda);
        total += stage;
        transmissions += action;
        const std::int64_t batch = std::min<std::int64_t>((t - 1) / batch_len, n_batches - 1);
        batch_sum[static_cast<std::size_t>(batch)] += stage;

        // channel draw consumed every slot to keep paths comparable
        const bool delivered = rng.channel_success(ps) && action == 1;

        const double u = rng.source_uniform();
        int next_source = m - 1;
        double acc = 0.0;
        for (int k = 0; k < m; ++k) {
            acc += q(ctx.source, k);
            if (u < acc) {
                next_source = k;
                break;
            }
        }

        const int next_estimate = delivered ? ctx.source : ctx.estimate;
        const std::int64_t next_age =
            aoce_update({ctx.source, ctx.estimate, ctx.error_age}, next_source, next_estimate,
                        std::numeric_limits<std::int64_t>::max() / 2);
        ctx.prev_source = ctx.source;
        ctx.source = next_source;
        ctx.estimate = next_estimate;
        ctx.error_age = next_age;
        ctx.delivery_age = delivered ? 1 : ctx.delivery_age + 1;
        ctx.sync_age = (next_source == next_estimate) ? 0 : ctx.sync_age + 1;
    }

    SimulationReport report;
    report.horizon = horizon;
    report.seed = seed;
    report.mean_cost = total / static_cast<double>(horizon);
    report.tx_rate = static_cast<double>(transmissions) / static_cast<double>(horizon);

    if (horizon >= n_batches * batch_len && batch_len > 1) {
        double mean = 0.0;
        for (double s : batch_sum) mean += s / static_cast<double>(batch_len);
        mean /= n_batches;
        double var = 0.0;
        for (double s : batch_sum) {
            const double d = s / static_cast<double>(batch_len) - mean;
            var += d * d;
        }
        var /= (n_batches - 1);
        const double t_quantile = 2.093;  // t distribution, 19 dof, 97.5%
        report.half_width_95 = t_quantile * std::sqrt(var / n_batches);
    } else {
        report.half_width_95 = std::numeric_limits<double>::infinity();
    }
    return report;
}

}  // namespace aoce
