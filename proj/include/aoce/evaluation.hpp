#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "aoce/mdp.hpp"
#include "aoce/policy.hpp"
#include "aoce/solvers.hpp"

namespace aoce {

/// Stationary distribution restricted to one recurrent class; entries off
/// the support are zero.
struct StationaryDistribution {
    std::vector<double> probability;  // full-length
    std::vector<int> support;
};

/**
 * Stationary distribution of the chain a policy induces, on the single
 * recurrent class reachable from `start_state`. Errors with the recurrent
 * structure listed when several classes are reachable.
 */
template <AverageCostModel M>
StationaryDistribution stationary_distribution(const M& model, const Policy& policy,
                                               int start_state = 0) {
    auto eval = evaluate_policy_multichain(model, policy);
    auto inside = detail::reachable_recurrent_classes(model, policy, start_state, eval);
    if (inside.size() != 1) throw EvaluationError(detail::describe_classes(inside));
    StationaryDistribution out;
    out.probability.assign(model.n_states(), 0.0);
    for (std::size_t k = 0; k < eval.recurrent_classes.size(); ++k) {
        if (eval.recurrent_classes[k].front() != inside.front().front()) continue;
        for (std::size_t q = 0; q < eval.recurrent_classes[k].size(); ++q) {
            const int s = eval.recurrent_classes[k][q];
            out.probability[s] = eval.class_stationary[k][q];
            out.support.push_back(s);
        }
    }
    return out;
}

/// Long-run average per-stage cost under the policy, from the default start.
template <AverageCostModel M>
double average_cost_exact(const M& model, const Policy& policy, int start_state = 0) {
    auto mu = stationary_distribution(model, policy, start_state);
    double total = 0.0;
    for (int s : mu.support) total += mu.probability[s] * model.cost(s, policy(s));
    return total;
}

/// Upper bound on one error's contribution to the truncation loss.
struct TruncationGapBound {
    int source = 0;
    int estimate = 0;
    double bound = 0.0;
};

/**
 * Per-error upper bounds on the cost difference between the untruncated
 * process and its truncation, for a given switching policy. The boundary
 * state's untruncated stationary mass is reconstructed from the age-1 mass
 * (climb probability Q_ii below the threshold, Q_ii p_f above it), and the
 * penalty-overshoot series sum_k (Q_ii p_f)^k (g(k + N) - g(N)) is summed
 * until the geometric tail falls below 1e-12. Throws when the series fails
 * the ratio test.
 */
inline std::vector<TruncationGapBound> truncation_gap_bound(const TruncatedMdp& mdp,
                                                            const SwitchingPolicy& thresholds) {
    const int cap = mdp.age_cap();
    const double pf = mdp.failure_prob();
    auto mu = stationary_distribution(mdp, expand(thresholds, mdp));
    std::vector<TruncationGapBound> out;
    for (const auto& b : mdp.error_blocks()) {
        if (b.length < cap) continue;  // single-slot errors have no truncated tail
        const int i = b.source;
        const int j = b.estimate;
        const double qii = mdp.source().prob(i, i);
        const double hold = qii * pf;
        const auto& g = mdp.profile().age_function(i, j);
        const double ratio_limit = hold * g.growth_ratio_limit();
        if (!(ratio_limit < 1.0)) {
            std::ostringstream os;
            os << "truncation_gap_bound: series for error (" << i + 1 << "," << j + 1
               << ") diverges (Q_ii p_f * growth ratio = " << ratio_limit << " >= 1)";
            throw std::domain_error(os.str());
        }
        const std::int64_t tau =
            std::min<std::int64_t>(thresholds.threshold(i, j), static_cast<std::int64_t>(cap));
        const double mu1 = mu.probability[b.first];
        const double mu_boundary =
            mu1 * std::pow(qii, static_cast<double>(tau - 1)) *
            std::pow(hold, static_cast<double>(cap - tau));

        double series = 0.0;
        double weight = 1.0;  // (Q_ii p_f)^k
        const double g_cap = g(cap);
        for (std::int64_t k = 1; k < 100000; ++k) {
            weight *= hold;
            const double term = weight * (g(k + cap) - g_cap);
            series += term;
            if (term < 1e-12 * (1.0 - ratio_limit) && k > 4) break;
        }
        out.push_back({i, j, mu_boundary * mdp.profile().weight(i, j) * series});
    }
    return out;
}

struct TruncationSweepPoint {
    int age_cap = 0;
    double average_cost = 0.0;
};

struct TruncationSweepResult {
    std::vector<TruncationSweepPoint> points;
    /// Fitted geometric decay ratio of |L(N) - L(N_max)| over the usable
    /// points; empty when fewer than two gaps sit above the noise floor.
    std::optional<double> fitted_ratio;
    double theoretical_ratio = 0.0;  // max over self-transitioning states of Q_ii p_f
    double noise_floor = 0.0;
};

/**
 * Solves the model at each truncation size and fits the geometric rate at
 * which the optimal cost approaches its large-N limit. Refuses configurations
 * that fail the bounded-cost existence check.
 */
inline TruncationSweepResult truncation_sweep(const SourceModel& source,
                                              const SignificanceProfile& profile,
                                              double success_prob, double tx_cost,
                                              const std::vector<int>& age_caps,
                                              long max_iterations = 1000) {
    if (age_caps.empty()) throw std::invalid_argument("truncation_sweep: empty size list");
    auto existence = check_existence(profile, source, 1.0 - success_prob);
    if (!existence.pass)
        throw std::domain_error("truncation_sweep: existence check failed\n" + existence.summary());

    TruncationSweepResult out;
    for (int cap : age_caps) {
        TruncatedMdp mdp(source, profile, success_prob, tx_cost, cap);
        auto solved = structured_policy_iteration(mdp, 0, max_iterations);
        out.points.push_back({cap, solved.average_cost});
    }
    for (int i = 0; i < source.state_count(); ++i)
        out.theoretical_ratio =
            std::max(out.theoretical_ratio, source.prob(i, i) * (1.0 - success_prob));

    // Log-linear fit of the gaps to the largest-cap solve; gaps at or below
    // the linear-solver noise floor are excluded.
    int argmax = 0;
    for (std::size_t k = 0; k < out.points.size(); ++k)
        if (out.points[k].age_cap > out.points[argmax].age_cap) argmax = static_cast<int>(k);
    const double l_ref = out.points[argmax].average_cost;
    out.noise_floor = 1e-9 * (1.0 + std::abs(l_ref));
    std::vector<double> xs, ys;
    for (std::size_t k = 0; k < out.points.size(); ++k) {
        if (static_cast<int>(k) == argmax) continue;
        const double gap = std::abs(out.points[k].average_cost - l_ref);
        if (gap <= out.noise_floor) continue;
        xs.push_back(static_cast<double>(out.points[k].age_cap));
        ys.push_back(std::log(gap));
    }
    if (xs.size() >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t k = 0; k < xs.size(); ++k) {
            sx += xs[k];
            sy += ys[k];
            sxx += xs[k] * xs[k];
            sxy += xs[k] * ys[k];
        }
        const double n = static_cast<double>(xs.size());
        const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        out.fitted_ratio = std::exp(slope);
    }
    return out;
}

}  // namespace aoce
