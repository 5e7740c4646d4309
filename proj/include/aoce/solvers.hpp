#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "aoce/detail/graph.hpp"
#include "aoce/mdp.hpp"
#include "aoce/policy.hpp"

namespace aoce {

class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EvaluationError : public SolverError {
public:
    using SolverError::SolverError;
};

namespace detail {

inline Eigen::VectorXd solve_checked(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                     const char* context) {
    Eigen::VectorXd x = a.partialPivLu().solve(b);
    const double scale = 1.0 + b.lpNorm<Eigen::Infinity>();
    if (!x.allFinite() || (a * x - b).lpNorm<Eigen::Infinity>() > 1e-6 * scale) {
        std::ostringstream os;
        os << context << ": linear system is singular or ill-conditioned";
        throw EvaluationError(os.str());
    }
    return x;
}

}  // namespace detail

/**
 * Exact evaluation of a stationary deterministic policy on an arbitrary
 * finite chain, recurrent structure included.
 *
 * Per recurrent class: stationary distribution, class gain, and the in-class
 * bias solution of  h + g = l + P h  normalized at the class's first state.
 * Transient states receive their exact gain (absorption-weighted class
 * gains) and bias by back-substitution through (I - P_TT). For a unichain
 * policy this reduces to the usual single-gain evaluation with exact bias on
 * transient states.
 */
struct MultichainEvaluation {
    std::vector<double> gain;
    std::vector<double> bias;
    std::vector<std::vector<int>> recurrent_classes;
    std::vector<std::vector<double>> class_stationary;  // aligned with recurrent_classes

    bool unichain() const { return recurrent_classes.size() == 1; }
};

template <AverageCostModel M>
MultichainEvaluation evaluate_policy_multichain(const M& model, const Policy& policy) {
    const int n = model.n_states();
    if (policy.size() != n)
        throw std::invalid_argument("evaluate_policy_multichain: policy size mismatch");

    MultichainEvaluation out;
    out.gain.assign(n, 0.0);
    out.bias.assign(n, 0.0);

    auto adj = detail::induced_adjacency(model, [&](int s) { return policy(s); });
    out.recurrent_classes = detail::recurrent_classes(adj);

    std::vector<char> in_recurrent(n, 0);
    for (const auto& cls : out.recurrent_classes) {
        const int m = static_cast<int>(cls.size());
        std::vector<int> pos(n, -1);
        for (int q = 0; q < m; ++q) pos[cls[q]] = q;

        Eigen::MatrixXd p = Eigen::MatrixXd::Zero(m, m);
        Eigen::VectorXd l(m);
        for (int q = 0; q < m; ++q) {
            const int s = cls[q];
            l[q] = model.cost(s, policy(s));
            for (const auto& t : model.transitions(s, policy(s))) p(q, pos[t.to]) += t.prob;
        }

        // stationary: mu^T P = mu^T, sum mu = 1
        Eigen::MatrixXd a = p.transpose() - Eigen::MatrixXd::Identity(m, m);
        a.row(m - 1).setOnes();
        Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
        b[m - 1] = 1.0;
        Eigen::VectorXd mu = detail::solve_checked(a, b, "stationary distribution");

        const double g = mu.dot(l);

        // bias: (I - P) h = l - g with h = 0 at the class's first state
        Eigen::MatrixXd a2 = Eigen::MatrixXd::Identity(m, m) - p;
        Eigen::VectorXd b2 = l.array() - g;
        a2.row(0).setZero();
        a2(0, 0) = 1.0;
        b2[0] = 0.0;
        Eigen::VectorXd h = detail::solve_checked(a2, b2, "bias evaluation");

        std::vector<double> mu_out(m);
        for (int q = 0; q < m; ++q) {
            const int s = cls[q];
            out.gain[s] = g;
            out.bias[s] = h[q];
            in_recurrent[s] = 1;
            mu_out[q] = mu[q];
        }
        out.class_stationary.push_back(std::move(mu_out));
    }

    std::vector<int> transient;
    for (int s = 0; s < n; ++s)
        if (!in_recurrent[s]) transient.push_back(s);
    if (!transient.empty()) {
        const int m = static_cast<int>(transient.size());
        std::vector<int> pos(n, -1);
        for (int q = 0; q < m; ++q) pos[transient[q]] = q;

        Eigen::MatrixXd a = Eigen::MatrixXd::Identity(m, m);
        Eigen::VectorXd bg = Eigen::VectorXd::Zero(m);
        for (int q = 0; q < m; ++q) {
            const int s = transient[q];
            for (const auto& t : model.transitions(s, policy(s))) {
                if (pos[t.to] >= 0)
                    a(q, pos[t.to]) -= t.prob;
                else
                    bg[q] += t.prob * out.gain[t.to];
            }
        }
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
        Eigen::VectorXd gt = lu.solve(bg);
        if (!gt.allFinite())
            throw EvaluationError("transient gain evaluation failed");
        for (int q = 0; q < m; ++q) out.gain[transient[q]] = gt[q];

        Eigen::VectorXd bh(m);
        for (int q = 0; q < m; ++q) {
            const int s = transient[q];
            double through = 0.0;
            for (const auto& t : model.transitions(s, policy(s)))
                if (pos[t.to] < 0) through += t.prob * out.bias[t.to];
            bh[q] = model.cost(s, policy(s)) - out.gain[s] + through;
        }
        Eigen::VectorXd ht = lu.solve(bh);
        if (!ht.allFinite())
            throw EvaluationError("transient bias evaluation failed");
        for (int q = 0; q < m; ++q) out.bias[transient[q]] = ht[q];
    }
    return out;
}

namespace detail {

/// Recurrent classes reachable from `start` under the policy's chain.
template <AverageCostModel M>
std::vector<std::vector<int>> reachable_recurrent_classes(const M& model, const Policy& policy,
                                                          int start,
                                                          const MultichainEvaluation& eval) {
    auto adj = induced_adjacency(model, [&](int s) { return policy(s); });
    auto seen = reachable_from(adj, start);
    std::vector<std::vector<int>> inside;
    for (const auto& cls : eval.recurrent_classes)
        if (seen[cls.front()]) inside.push_back(cls);
    return inside;
}

inline std::string describe_classes(const std::vector<std::vector<int>>& classes) {
    std::ostringstream os;
    os << classes.size() << " recurrent classes reachable from the reference state (sizes:";
    for (const auto& c : classes) os << " " << c.size();
    os << "); the policy closes parts of the state space (e.g. estimates frozen by "
          "never-transmit rules), so a single average cost is ill-defined";
    return os.str();
}

}  // namespace detail

struct PolicyValue {
    double average_cost = 0.0;
    std::vector<double> h;  // relative values, h[s_ref] = 0
};

/**
 * Scalar policy evaluation: the average cost starting from `s_ref` and
 * relative values normalized there. Requires exactly one recurrent class to
 * be reachable from `s_ref`; otherwise throws EvaluationError naming the
 * recurrent structure.
 */
template <AverageCostModel M>
PolicyValue policy_evaluation(const M& model, const Policy& policy, int s_ref = 0) {
    auto eval = evaluate_policy_multichain(model, policy);
    if (!eval.unichain()) {
        auto inside = detail::reachable_recurrent_classes(model, policy, s_ref, eval);
        if (inside.size() != 1) throw EvaluationError(detail::describe_classes(inside));
    }
    PolicyValue out;
    out.average_cost = eval.gain[s_ref];
    out.h = std::move(eval.bias);
    const double shift = out.h[s_ref];
    for (double& v : out.h) v -= shift;
    return out;
}

struct SolveOptions {
    double tol = 1e-10;       // span tolerance (RVI) / Bellman residual target
    double rel_tol = 0.0;     // extra tolerance proportional to the cost scale
    long max_iterations = 200000;
};

struct SolveResult {
    double average_cost = 0.0;
    std::vector<double> h;  // relative values, h[s_ref] = 0
    Policy policy;
    long iterations = 0;
    double residual = 0.0;       // final convergence measure
    long bellman_backups = 0;    // states visited in improvement / update sweeps
};

namespace detail {

template <AverageCostModel M>
double action_value(const M& model, const std::vector<double>& h, int s, int a) {
    double v = model.cost(s, a);
    for (const auto& t : model.transitions(s, a)) v += t.prob * h[t.to];
    return v;
}

/// Greedy action under relative values; exact ties prefer silence.
template <AverageCostModel M>
int greedy_action(const M& model, const std::vector<double>& h, int s) {
    return action_value(model, h, s, 1) < action_value(model, h, s, 0) ? 1 : 0;
}

/// Lexicographic (gain backup, bias backup) comparison of the two actions.
/// Gain backups differ only when actions steer into recurrent classes of
/// different long-run cost; with a unichain evaluation they tie and the
/// comparison is the plain relative-value one. Ties prefer silence.
template <AverageCostModel M>
int greedy_action_multichain(const M& model, const MultichainEvaluation& eval, int s) {
    double g0 = 0.0, g1 = 0.0;
    for (const auto& t : model.transitions(s, 0)) g0 += t.prob * eval.gain[t.to];
    for (const auto& t : model.transitions(s, 1)) g1 += t.prob * eval.gain[t.to];
    const double gain_tol = 1e-9 * (1.0 + std::abs(g0) + std::abs(g1));
    if (g1 < g0 - gain_tol) return 1;
    if (g0 < g1 - gain_tol) return 0;
    return action_value(model, eval.bias, s, 1) < action_value(model, eval.bias, s, 0) ? 1 : 0;
}

/// Max Bellman residual of (L, h, policy) over states reachable from s_ref.
template <AverageCostModel M>
double bellman_residual(const M& model, double average_cost, const std::vector<double>& h,
                        const Policy& policy, int s_ref) {
    auto adj = induced_adjacency(model, [&](int s) { return policy(s); });
    auto seen = reachable_from(adj, s_ref);
    double worst = 0.0;
    for (int s = 0; s < model.n_states(); ++s) {
        if (!seen[s]) continue;
        const double best =
            std::min(action_value(model, h, s, 0), action_value(model, h, s, 1));
        worst = std::max(worst, std::abs(average_cost + h[s] - best));
    }
    return worst;
}

}  // namespace detail

/**
 * Relative value iteration: repeatedly applies the Bellman operator and
 * renormalizes at the reference state, stopping once the span of successive
 * differences falls below tol (+ rel_tol * |cost|). Returns the greedy
 * policy of the converged values.
 */
template <AverageCostModel M>
SolveResult relative_value_iteration(const M& model, int s_ref = 0, SolveOptions opts = {}) {
    const int n = model.n_states();
    std::vector<double> h(n, 0.0), next(n, 0.0);
    SolveResult out;
    double cost_estimate = 0.0;
    for (long it = 1; it <= opts.max_iterations; ++it) {
        for (int s = 0; s < n; ++s)
            next[s] = std::min(detail::action_value(model, h, s, 0),
                               detail::action_value(model, h, s, 1));
        out.bellman_backups += 2L * n;
        cost_estimate = next[s_ref];
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (int s = 0; s < n; ++s) {
            const double d = next[s] - h[s];
            lo = std::min(lo, d);
            hi = std::max(hi, d);
        }
        const double ref = next[s_ref];
        for (int s = 0; s < n; ++s) h[s] = next[s] - ref;
        out.iterations = it;
        out.residual = hi - lo;
        if (out.residual <= opts.tol + opts.rel_tol * std::abs(cost_estimate)) {
            out.average_cost = cost_estimate;
            out.h = h;
            Policy pol(n, 0);
            for (int s = 0; s < n; ++s) pol.actions[s] = static_cast<std::uint8_t>(detail::greedy_action(model, h, s));
            out.policy = std::move(pol);
            return out;
        }
    }
    std::ostringstream os;
    os << "relative value iteration did not converge in " << opts.max_iterations
       << " iterations (last span " << out.residual << ")";
    throw SolverError(os.str());
}

/**
 * Howard policy iteration over all states with exact multichain evaluation.
 * Used directly for the auxiliary age models and as a cross-check solver.
 */
template <AverageCostModel M>
SolveResult classical_policy_iteration(const M& model, Policy policy, int s_ref = 0,
                                       long max_iterations = 1000) {
    const int n = model.n_states();
    if (policy.size() != n)
        throw std::invalid_argument("classical_policy_iteration: policy size mismatch");
    for (long it = 1; it <= max_iterations; ++it) {
        auto eval = evaluate_policy_multichain(model, policy);
        Policy next(n, 0);
        for (int s = 0; s < n; ++s)
            next.actions[s] =
                static_cast<std::uint8_t>(detail::greedy_action_multichain(model, eval, s));
        if (next == policy) {
            SolveResult out;
            out.average_cost = eval.gain[s_ref];
            out.h = std::move(eval.bias);
            const double shift = out.h[s_ref];
            for (double& v : out.h) v -= shift;
            out.policy = std::move(policy);
            out.iterations = it;
            out.bellman_backups += static_cast<long>(n) * it;
            out.residual =
                detail::bellman_residual(model, out.average_cost, out.h, out.policy, s_ref);
            return out;
        }
        policy = std::move(next);
    }
    throw SolverError("classical policy iteration did not converge");
}

/**
 * Structured policy iteration. The improvement sweep walks each error's age
 * ladder upward and stops at the first age where transmitting wins; all
 * higher ages transmit without further backups, so the per-iteration work
 * scales with the threshold surface rather than the state count. Synced
 * states stay silent throughout. Terminates at the policy fixed point.
 */
template <StructuredModel M>
SolveResult structured_policy_iteration(const M& model, int s_ref, const SwitchingPolicy& initial,
                                        long max_iterations = 1000) {
    const int n = model.n_states();
    Policy policy = expand(initial, model);
    SolveResult out;
    for (long it = 1; it <= max_iterations; ++it) {
        auto eval = evaluate_policy_multichain(model, policy);
        Policy next(n, 0);
        for (const auto& b : model.error_blocks()) {
            for (int d = 1; d <= b.length; ++d) {
                const int s = b.first + d - 1;
                ++out.bellman_backups;
                if (detail::greedy_action_multichain(model, eval, s) == 1) {
                    for (int dd = d; dd <= b.length; ++dd) next.actions[b.first + dd - 1] = 1;
                    break;
                }
            }
        }
        out.iterations = it;
        if (next == policy) {
            out.average_cost = eval.gain[s_ref];
            out.h = std::move(eval.bias);
            const double shift = out.h[s_ref];
            for (double& v : out.h) v -= shift;
            out.policy = std::move(policy);
            out.residual =
                detail::bellman_residual(model, out.average_cost, out.h, out.policy, s_ref);
            return out;
        }
        policy = std::move(next);
    }
    throw SolverError("structured policy iteration did not converge");
}

template <StructuredModel M>
SolveResult structured_policy_iteration(const M& model, int s_ref = 0, long max_iterations = 1000) {
    int state_count = 0;
    for (const auto& b : model.error_blocks())
        state_count = std::max({state_count, b.source + 1, b.estimate + 1});
    return structured_policy_iteration(
        model, s_ref, SwitchingPolicy::always_transmit_on_error(state_count), max_iterations);
}

struct BruteForceResult {
    SwitchingPolicy thresholds;
    double average_cost = 0.0;
    long evaluated = 0;
};

/**
 * Exhaustive threshold-matrix search, the oracle the iterative solvers are
 * validated against. Candidates per error are {1..min(tau_max, ladder
 * length)} plus never; refuses when the combination count exceeds 1e6.
 */
inline BruteForceResult brute_force_switching_search(const TruncatedMdp& mdp, int tau_max,
                                                     int s_ref = 0) {
    const auto& blocks = mdp.error_blocks();
    const int m = mdp.source().state_count();
    std::vector<std::vector<std::int64_t>> candidates;
    double combos = 1.0;
    for (const auto& b : blocks) {
        std::vector<std::int64_t> c;
        for (int d = 1; d <= std::min(tau_max, b.length); ++d) c.push_back(d);
        c.push_back(SwitchingPolicy::never);
        combos *= static_cast<double>(c.size());
        candidates.push_back(std::move(c));
    }
    if (combos > 1e6) {
        std::ostringstream os;
        os << "brute_force_switching_search: " << combos << " threshold combinations exceed the 1e6 guard";
        throw std::invalid_argument(os.str());
    }

    std::vector<std::size_t> pick(blocks.size(), 0);
    BruteForceResult best{SwitchingPolicy(m), std::numeric_limits<double>::infinity(), 0};
    while (true) {
        SwitchingPolicy sw(m);
        for (std::size_t k = 0; k < blocks.size(); ++k) {
            const std::int64_t tau = candidates[k][pick[k]];
            if (tau != SwitchingPolicy::never)
                sw.set_threshold(blocks[k].source, blocks[k].estimate, tau);
        }
        auto eval = evaluate_policy_multichain(mdp, expand(sw, mdp));
        ++best.evaluated;
        if (eval.gain[s_ref] < best.average_cost) {
            best.average_cost = eval.gain[s_ref];
            best.thresholds = sw;
        }
        std::size_t k = 0;
        while (k < pick.size() && ++pick[k] == candidates[k].size()) pick[k++] = 0;
        if (k == pick.size()) break;
    }
    return best;
}

}  // namespace aoce
