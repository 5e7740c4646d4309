#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace aoce {

/// Absolute tolerance for stochasticity and symmetry checks. Configs carry
/// exact decimals, so anything looser would hide real input errors.
inline constexpr double kStochasticTol = 1e-12;

/**
 * Finite-state homogeneous Markov source.
 *
 * Holds the transition matrix and the (purely informational) set of alarm
 * states used to label estimation errors in reports. Construction rejects
 * structurally malformed input (non-square matrix, negative entries, fewer
 * than two states); admissibility questions such as row-stochasticity and
 * irreducibility are answered by validate(), which reports rather than
 * throws.
 *
 * Immutable after construction; safe to share across threads.
 */
class SourceModel {
public:
    explicit SourceModel(Eigen::MatrixXd transition, std::vector<int> alarm_states = {0})
        : q_(std::move(transition)), alarms_(std::move(alarm_states)) {
        if (q_.rows() != q_.cols())
            throw std::invalid_argument("SourceModel: transition matrix must be square");
        if (q_.rows() < 2)
            throw std::invalid_argument("SourceModel: need at least 2 states");
        for (int i = 0; i < q_.rows(); ++i)
            for (int j = 0; j < q_.cols(); ++j) {
                if (!std::isfinite(q_(i, j)))
                    throw std::invalid_argument("SourceModel: non-finite transition probability");
                if (q_(i, j) < 0.0)
                    throw std::invalid_argument("SourceModel: negative transition probability");
            }
        std::sort(alarms_.begin(), alarms_.end());
        alarms_.erase(std::unique(alarms_.begin(), alarms_.end()), alarms_.end());
        for (int a : alarms_)
            if (a < 0 || a >= state_count())
                throw std::invalid_argument("SourceModel: alarm state out of range");
    }

    int state_count() const { return static_cast<int>(q_.rows()); }
    const Eigen::MatrixXd& transition() const { return q_; }
    double prob(int i, int j) const { return q_(i, j); }
    const std::vector<int>& alarm_states() const { return alarms_; }

    bool is_alarm(int i) const {
        return std::binary_search(alarms_.begin(), alarms_.end(), i);
    }

private:
    Eigen::MatrixXd q_;
    std::vector<int> alarms_;
};

/**
 * Outcome of admissibility checks. `violations` break admissibility;
 * `warnings` flag unusual but usable structure (a source with no
 * self-transitions has a finite system state space and needs no truncation).
 */
struct ValidationReport {
    std::vector<std::string> violations;
    std::vector<std::string> warnings;

    bool admissible() const { return violations.empty(); }

    std::string summary() const {
        std::ostringstream os;
        if (admissible()) os << "admissible";
        for (const auto& v : violations) os << "violation: " << v << "\n";
        for (const auto& w : warnings) os << "warning: " << w << "\n";
        return os.str();
    }
};

/// Partition of the state set by presence of a self-transition. Errors whose
/// source state has Q_ii > 0 can persist and carry unbounded holding times;
/// all other errors last exactly one slot.
struct StateClassification {
    std::vector<int> with_self_transition;     // Q_ii > 0
    std::vector<int> without_self_transition;  // Q_ii == 0
};

namespace detail {

// Strong connectivity of the support digraph by double BFS (forward from 0,
// backward from 0). Exact on the support pattern, no spectral machinery.
inline bool support_strongly_connected(const Eigen::MatrixXd& q) {
    const int n = static_cast<int>(q.rows());
    auto bfs = [&](bool forward) {
        std::vector<char> seen(n, 0);
        std::vector<int> stack{0};
        seen[0] = 1;
        while (!stack.empty()) {
            int v = stack.back();
            stack.pop_back();
            for (int w = 0; w < n; ++w) {
                double p = forward ? q(v, w) : q(w, v);
                if (p > 0.0 && !seen[w]) {
                    seen[w] = 1;
                    stack.push_back(w);
                }
            }
        }
        return seen;
    };
    auto fwd = bfs(true);
    auto bwd = bfs(false);
    for (int v = 0; v < n; ++v)
        if (!fwd[v] || !bwd[v]) return false;
    return true;
}

}  // namespace detail

/// Checks row-stochasticity, entry range, irreducibility of the support
/// graph, and flags the absence of self-transitions. Empty violation list
/// iff the model is admissible.
inline ValidationReport validate(const SourceModel& model) {
    ValidationReport report;
    const auto& q = model.transition();
    const int n = model.state_count();
    for (int i = 0; i < n; ++i) {
        double row_sum = 0.0;
        for (int j = 0; j < n; ++j) {
            row_sum += q(i, j);
            if (q(i, j) > 1.0 + kStochasticTol) {
                std::ostringstream os;
                os << "entry (" << i + 1 << "," << j + 1 << ") = " << q(i, j) << " exceeds 1";
                report.violations.push_back(os.str());
            }
        }
        if (std::abs(row_sum - 1.0) > kStochasticTol) {
            std::ostringstream os;
            os << "row " << i + 1 << " sums to " << row_sum << " (expected 1)";
            report.violations.push_back(os.str());
        }
    }
    if (!detail::support_strongly_connected(q))
        report.violations.push_back("transition matrix is not irreducible");
    bool any_self = false;
    for (int i = 0; i < n; ++i) any_self |= q(i, i) > 0.0;
    if (!any_self)
        report.warnings.push_back(
            "no state has a self-transition; every error lasts one slot and the "
            "system state space is finite without truncation");
    return report;
}

inline StateClassification classify_states(const SourceModel& model) {
    StateClassification c;
    for (int i = 0; i < model.state_count(); ++i) {
        if (model.prob(i, i) > 0.0)
            c.with_self_transition.push_back(i);
        else
            c.without_self_transition.push_back(i);
    }
    return c;
}

/**
 * Source with uniform state-change probability p and self-transition
 * probability 1 - (M-1)p. Requires both probabilities in (0,1).
 */
inline SourceModel make_symmetric_source(int state_count, double change_prob,
                                         std::vector<int> alarm_states = {0}) {
    if (state_count < 2)
        throw std::invalid_argument("make_symmetric_source: need at least 2 states");
    const double stay = 1.0 - (state_count - 1) * change_prob;
    if (!(change_prob > 0.0 && change_prob < 1.0) || !(stay > 0.0 && stay < 1.0))
        throw std::invalid_argument(
            "make_symmetric_source: change probability infeasible, need p and "
            "1-(M-1)p both in (0,1)");
    Eigen::MatrixXd q = Eigen::MatrixXd::Constant(state_count, state_count, change_prob);
    q.diagonal().setConstant(stay);
    return SourceModel(std::move(q), std::move(alarm_states));
}

/// True iff the matrix has the equal-change-probability form within
/// kStochasticTol: one value on the whole diagonal, one off the diagonal.
inline bool is_symmetric(const SourceModel& model) {
    const auto& q = model.transition();
    const int n = model.state_count();
    const double off = q(0, 1);
    const double diag = q(0, 0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double want = (i == j) ? diag : off;
            if (std::abs(q(i, j) - want) > kStochasticTol) return false;
        }
    return true;
}

}  // namespace aoce
