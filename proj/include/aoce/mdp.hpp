#pragma once

#include <algorithm>
#include <array>
#include <concepts>
#include <cstdint>
#include <cstring>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "aoce/detail/graph.hpp"
#include "aoce/significance.hpp"
#include "aoce/source_model.hpp"

namespace aoce {

/**
 * System state: source state, remote estimate, and the age of the current
 * estimation error (consecutive slots spent in exactly this (source,
 * estimate) pair). Age 0 iff synced.
 */
struct SystemState {
    int source = 0;
    int estimate = 0;
    std::int64_t age = 0;

    bool synced() const { return source == estimate; }
    bool operator==(const SystemState&) const = default;
};

/**
 * Error-age recursion: the age increments while the error pair persists,
 * resets to 1 when the error changes, and drops to 0 on sync. `cap` bounds
 * the increment branch (pass a huge cap for the untruncated process).
 */
inline std::int64_t aoce_update(const SystemState& prev, int next_source, int next_estimate,
                                std::int64_t cap) {
    if (next_source == next_estimate) return 0;
    if (next_source == prev.source && next_estimate == prev.estimate)
        return std::min(prev.age + 1, cap);
    return 1;
}

struct Transition {
    int to = 0;
    double prob = 0.0;
};

/// Index range of one error's age ladder inside the enumerated state space.
struct ErrorBlock {
    int source = 0;
    int estimate = 0;
    int first = 0;   // index of age 1
    int length = 0;  // number of ages (cap if the source state self-transitions, else 1)
};

/**
 * Deterministic enumeration of the truncated state space: synced states
 * first (one per source state), then error blocks in lexicographic
 * (source, estimate) order with ages ascending. Errors whose source state
 * has no self-transition cannot persist and carry a single age-1 state.
 */
class StateSpace {
public:
    StateSpace(int state_count, std::vector<char> has_self_transition, int age_cap)
        : m_(state_count), cap_(age_cap), self_(std::move(has_self_transition)) {
        if (age_cap < 1) throw std::invalid_argument("StateSpace: age cap must be >= 1");
        if (static_cast<int>(self_.size()) != m_)
            throw std::invalid_argument("StateSpace: self-transition mask size mismatch");
        for (int i = 0; i < m_; ++i) states_.push_back({i, i, 0});
        for (int i = 0; i < m_; ++i)
            for (int j = 0; j < m_; ++j) {
                if (i == j) continue;
                ErrorBlock b;
                b.source = i;
                b.estimate = j;
                b.first = static_cast<int>(states_.size());
                b.length = self_[i] ? cap_ : 1;
                block_of_pair_.resize(static_cast<std::size_t>(m_) * m_, -1);
                block_of_pair_[static_cast<std::size_t>(i) * m_ + j] =
                    static_cast<int>(blocks_.size());
                blocks_.push_back(b);
                for (int d = 1; d <= b.length; ++d) states_.push_back({i, j, d});
            }
    }

    int size() const { return static_cast<int>(states_.size()); }
    int state_count() const { return m_; }
    int age_cap() const { return cap_; }
    int synced_count() const { return m_; }
    const SystemState& state(int idx) const { return states_[idx]; }
    const std::vector<SystemState>& states() const { return states_; }
    const std::vector<ErrorBlock>& error_blocks() const { return blocks_; }

    const ErrorBlock& block(int source, int estimate) const {
        int b = block_of_pair_[static_cast<std::size_t>(source) * m_ + estimate];
        if (b < 0) throw std::domain_error("StateSpace: synced pair has no error block");
        return blocks_[b];
    }

    /// Index of a state, or -1 if it is not a member of the truncated space.
    int try_index(const SystemState& s) const {
        if (s.source < 0 || s.source >= m_ || s.estimate < 0 || s.estimate >= m_) return -1;
        if (s.synced()) return s.age == 0 ? s.source : -1;
        if (s.age < 1) return -1;
        const ErrorBlock& b = blocks_[block_of_pair_[static_cast<std::size_t>(s.source) * m_ + s.estimate]];
        if (s.age > b.length) return -1;
        return b.first + static_cast<int>(s.age) - 1;
    }

    int index_of(const SystemState& s) const {
        int idx = try_index(s);
        if (idx < 0) {
            std::ostringstream os;
            os << "state (" << s.source + 1 << "," << s.estimate + 1 << "," << s.age
               << ") is not in the truncated state space";
            throw std::domain_error(os.str());
        }
        return idx;
    }

private:
    int m_;
    int cap_;
    std::vector<char> self_;
    std::vector<SystemState> states_;
    std::vector<ErrorBlock> blocks_;
    std::vector<int> block_of_pair_;
};

/**
 * Finite-state average-cost MDP over the truncated system state space.
 *
 * Kernel rows implement the controlled dynamics: without a transmission the
 * error persists (age + 1, saturating at the cap), syncs, or changes to a
 * fresh age-1 error, all driven by the source row; with a transmission the
 * same happens on failure, while success re-anchors the estimate to the
 * current source state. Synced states evolve identically under both actions.
 * Rows merge duplicate successors, are sorted by target index, and sum to 1.
 *
 * Per-stage costs are attached at build time, so solvers stay metric
 * agnostic. Immutable after construction.
 */
class TruncatedMdp {
public:
    TruncatedMdp(SourceModel source, SignificanceProfile profile, double success_prob,
                 double tx_cost, int age_cap)
        : source_(std::move(source)),
          profile_(std::move(profile)),
          ps_(success_prob),
          lambda_(tx_cost),
          space_(source_.state_count(), self_mask(source_), age_cap) {
        if (profile_.state_count() != source_.state_count())
            throw std::invalid_argument("TruncatedMdp: profile/source size mismatch");
        if (!(ps_ >= 0.0 && ps_ <= 1.0))
            throw std::invalid_argument("TruncatedMdp: success probability must be in [0,1]");
        if (!(lambda_ >= 0.0))
            throw std::invalid_argument("TruncatedMdp: transmission cost must be >= 0");
        auto report = validate(source_);
        if (!report.admissible())
            throw std::invalid_argument("TruncatedMdp: source model inadmissible: " +
                                        report.summary());
        build_kernel();
        build_costs();
    }

    int n_states() const { return space_.size(); }
    int age_cap() const { return space_.age_cap(); }
    double success_prob() const { return ps_; }
    double failure_prob() const { return 1.0 - ps_; }
    double tx_cost() const { return lambda_; }
    const SourceModel& source() const { return source_; }
    const SignificanceProfile& profile() const { return profile_; }
    const StateSpace& space() const { return space_; }
    const std::vector<ErrorBlock>& error_blocks() const { return space_.error_blocks(); }

    const std::vector<Transition>& transitions(int idx, int action) const {
        if (idx < 0 || idx >= n_states()) throw std::domain_error("TruncatedMdp: state index out of range");
        return kernel_[idx][action_index(action)];
    }

    const std::vector<Transition>& transitions(const SystemState& s, int action) const {
        return transitions(space_.index_of(s), action);
    }

    double cost(int idx, int action) const { return costs_[idx][action_index(action)]; }

    double cost(const SystemState& s, int action) const {
        return cost(space_.index_of(s), action);
    }

    /// FNV-1a over the kernel layout and probabilities; stable across runs
    /// for reproducibility logs.
    std::uint64_t kernel_checksum() const {
        std::uint64_t h = 1469598103934665603ull;
        auto mix = [&h](std::uint64_t v) {
            for (int k = 0; k < 8; ++k) {
                h ^= (v >> (8 * k)) & 0xff;
                h *= 1099511628211ull;
            }
        };
        for (int s = 0; s < n_states(); ++s)
            for (int a = 0; a < 2; ++a)
                for (const auto& t : kernel_[s][a]) {
                    mix(static_cast<std::uint64_t>(s));
                    mix(static_cast<std::uint64_t>(a));
                    mix(static_cast<std::uint64_t>(t.to));
                    std::uint64_t bits;
                    static_assert(sizeof bits == sizeof t.prob);
                    std::memcpy(&bits, &t.prob, sizeof bits);
                    mix(bits);
                }
        return h;
    }

private:
    static std::vector<char> self_mask(const SourceModel& m) {
        std::vector<char> mask(m.state_count());
        for (int i = 0; i < m.state_count(); ++i) mask[i] = m.prob(i, i) > 0.0;
        return mask;
    }

    static int action_index(int action) {
        if (action != 0 && action != 1)
            throw std::domain_error("TruncatedMdp: action must be 0 or 1");
        return action;
    }

    void add(std::vector<Transition>& row, int to, double prob) const {
        if (prob <= 0.0) return;
        row.push_back({to, prob});
    }

    static void merge_row(std::vector<Transition>& row) {
        std::sort(row.begin(), row.end(), [](const Transition& a, const Transition& b) {
            return a.to < b.to;
        });
        std::size_t w = 0;
        for (std::size_t r = 0; r < row.size(); ++r) {
            if (w > 0 && row[w - 1].to == row[r].to)
                row[w - 1].prob += row[r].prob;
            else
                row[w++] = row[r];
        }
        row.resize(w);
    }

    void build_kernel() {
        const int n = space_.size();
        const int m = source_.state_count();
        const double pf = 1.0 - ps_;
        kernel_.resize(n);
        for (int idx = 0; idx < n; ++idx) {
            const SystemState s = space_.state(idx);
            if (s.synced()) {
                const int i = s.source;
                std::vector<Transition> row;
                add(row, i, source_.prob(i, i));
                for (int k = 0; k < m; ++k)
                    if (k != i)
                        add(row, space_.try_index({k, i, 1}), source_.prob(i, k));
                merge_row(row);
                kernel_[idx][0] = row;
                kernel_[idx][1] = std::move(row);
                continue;
            }
            const int i = s.source;
            const int j = s.estimate;
            const int up = space_.try_index(
                {i, j, std::min<std::int64_t>(s.age + 1, space_.age_cap())});
            {  // stay silent: source row drives persistence / sync / error change
                std::vector<Transition> row;
                add(row, up, source_.prob(i, i));
                add(row, j, source_.prob(i, j));  // synced (j, j, 0)
                for (int k = 0; k < m; ++k)
                    if (k != i && k != j)
                        add(row, space_.try_index({k, j, 1}), source_.prob(i, k));
                merge_row(row);
                kernel_[idx][0] = std::move(row);
            }
            {  // transmit: success re-anchors the estimate, failure mirrors silence
                std::vector<Transition> row;
                add(row, i, source_.prob(i, i) * ps_);  // synced (i, i, 0)
                for (int k = 0; k < m; ++k)
                    if (k != i)
                        add(row, space_.try_index({k, i, 1}), source_.prob(i, k) * ps_);
                add(row, up, source_.prob(i, i) * pf);
                add(row, j, source_.prob(i, j) * pf);
                for (int k = 0; k < m; ++k)
                    if (k != i && k != j)
                        add(row, space_.try_index({k, j, 1}), source_.prob(i, k) * pf);
                merge_row(row);
                kernel_[idx][1] = std::move(row);
            }
        }
    }

    void build_costs() {
        costs_.resize(space_.size());
        for (int idx = 0; idx < space_.size(); ++idx) {
            const SystemState& s = space_.state(idx);
            const double c = s.synced() ? 0.0 : age_penalty(profile_, s.source, s.estimate, s.age);
            costs_[idx] = {c, c + lambda_};
        }
    }

    SourceModel source_;
    SignificanceProfile profile_;
    double ps_;
    double lambda_;
    StateSpace space_;
    std::vector<std::array<std::vector<Transition>, 2>> kernel_;
    std::vector<std::array<double, 2>> costs_;
};

/// Per-stage cost of taking `action` in state `s`: the significance-weighted
/// age penalty plus the transmission cost when transmitting.
inline double per_stage_cost(const SignificanceProfile& profile, const SystemState& s, int action,
                             double tx_cost) {
    if (action != 0 && action != 1) throw std::domain_error("per_stage_cost: action must be 0 or 1");
    if (tx_cost < 0.0) throw std::invalid_argument("per_stage_cost: transmission cost must be >= 0");
    const double c = s.synced() ? 0.0 : age_penalty(profile, s.source, s.estimate, s.age);
    return c + (action == 1 ? tx_cost : 0.0);
}

/**
 * Model concepts used by the solvers: any finite two-action average-cost
 * model with sparse kernel rows, and the structured refinement that also
 * exposes error blocks ordered by age.
 */
template <typename M>
concept AverageCostModel = requires(const M& m, int s, int a) {
    { m.n_states() } -> std::convertible_to<int>;
    { m.transitions(s, a) } -> std::convertible_to<const std::vector<Transition>&>;
    { m.cost(s, a) } -> std::convertible_to<double>;
};

template <typename M>
concept StructuredModel = AverageCostModel<M> && requires(const M& m) {
    { m.error_blocks() } -> std::convertible_to<const std::vector<ErrorBlock>&>;
};

namespace detail {

/// Support adjacency of the chain induced by a fixed action choice.
template <AverageCostModel M, typename ActionFn>
std::vector<std::vector<int>> induced_adjacency(const M& model, ActionFn action_of) {
    std::vector<std::vector<int>> adj(model.n_states());
    for (int s = 0; s < model.n_states(); ++s)
        for (const auto& t : model.transitions(s, action_of(s)))
            adj[s].push_back(t.to);
    return adj;
}

}  // namespace detail

/// True iff the always-transmit chain is one single strongly connected
/// component over the whole truncated space (finite surrogate of positive
/// recurrence; fails truthfully e.g. for a perfect channel, where ages >= 2
/// are unreachable).
inline bool check_recurrence_always_transmit(const TruncatedMdp& mdp) {
    auto adj = detail::induced_adjacency(mdp, [](int) { return 1; });
    const auto scc = detail::strongly_connected_components(adj);
    return scc.count == 1;
}

}  // namespace aoce
