#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "aoce/mdp.hpp"

namespace aoce {

/// Total deterministic map from state indices to {0, 1}.
struct Policy {
    std::vector<std::uint8_t> actions;

    Policy() = default;
    explicit Policy(std::vector<std::uint8_t> a) : actions(std::move(a)) {}
    Policy(int n_states, int action) : actions(static_cast<std::size_t>(n_states), static_cast<std::uint8_t>(action)) {}

    int operator()(int idx) const { return actions[idx]; }
    int size() const { return static_cast<int>(actions.size()); }
    bool operator==(const Policy&) const = default;
};

/**
 * Compressed per-error threshold form: transmit in error (i, j) once its age
 * reaches tau(i, j); `never` disables transmission for that error. Synced
 * pairs (the diagonal) are always silent.
 */
class SwitchingPolicy {
public:
    static constexpr std::int64_t never = std::numeric_limits<std::int64_t>::max();

    explicit SwitchingPolicy(int state_count)
        : m_(state_count), tau_(static_cast<std::size_t>(state_count) * state_count, never) {
        if (state_count < 2) throw std::invalid_argument("SwitchingPolicy: need at least 2 states");
    }

    static SwitchingPolicy uniform(int state_count, std::int64_t tau) {
        SwitchingPolicy sw(state_count);
        for (int i = 0; i < state_count; ++i)
            for (int j = 0; j < state_count; ++j)
                if (i != j) sw.set_threshold(i, j, tau);
        return sw;
    }

    static SwitchingPolicy always_transmit_on_error(int state_count) {
        return uniform(state_count, 1);
    }

    int state_count() const { return m_; }

    std::int64_t threshold(int i, int j) const {
        check_pair(i, j);
        return tau_[static_cast<std::size_t>(i) * m_ + j];
    }

    void set_threshold(int i, int j, std::int64_t tau) {
        check_pair(i, j);
        if (i == j) throw std::invalid_argument("SwitchingPolicy: diagonal is fixed to never");
        if (tau < 1) throw std::invalid_argument("SwitchingPolicy: threshold must be >= 1");
        tau_[static_cast<std::size_t>(i) * m_ + j] = tau;
    }

    bool operator==(const SwitchingPolicy&) const = default;

private:
    void check_pair(int i, int j) const {
        if (i < 0 || i >= m_ || j < 0 || j >= m_)
            throw std::invalid_argument("SwitchingPolicy: pair out of range");
    }

    int m_;
    std::vector<std::int64_t> tau_;
};

/**
 * Expands thresholds into a total policy on the model's state space:
 * transmit iff the state's error age is at or past its threshold. Thresholds
 * beyond an error block's age range behave like `never`.
 */
template <StructuredModel M>
Policy expand(const SwitchingPolicy& sw, const M& model) {
    Policy pol(model.n_states(), 0);
    for (const auto& b : model.error_blocks()) {
        const std::int64_t tau = sw.threshold(b.source, b.estimate);
        for (int d = 1; d <= b.length; ++d)
            if (tau != SwitchingPolicy::never && d >= tau)
                pol.actions[b.first + d - 1] = 1;
    }
    return pol;
}

/// Result of scanning a policy for the switching structure. When the policy
/// is not monotone in age on some error, `witness` holds the first state
/// whose action drops back to silence above a transmitting age.
struct ThresholdExtraction {
    bool is_switching = false;
    SwitchingPolicy thresholds;
    SystemState witness;
};

template <StructuredModel M>
ThresholdExtraction extract_thresholds(const Policy& policy, const M& model, int state_count) {
    ThresholdExtraction out{true, SwitchingPolicy(state_count), {}};
    for (const auto& b : model.error_blocks()) {
        std::int64_t tau = SwitchingPolicy::never;
        for (int d = 1; d <= b.length; ++d) {
            const int a = policy(b.first + d - 1);
            if (a == 1 && tau == SwitchingPolicy::never) tau = d;
            if (a == 0 && tau != SwitchingPolicy::never) {
                out.is_switching = false;
                out.witness = {b.source, b.estimate, d};
                return out;
            }
        }
        if (tau != SwitchingPolicy::never) out.thresholds.set_threshold(b.source, b.estimate, tau);
    }
    return out;
}

inline ThresholdExtraction extract_thresholds(const Policy& policy, const TruncatedMdp& mdp) {
    return extract_thresholds(policy, mdp, mdp.source().state_count());
}

enum class BaselineKind {
    randomized,
    periodic,
    reactive,
    error_triggered,
    threshold,
    distortion_proxy,
    aoi_reference,
    aoii_reference,
};

/// Parameters for the rule-based comparison policies.
struct BaselineSpec {
    BaselineKind kind = BaselineKind::error_triggered;
    double tx_prob = 1.0;            // randomized
    std::int64_t period = 1;         // periodic
    std::int64_t age_threshold = 1;  // threshold

    static BaselineSpec randomized(double p) {
        if (p < 0.0 || p > 1.0)
            throw std::invalid_argument("randomized baseline: probability must be in [0,1]");
        BaselineSpec s;
        s.kind = BaselineKind::randomized;
        s.tx_prob = p;
        return s;
    }
    static BaselineSpec periodic(std::int64_t d) {
        if (d < 1) throw std::invalid_argument("periodic baseline: period must be >= 1");
        BaselineSpec s;
        s.kind = BaselineKind::periodic;
        s.period = d;
        return s;
    }
    static BaselineSpec threshold(std::int64_t age_threshold) {
        if (age_threshold < 1)
            throw std::invalid_argument("threshold baseline: threshold must be >= 1");
        BaselineSpec s;
        s.kind = BaselineKind::threshold;
        s.age_threshold = age_threshold;
        return s;
    }
    static BaselineSpec of(BaselineKind kind) {
        BaselineSpec s;
        s.kind = kind;
        return s;
    }
};

}  // namespace aoce
