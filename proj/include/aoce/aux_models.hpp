#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "aoce/mdp.hpp"
#include "aoce/policy.hpp"
#include "aoce/solvers.hpp"

namespace aoce {

/**
 * Delivery-age chain: the age of the newest delivered measurement, reset to
 * 1 by a successful transmission, incremented (and capped) otherwise. Source
 * dynamics play no role. Cost is the age itself plus the transmission cost,
 * the conventional linear shaping for age-optimal references.
 */
class DeliveryAgeModel {
public:
    DeliveryAgeModel(double success_prob, double tx_cost, int age_cap)
        : cap_(age_cap), lambda_(tx_cost) {
        if (age_cap < 1) throw std::invalid_argument("DeliveryAgeModel: age cap must be >= 1");
        if (!(success_prob >= 0.0 && success_prob <= 1.0))
            throw std::invalid_argument("DeliveryAgeModel: success probability must be in [0,1]");
        const double pf = 1.0 - success_prob;
        kernel_.resize(cap_);
        for (int d = 1; d <= cap_; ++d) {
            const int up = std::min(d + 1, cap_) - 1;
            kernel_[d - 1][0] = {{up, 1.0}};
            std::vector<Transition> tx;
            if (success_prob > 0.0) tx.push_back({0, success_prob});
            if (pf > 0.0) tx.push_back({up, pf});
            if (tx.size() == 2 && tx[0].to == tx[1].to) {
                tx[0].prob += tx[1].prob;
                tx.pop_back();
            }
            kernel_[d - 1][1] = std::move(tx);
        }
    }

    int n_states() const { return cap_; }
    const std::vector<Transition>& transitions(int idx, int action) const {
        return kernel_[idx][action];
    }
    double cost(int idx, int action) const {
        return static_cast<double>(idx + 1) + (action == 1 ? lambda_ : 0.0);
    }

    /// Smallest age with a transmit action; never-sentinel when silent everywhere.
    static std::int64_t threshold_of(const Policy& policy) {
        for (int s = 0; s < policy.size(); ++s)
            if (policy(s) == 1) return s + 1;
        return SwitchingPolicy::never;
    }

private:
    int cap_;
    double lambda_;
    std::vector<std::array<std::vector<Transition>, 2>> kernel_;
};

/**
 * Sync-age model: like the system-state model but with a change-agnostic age
 * that counts consecutive erroneous slots regardless of which error holds
 * (reset only on sync). Every error block spans the full age ladder, since
 * the age can keep growing across error changes. Cost is the sync age plus
 * the transmission cost.
 */
class SyncAgeModel {
public:
    SyncAgeModel(const SourceModel& source, double success_prob, double tx_cost, int age_cap)
        : m_(source.state_count()), cap_(age_cap), lambda_(tx_cost) {
        if (age_cap < 1) throw std::invalid_argument("SyncAgeModel: age cap must be >= 1");
        const double ps = success_prob;
        const double pf = 1.0 - ps;
        for (int i = 0; i < m_; ++i)
            for (int j = 0; j < m_; ++j) {
                if (i == j) continue;
                ErrorBlock b;
                b.source = i;
                b.estimate = j;
                b.first = m_ + static_cast<int>(blocks_.size()) * cap_;
                b.length = cap_;
                blocks_.push_back(b);
            }
        const int n = n_states();
        kernel_.resize(n);
        costs_.resize(n);
        for (int i = 0; i < m_; ++i) {  // synced states
            std::vector<Transition> row;
            if (source.prob(i, i) > 0.0) row.push_back({i, source.prob(i, i)});
            for (int k = 0; k < m_; ++k)
                if (k != i && source.prob(i, k) > 0.0)
                    row.push_back({index_of(k, i, 1), source.prob(i, k)});
            kernel_[i][0] = row;
            kernel_[i][1] = std::move(row);
            costs_[i] = 0.0;
        }
        for (const auto& b : blocks_) {
            const int i = b.source;
            const int j = b.estimate;
            for (int d = 1; d <= cap_; ++d) {
                const int idx = b.first + d - 1;
                costs_[idx] = static_cast<double>(d);
                const int up = std::min(d + 1, cap_);
                std::vector<Transition> silent;
                if (source.prob(i, i) > 0.0) silent.push_back({index_of(i, j, up), source.prob(i, i)});
                if (source.prob(i, j) > 0.0) silent.push_back({j, source.prob(i, j)});
                for (int k = 0; k < m_; ++k)
                    if (k != i && k != j && source.prob(i, k) > 0.0)
                        silent.push_back({index_of(k, j, up), source.prob(i, k)});
                std::vector<Transition> tx;
                auto push = [&tx](int to, double p) {
                    if (p <= 0.0) return;
                    for (auto& t : tx)
                        if (t.to == to) {
                            t.prob += p;
                            return;
                        }
                    tx.push_back({to, p});
                };
                push(i, source.prob(i, i) * ps);
                for (int k = 0; k < m_; ++k)
                    if (k != i) push(index_of(k, i, up), source.prob(i, k) * ps);
                push(index_of(i, j, up), source.prob(i, i) * pf);
                push(j, source.prob(i, j) * pf);
                for (int k = 0; k < m_; ++k)
                    if (k != i && k != j) push(index_of(k, j, up), source.prob(i, k) * pf);
                kernel_[idx][0] = std::move(silent);
                kernel_[idx][1] = std::move(tx);
            }
        }
    }

    int n_states() const { return m_ + static_cast<int>(blocks_.size()) * cap_; }
    int age_cap() const { return cap_; }
    const std::vector<ErrorBlock>& error_blocks() const { return blocks_; }
    const std::vector<Transition>& transitions(int idx, int action) const {
        return kernel_[idx][action];
    }
    double cost(int idx, int action) const {
        return costs_[idx] + (action == 1 ? lambda_ : 0.0);
    }

    /// Index of (source, estimate, sync age); synced states sit at [0, M).
    int index_of(int i, int j, std::int64_t age) const {
        if (i == j) return i;
        int block = i * (m_ - 1) + (j < i ? j : j - 1);
        return m_ + block * cap_ + static_cast<int>(std::min<std::int64_t>(age, cap_)) - 1;
    }

private:
    int m_;
    int cap_;
    double lambda_;
    std::vector<ErrorBlock> blocks_;
    std::vector<std::array<std::vector<Transition>, 2>> kernel_;
    std::vector<double> costs_;
};

}  // namespace aoce
