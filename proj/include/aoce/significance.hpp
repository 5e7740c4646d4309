#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "aoce/source_model.hpp"

namespace aoce {

enum class AgeFunctionKind { constant, clipped, linear, logarithmic, exponential, table };

/**
 * Non-negative, non-decreasing penalty as a function of the error holding
 * time. Evaluated at integer ages >= 1; the growth ratio limit
 * lim g(d+1)/g(d) is available in closed form for every kind, which is what
 * the bounded-average-cost check needs.
 *
 * Kinds and parameters:
 *   constant(v)                    g(d) = v
 *   linear(a, b)                   g(d) = a*d + b,              a >= 0
 *   logarithmic(a, b, base)        g(d) = log_base(a*d) + b,    a > 0, base > 1
 *   exponential(base, rate, off)   g(d) = base^(rate*d) + off,  base >= 1, rate >= 0
 *   clipped(inner, cap)            g(d) = inner(min(d, cap))
 *   table(v1..vK)                  explicit values; beyond the table the last
 *                                  ratio vK/v(K-1) extrapolates geometrically
 *
 * Monotonicity and g(1) >= 0 are enforced at construction.
 */
class AgeFunction {
public:
    static AgeFunction constant(double value) {
        AgeFunction g(AgeFunctionKind::constant);
        if (!(value >= 0.0)) throw std::invalid_argument("age function: constant must be >= 0");
        g.p0_ = value;
        return g;
    }

    static AgeFunction zero() { return constant(0.0); }

    static AgeFunction linear(double slope, double intercept) {
        AgeFunction g(AgeFunctionKind::linear);
        if (!(slope >= 0.0)) throw std::invalid_argument("age function: linear slope must be >= 0");
        if (!(slope + intercept >= 0.0))
            throw std::invalid_argument("age function: linear value at age 1 must be >= 0");
        g.p0_ = slope;
        g.p1_ = intercept;
        return g;
    }

    static AgeFunction logarithmic(double scale, double offset, double base = 10.0) {
        AgeFunction g(AgeFunctionKind::logarithmic);
        if (!(scale > 0.0)) throw std::invalid_argument("age function: log scale must be > 0");
        if (!(base > 1.0)) throw std::invalid_argument("age function: log base must be > 1");
        if (!(std::log(scale) / std::log(base) + offset >= 0.0))
            throw std::invalid_argument("age function: log value at age 1 must be >= 0");
        g.p0_ = scale;
        g.p1_ = offset;
        g.p2_ = base;
        return g;
    }

    static AgeFunction exponential(double base, double rate, double offset = 0.0) {
        AgeFunction g(AgeFunctionKind::exponential);
        if (!(base >= 1.0)) throw std::invalid_argument("age function: exponential base must be >= 1");
        if (!(rate >= 0.0)) throw std::invalid_argument("age function: exponential rate must be >= 0");
        if (!(std::pow(base, rate) + offset >= 0.0))
            throw std::invalid_argument("age function: exponential value at age 1 must be >= 0");
        g.p0_ = base;
        g.p1_ = rate;
        g.p2_ = offset;
        return g;
    }

    static AgeFunction clipped(AgeFunction inner, std::int64_t age_cap) {
        AgeFunction g(AgeFunctionKind::clipped);
        if (age_cap < 1) throw std::invalid_argument("age function: clip cap must be >= 1");
        g.inner_ = std::make_shared<AgeFunction>(std::move(inner));
        g.p0_ = static_cast<double>(age_cap);
        return g;
    }

    static AgeFunction table(std::vector<double> values) {
        AgeFunction g(AgeFunctionKind::table);
        if (values.empty()) throw std::invalid_argument("age function: table must be nonempty");
        for (std::size_t k = 0; k < values.size(); ++k) {
            if (!(values[k] >= 0.0))
                throw std::invalid_argument("age function: table values must be >= 0");
            if (k > 0 && values[k] < values[k - 1])
                throw std::invalid_argument("age function: table values must be non-decreasing");
        }
        g.tab_ = std::move(values);
        return g;
    }

    double operator()(std::int64_t age) const {
        if (age < 1) throw std::domain_error("age function: age must be >= 1");
        switch (kind_) {
            case AgeFunctionKind::constant:
                return p0_;
            case AgeFunctionKind::linear:
                return p0_ * static_cast<double>(age) + p1_;
            case AgeFunctionKind::logarithmic:
                return std::log(p0_ * static_cast<double>(age)) / std::log(p2_) + p1_;
            case AgeFunctionKind::exponential:
                return std::pow(p0_, p1_ * static_cast<double>(age)) + p2_;
            case AgeFunctionKind::clipped:
                return (*inner_)(std::min(age, static_cast<std::int64_t>(p0_)));
            case AgeFunctionKind::table: {
                const auto k = static_cast<std::size_t>(age);
                if (k <= tab_.size()) return tab_[k - 1];
                const double r = growth_ratio_limit();
                if (!std::isfinite(r)) return std::numeric_limits<double>::infinity();
                return tab_.back() * std::pow(r, static_cast<double>(age) - static_cast<double>(tab_.size()));
            }
        }
        return 0.0;  // unreachable
    }

    /// lim_{d->inf} g(d+1)/g(d). Bounded, linear and logarithmic kinds give 1;
    /// exponential gives base^rate; a table repeats its final ratio.
    double growth_ratio_limit() const {
        switch (kind_) {
            case AgeFunctionKind::constant:
            case AgeFunctionKind::linear:
            case AgeFunctionKind::logarithmic:
            case AgeFunctionKind::clipped:
                return 1.0;
            case AgeFunctionKind::exponential:
                return std::pow(p0_, p1_);
            case AgeFunctionKind::table: {
                if (tab_.size() < 2) return 1.0;
                const double a = tab_[tab_.size() - 2];
                const double b = tab_.back();
                if (b == a) return 1.0;
                if (a == 0.0) return std::numeric_limits<double>::infinity();
                return b / a;
            }
        }
        return 1.0;
    }

    AgeFunctionKind kind() const { return kind_; }
    double param0() const { return p0_; }
    double param1() const { return p1_; }
    double param2() const { return p2_; }
    const std::vector<double>& table_values() const { return tab_; }
    const AgeFunction& inner() const { return *inner_; }

    bool operator==(const AgeFunction& o) const {
        if (kind_ != o.kind_) return false;
        switch (kind_) {
            case AgeFunctionKind::constant:
                return p0_ == o.p0_;
            case AgeFunctionKind::linear:
                return p0_ == o.p0_ && p1_ == o.p1_;
            case AgeFunctionKind::logarithmic:
            case AgeFunctionKind::exponential:
                return p0_ == o.p0_ && p1_ == o.p1_ && p2_ == o.p2_;
            case AgeFunctionKind::clipped:
                return p0_ == o.p0_ && *inner_ == *o.inner_;
            case AgeFunctionKind::table:
                return tab_ == o.tab_;
        }
        return false;
    }

    std::string describe() const {
        std::ostringstream os;
        switch (kind_) {
            case AgeFunctionKind::constant: os << "constant(" << p0_ << ")"; break;
            case AgeFunctionKind::linear: os << "linear(" << p0_ << "*d+" << p1_ << ")"; break;
            case AgeFunctionKind::logarithmic:
                os << "log_" << p2_ << "(" << p0_ << "*d)+" << p1_;
                break;
            case AgeFunctionKind::exponential:
                os << p0_ << "^(" << p1_ << "*d)+" << p2_;
                break;
            case AgeFunctionKind::clipped:
                os << "clip(" << inner_->describe() << ", " << static_cast<std::int64_t>(p0_) << ")";
                break;
            case AgeFunctionKind::table: os << "table[" << tab_.size() << "]"; break;
        }
        return os.str();
    }

private:
    explicit AgeFunction(AgeFunctionKind kind) : kind_(kind) {}

    AgeFunctionKind kind_;
    double p0_ = 0.0, p1_ = 0.0, p2_ = 0.0;
    std::shared_ptr<const AgeFunction> inner_;
    std::vector<double> tab_;
};

/**
 * Error-significance weights D and per-error age functions g. The diagonal
 * carries no cost: D_ii = 0 is required and g_ii is forced to the zero
 * function. Off-diagonal weights must be non-negative and finite.
 *
 * Immutable after construction; safe to share across threads.
 */
class SignificanceProfile {
public:
    SignificanceProfile(Eigen::MatrixXd weights, std::vector<AgeFunction> age_functions)
        : d_(std::move(weights)), g_(std::move(age_functions)) {
        const int n = state_count();
        if (d_.rows() != d_.cols() || n < 2)
            throw std::invalid_argument("SignificanceProfile: weight matrix must be square, M >= 2");
        if (g_.size() != static_cast<std::size_t>(n) * n)
            throw std::invalid_argument("SignificanceProfile: need one age function per state pair");
        for (int i = 0; i < n; ++i) {
            if (d_(i, i) != 0.0)
                throw std::invalid_argument("SignificanceProfile: diagonal weights must be 0");
            g_[static_cast<std::size_t>(i) * n + i] = AgeFunction::zero();
            for (int j = 0; j < n; ++j)
                if (!(d_(i, j) >= 0.0) || !std::isfinite(d_(i, j)))
                    throw std::invalid_argument("SignificanceProfile: weights must be finite and >= 0");
        }
    }

    /// Same weight and age function for every estimation error.
    static SignificanceProfile uniform(int state_count, double weight, const AgeFunction& g) {
        Eigen::MatrixXd d = Eigen::MatrixXd::Constant(state_count, state_count, weight);
        d.diagonal().setZero();
        std::vector<AgeFunction> grid(static_cast<std::size_t>(state_count) * state_count, g);
        return SignificanceProfile(std::move(d), std::move(grid));
    }

    /**
     * Age functions keyed by alarm class: errors with an alarm source and a
     * non-alarm estimate take `missed`, the reverse take `falsed`, everything
     * else (including alarm-to-alarm errors) takes `other`.
     */
    static SignificanceProfile alarm_classes(const SourceModel& model, Eigen::MatrixXd weights,
                                             const AgeFunction& missed, const AgeFunction& falsed,
                                             const AgeFunction& other) {
        const int n = model.state_count();
        if (weights.rows() != n || weights.cols() != n)
            throw std::invalid_argument("alarm_classes: weight matrix size mismatch");
        std::vector<AgeFunction> grid;
        grid.reserve(static_cast<std::size_t>(n) * n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                if (model.is_alarm(i) && !model.is_alarm(j))
                    grid.push_back(missed);
                else if (!model.is_alarm(i) && model.is_alarm(j))
                    grid.push_back(falsed);
                else
                    grid.push_back(other);
            }
        return SignificanceProfile(std::move(weights), std::move(grid));
    }

    int state_count() const { return static_cast<int>(d_.rows()); }
    double weight(int i, int j) const { return d_(i, j); }
    const Eigen::MatrixXd& weights() const { return d_; }

    const AgeFunction& age_function(int i, int j) const {
        return g_[static_cast<std::size_t>(i) * state_count() + j];
    }

    /// True when every estimation error carries the same weight and the same
    /// age function (the non-prioritized case).
    bool is_non_prioritized() const {
        const int n = state_count();
        const double w = d_(0, 1);
        const AgeFunction& g = age_function(0, 1);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                if (i == j) continue;
                if (d_(i, j) != w) return false;
                if (!(age_function(i, j) == g)) return false;
            }
        return true;
    }

private:
    Eigen::MatrixXd d_;
    std::vector<AgeFunction> g_;
};

/// Significance-weighted age penalty of holding error (i, j) for `age`
/// consecutive slots. Zero on synced pairs.
inline double age_penalty(const SignificanceProfile& profile, int i, int j, std::int64_t age) {
    if (age < 0) throw std::domain_error("age_penalty: age must be >= 0");
    if (i == j) return 0.0;
    if (age == 0) throw std::domain_error("age_penalty: erroneous pairs have age >= 1");
    const double w = profile.weight(i, j);
    if (w == 0.0) return 0.0;
    return w * profile.age_function(i, j)(age);
}

/// One row of the bounded-average-cost check.
struct ExistenceEntry {
    int source = 0;
    int estimate = 0;
    double ratio = 0.0;  // lim g(d+1)/g(d)
    double bound = 0.0;  // 1 / (Q_ii * p_f), +inf when the product is 0
    bool pass = false;
};

struct ExistenceReport {
    std::vector<ExistenceEntry> entries;
    double failure_prob = 0.0;
    bool pass = true;

    std::string summary() const {
        std::ostringstream os;
        os << (pass ? "pass" : "FAIL") << " (p_f = " << failure_prob << ")\n";
        for (const auto& e : entries)
            os << "  error (" << e.source + 1 << "," << e.estimate + 1 << "): ratio " << e.ratio
               << (e.pass ? " < " : " >= ") << "bound " << e.bound << (e.pass ? "" : "  <-- FAIL")
               << "\n";
        return os.str();
    }
};

/**
 * Checks, for every error whose source state has a self-transition, that the
 * age-penalty growth ratio stays below 1/(Q_ii * p_f) — the reciprocal of
 * the probability of remaining in that error after a transmission attempt.
 * Failure is reported, never thrown.
 */
inline ExistenceReport check_existence(const SignificanceProfile& profile, const SourceModel& model,
                                       double failure_prob) {
    if (failure_prob < 0.0 || failure_prob > 1.0)
        throw std::invalid_argument("check_existence: failure probability must be in [0,1]");
    if (profile.state_count() != model.state_count())
        throw std::invalid_argument("check_existence: profile/model size mismatch");
    ExistenceReport report;
    report.failure_prob = failure_prob;
    for (int i = 0; i < model.state_count(); ++i) {
        if (model.prob(i, i) <= 0.0) continue;
        for (int j = 0; j < model.state_count(); ++j) {
            if (i == j) continue;
            ExistenceEntry e;
            e.source = i;
            e.estimate = j;
            e.ratio = profile.age_function(i, j).growth_ratio_limit();
            const double hold = model.prob(i, i) * failure_prob;
            e.bound = hold > 0.0 ? 1.0 / hold : std::numeric_limits<double>::infinity();
            e.pass = e.ratio < e.bound;
            report.pass = report.pass && e.pass;
            report.entries.push_back(e);
        }
    }
    return report;
}

}  // namespace aoce
