#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "aoce/baselines.hpp"
#include "aoce/config.hpp"
#include "aoce/evaluation.hpp"
#include "aoce/mdp.hpp"
#include "aoce/solvers.hpp"

namespace aoce {

inline constexpr int kExitOk = 0;
inline constexpr int kExitAdmissibility = 1;
inline constexpr int kExitSolver = 2;
inline constexpr int kExitConfig = 3;

struct CliOptions {
    std::string out_dir;  // overrides the config when nonempty
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> horizon;
    bool force = false;
    int threads = 1;
};

namespace detail {

inline std::string fmt_num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline std::string fmt_tau(std::int64_t tau) {
    return tau == SwitchingPolicy::never ? "inf" : std::to_string(tau);
}

inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = base ^ (a * 0x9e3779b97f4a7c15ull) ^ (b * 0xc2b2ae3d27d4eb4full);
    return splitmix64(s);
}

/// One run directory per invocation: creates it, echoes the canonical
/// config, and hands out streams for the table files.
class RunDir {
public:
    RunDir(const ExperimentConfig& config, const CliOptions& opts)
        : dir_(opts.out_dir.empty() ? config.out_dir : opts.out_dir), digest_(config.digest()) {
        std::filesystem::create_directories(dir_);
        std::ofstream echo(path("config.echo"));
        echo << config.to_json().dump(2) << "\n";
    }

    std::string path(const std::string& name) const {
        return (std::filesystem::path(dir_) / name).string();
    }

    std::ofstream table(const std::string& name) const {
        std::ofstream out(path(name));
        out << "# config_digest=" << digest_ << "\n";
        return out;
    }

    void write_diagnostics(const nlohmann::json& extra) const {
        nlohmann::json v = extra;
        v["config_digest"] = digest_;
        std::ofstream out(path("diagnostics.json"));
        out << v.dump(2) << "\n";
    }

    const std::string& digest() const { return digest_; }
    const std::string& dir() const { return dir_; }

private:
    std::string dir_;
    std::string digest_;
};

/// Ordered results of applying `fn` to 0..count-1 on up to `threads` workers.
template <typename Fn>
auto parallel_map(int threads, int count, Fn fn) {
    using R = decltype(fn(0));
    std::vector<R> results(static_cast<std::size_t>(count));
    if (threads <= 1 || count <= 1) {
        for (int k = 0; k < count; ++k) results[k] = fn(k);
        return results;
    }
    std::atomic<int> next{0};
    auto worker = [&] {
        while (true) {
            const int k = next.fetch_add(1);
            if (k >= count) return;
            results[k] = fn(k);
        }
    };
    std::vector<std::future<void>> futures;
    for (int w = 0; w < std::min(threads, count); ++w)
        futures.push_back(std::async(std::launch::async, worker));
    for (auto& f : futures) f.get();
    return results;
}

inline SolveResult solve_with(const std::string& kind, const TruncatedMdp& mdp, double tol,
                              long max_iterations) {
    if (kind == "rvi") {
        SolveOptions opts;
        opts.tol = tol;
        opts.max_iterations = max_iterations;
        return relative_value_iteration(mdp, 0, opts);
    }
    if (kind == "pi") {
        const int m = mdp.source().state_count();
        return classical_policy_iteration(
            mdp, expand(SwitchingPolicy::always_transmit_on_error(m), mdp), 0, max_iterations);
    }
    return structured_policy_iteration(mdp, 0, std::min(max_iterations, 10000L));
}

/// Per-class thresholds (missed / false / other) when each class is uniform.
struct ClassThresholds {
    bool uniform = false;
    std::int64_t missed = SwitchingPolicy::never;
    std::int64_t falsed = SwitchingPolicy::never;
    std::int64_t other = SwitchingPolicy::never;
};

inline ClassThresholds class_thresholds(const SwitchingPolicy& sw, const SourceModel& model) {
    ClassThresholds out;
    bool seen[3] = {false, false, false};
    std::int64_t value[3] = {0, 0, 0};
    out.uniform = true;
    for (int i = 0; i < model.state_count(); ++i)
        for (int j = 0; j < model.state_count(); ++j) {
            if (i == j) continue;
            int cls = 2;
            if (model.is_alarm(i) && !model.is_alarm(j)) cls = 0;
            else if (!model.is_alarm(i) && model.is_alarm(j)) cls = 1;
            const std::int64_t tau = sw.threshold(i, j);
            if (!seen[cls]) {
                seen[cls] = true;
                value[cls] = tau;
            } else if (value[cls] != tau) {
                out.uniform = false;
            }
        }
    out.missed = seen[0] ? value[0] : SwitchingPolicy::never;
    out.falsed = seen[1] ? value[1] : SwitchingPolicy::never;
    out.other = seen[2] ? value[2] : SwitchingPolicy::never;
    return out;
}

inline std::string threshold_matrix_text(const SwitchingPolicy& sw) {
    std::ostringstream os;
    for (int i = 0; i < sw.state_count(); ++i) {
        os << "  [";
        for (int j = 0; j < sw.state_count(); ++j) {
            os << (j ? " " : "");
            if (i == j)
                os << "-";
            else
                os << fmt_tau(sw.threshold(i, j));
        }
        os << "]\n";
    }
    return os.str();
}

inline BaselineKind baseline_kind_of(const std::string& name) {
    if (name == "randomized") return BaselineKind::randomized;
    if (name == "periodic") return BaselineKind::periodic;
    if (name == "reactive") return BaselineKind::reactive;
    if (name == "error_triggered") return BaselineKind::error_triggered;
    if (name == "threshold") return BaselineKind::threshold;
    if (name == "distortion") return BaselineKind::distortion_proxy;
    if (name == "aoi") return BaselineKind::aoi_reference;
    if (name == "aoii") return BaselineKind::aoii_reference;
    throw ConfigError("unknown baseline '" + name + "'");
}

struct CompareCell {
    double cost = 0.0;
    std::string src = "error";  // exact | sim | error
    std::string note;
};

inline CompareCell evaluate_baseline(BaselineKind kind, const TruncatedMdp& mdp,
                                     const ExperimentConfig& config, std::int64_t horizon,
                                     std::uint64_t seed) {
    CompareCell cell;
    switch (kind) {
        case BaselineKind::randomized: {
            auto best = grid_search_baseline(kind, config.effective_randomized_grid(), mdp,
                                             horizon, seed);
            cell.cost = best.best_cost;
            cell.src = "sim";
            cell.note = "p=" + fmt_num(best.best_parameter);
            return cell;
        }
        case BaselineKind::periodic: {
            std::vector<double> grid;
            for (std::int64_t d = 1; d <= config.periodic_max; ++d)
                grid.push_back(static_cast<double>(d));
            grid.push_back(std::numeric_limits<double>::infinity());
            auto best = grid_search_baseline(kind, grid, mdp, horizon, seed);
            cell.cost = best.best_cost;
            cell.src = "sim";
            cell.note = "d=" + fmt_num(best.best_parameter);
            return cell;
        }
        case BaselineKind::threshold: {
            std::vector<double> grid;
            for (int d = 1; d <= mdp.age_cap(); ++d) grid.push_back(static_cast<double>(d));
            grid.push_back(std::numeric_limits<double>::infinity());
            auto best = grid_search_baseline(kind, grid, mdp, horizon, seed);
            cell.cost = best.best_cost;
            cell.src = "exact";
            cell.note = "tau=" + (std::isinf(best.best_parameter)
                                      ? std::string("inf")
                                      : fmt_num(best.best_parameter));
            return cell;
        }
        default: {
            auto policy = make_baseline(BaselineSpec::of(kind), mdp);
            cell.note = policy.parameter_note;
            if (auto exact = exact_average_cost(mdp, policy)) {
                cell.cost = *exact;
                cell.src = "exact";
            } else {
                cell.cost = simulate(mdp, policy.sim, horizon, seed).mean_cost;
                cell.src = "sim";
            }
            return cell;
        }
    }
}

}  // namespace detail

/**
 * `check`: admissibility of the source and the bounded-average-cost
 * condition for every configured channel. Exit 0 only when everything
 * passes.
 */
inline int run_check(const ExperimentConfig& config, const CliOptions& opts,
                     std::ostream& out = std::cout) {
    const auto model = config.source_model();
    const auto report = validate(model);
    out << "source model: " << (report.admissible() ? "admissible" : "INADMISSIBLE") << "\n";
    for (const auto& v : report.violations) out << "  violation: " << v << "\n";
    for (const auto& w : report.warnings) out << "  warning: " << w << "\n";
    if (!report.admissible()) return kExitAdmissibility;

    const auto profile = config.profile(model);
    bool all_pass = true;
    for (double ps : config.success_probs) {
        const auto existence = check_existence(profile, model, 1.0 - ps);
        out << "existence check at p_s = " << detail::fmt_num(ps) << ": "
            << (existence.pass ? "pass" : "FAIL") << "\n";
        for (const auto& e : existence.entries)
            out << "  error (" << e.source + 1 << "," << e.estimate + 1 << "): ratio "
                << detail::fmt_num(e.ratio) << (e.pass ? " < " : " >= ") << "bound "
                << detail::fmt_num(e.bound) << "\n";
        all_pass = all_pass && existence.pass;
    }
    return all_pass ? kExitOk : kExitAdmissibility;
}

/**
 * `solve`: optimal switching thresholds over the configured (N, p_s, lambda)
 * sweep, with distortion / delivery-age / sync-age reference policies solved
 * alongside. Emits thresholds.csv (per-class wide layout when every class is
 * uniform, long (i, j, tau) layout otherwise) and diagnostics.json.
 */
inline int run_solve(const ExperimentConfig& config, const CliOptions& opts,
                     std::ostream& out = std::cout) {
    const auto model = config.source_model();
    const auto profile = config.profile(model);
    if (!opts.force) {
        for (double ps : config.success_probs)
            if (!check_existence(profile, model, 1.0 - ps).pass) {
                out << "existence check failed at p_s = " << detail::fmt_num(ps)
                    << " (rerun with --force to solve anyway)\n";
                return kExitAdmissibility;
            }
    }

    struct Point {
        int age_cap;
        double ps;
        double lambda;
    };
    std::vector<Point> points;
    for (int cap : config.age_caps)
        for (double ps : config.success_probs)
            for (double lambda : config.tx_costs) points.push_back({cap, ps, lambda});

    struct Row {
        Point point;
        SwitchingPolicy thresholds{2};
        double average_cost = 0.0;
        long iterations = 0;
        double residual = 0.0;
        long backups = 0;
        int n_states = 0;
        std::uint64_t checksum = 0;
        SwitchingPolicy distortion{2};
        std::int64_t aoi_tau = SwitchingPolicy::never;
        std::int64_t aoii_tau = SwitchingPolicy::never;
        bool aoii_uniform = true;
    };

    auto rows = detail::parallel_map(opts.threads, static_cast<int>(points.size()), [&](int k) {
        const Point& pt = points[static_cast<std::size_t>(k)];
        TruncatedMdp mdp(model, profile, pt.ps, pt.lambda, pt.age_cap);
        auto solved = detail::solve_with(config.solver_kind, mdp, config.solver_tol,
                                         config.solver_max_iterations);
        auto extracted = extract_thresholds(solved.policy, mdp);
        if (!extracted.is_switching)
            throw SolverError("solved policy is not switching-structured");
        Row row{pt, extracted.thresholds};
        row.average_cost = solved.average_cost;
        row.iterations = solved.iterations;
        row.residual = solved.residual;
        row.backups = solved.bellman_backups;
        row.n_states = mdp.n_states();
        row.checksum = mdp.kernel_checksum();

        auto distortion = make_baseline(BaselineSpec::of(BaselineKind::distortion_proxy), mdp);
        row.distortion = *distortion.thresholds;
        DeliveryAgeModel aoi(pt.ps, pt.lambda, pt.age_cap);
        row.aoi_tau = DeliveryAgeModel::threshold_of(
            classical_policy_iteration(aoi, Policy(aoi.n_states(), 1), 0).policy);
        SyncAgeModel aoii(model, pt.ps, pt.lambda, pt.age_cap);
        auto aoii_solved = classical_policy_iteration(aoii, Policy(aoii.n_states(), 1), 0);
        auto aoii_extracted =
            extract_thresholds(aoii_solved.policy, aoii, model.state_count());
        row.aoii_tau = SwitchingPolicy::never;
        for (const auto& b : aoii.error_blocks())
            row.aoii_tau =
                std::min(row.aoii_tau, aoii_extracted.thresholds.threshold(b.source, b.estimate));
        for (const auto& b : aoii.error_blocks())
            row.aoii_uniform = row.aoii_uniform &&
                aoii_extracted.thresholds.threshold(b.source, b.estimate) == row.aoii_tau;
        return row;
    });

    bool class_layout = true;
    for (const auto& row : rows)
        class_layout = class_layout && detail::class_thresholds(row.thresholds, model).uniform;

    detail::RunDir run(config, opts);
    auto csv = run.table("thresholds.csv");
    if (class_layout) {
        csv << "N,p_s,lambda,missed_alarm,false_alarm,normal,distortion_missed,distortion_false,"
               "distortion_normal,aoi,aoii\n";
        out << "  N   p_s  lambda  missed  false  normal  aoi  aoii\n";
        for (const auto& row : rows) {
            const auto cls = detail::class_thresholds(row.thresholds, model);
            const auto dst = detail::class_thresholds(row.distortion, model);
            csv << row.point.age_cap << "," << detail::fmt_num(row.point.ps) << ","
                << detail::fmt_num(row.point.lambda) << "," << detail::fmt_tau(cls.missed) << ","
                << detail::fmt_tau(cls.falsed) << "," << detail::fmt_tau(cls.other) << ","
                << detail::fmt_tau(dst.missed) << "," << detail::fmt_tau(dst.falsed) << ","
                << detail::fmt_tau(dst.other) << "," << detail::fmt_tau(row.aoi_tau) << ","
                << (row.aoii_uniform ? detail::fmt_tau(row.aoii_tau)
                                     : detail::fmt_tau(row.aoii_tau) + "+")
                << "\n";
            out << "  " << row.point.age_cap << "  " << detail::fmt_num(row.point.ps) << "  "
                << detail::fmt_num(row.point.lambda) << "  " << detail::fmt_tau(cls.missed)
                << "  " << detail::fmt_tau(cls.falsed) << "  " << detail::fmt_tau(cls.other)
                << "  " << detail::fmt_tau(row.aoi_tau) << "  " << detail::fmt_tau(row.aoii_tau)
                << "\n";
        }
    } else {
        csv << "N,p_s,lambda,source,estimate,tau\n";
        for (const auto& row : rows)
            for (int i = 0; i < model.state_count(); ++i)
                for (int j = 0; j < model.state_count(); ++j) {
                    if (i == j) continue;
                    csv << row.point.age_cap << "," << detail::fmt_num(row.point.ps) << ","
                        << detail::fmt_num(row.point.lambda) << "," << i + 1 << "," << j + 1
                        << "," << detail::fmt_tau(row.thresholds.threshold(i, j)) << "\n";
                }
        for (const auto& row : rows) {
            out << "thresholds at N=" << row.point.age_cap
                << " p_s=" << detail::fmt_num(row.point.ps)
                << " lambda=" << detail::fmt_num(row.point.lambda)
                << " (L* = " << detail::fmt_num(row.average_cost) << "):\n"
                << detail::threshold_matrix_text(row.thresholds);
        }
    }

    nlohmann::json diag;
    diag["command"] = "solve";
    diag["solver"] = config.solver_kind;
    for (const auto& row : rows) {
        nlohmann::json p;
        p["N"] = row.point.age_cap;
        p["p_s"] = row.point.ps;
        p["lambda"] = row.point.lambda;
        p["average_cost"] = row.average_cost;
        p["iterations"] = row.iterations;
        p["residual"] = row.residual;
        p["bellman_backups"] = row.backups;
        p["states"] = row.n_states;
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(row.checksum));
        p["kernel_checksum"] = buf;
        diag["points"].push_back(p);
    }
    run.write_diagnostics(diag);
    out << "wrote " << run.path("thresholds.csv") << "\n";
    return kExitOk;
}

/**
 * `compare`: cost of the optimal switching policy against the configured
 * rule-, distortion- and age-based baselines, one row per lambda. Exact
 * stationary evaluation where the policy allows it, fixed-seed simulation
 * otherwise; per-policy failures land in the cell and the run continues.
 */
inline int run_compare(const ExperimentConfig& config, const CliOptions& opts,
                       std::ostream& out = std::cout) {
    const auto model = config.source_model();
    const auto profile = config.profile(model);
    const int cap = config.age_caps.front();
    const double ps = config.success_probs.front();
    const std::int64_t horizon = opts.horizon.value_or(config.horizon);
    const std::uint64_t base_seed = opts.seed.value_or(config.seed);

    std::vector<BaselineKind> kinds;
    for (const auto& name : config.baselines) kinds.push_back(detail::baseline_kind_of(name));

    struct Row {
        double lambda;
        std::vector<detail::CompareCell> cells;  // kinds order, then switching last
    };

    auto rows = detail::parallel_map(
        opts.threads, static_cast<int>(config.tx_costs.size()), [&](int k) {
            const double lambda = config.tx_costs[static_cast<std::size_t>(k)];
            TruncatedMdp mdp(model, profile, ps, lambda, cap);
            Row row{lambda, {}};
            for (std::size_t b = 0; b < kinds.size(); ++b) {
                detail::CompareCell cell;
                try {
                    cell = detail::evaluate_baseline(
                        kinds[b], mdp, config, horizon,
                        detail::mix_seed(base_seed, static_cast<std::uint64_t>(k), b + 1));
                } catch (const std::exception& e) {
                    cell.src = "error";
                    cell.note = e.what();
                }
                row.cells.push_back(cell);
            }
            detail::CompareCell sw;
            try {
                auto solved = detail::solve_with(config.solver_kind, mdp, config.solver_tol,
                                                 config.solver_max_iterations);
                sw.cost = solved.average_cost;
                sw.src = "exact";
                auto extracted = extract_thresholds(solved.policy, mdp);
                if (extracted.is_switching) {
                    std::ostringstream os;
                    os << "tau:";
                    for (const auto& blk : mdp.error_blocks())
                        os << " " << detail::fmt_tau(
                            extracted.thresholds.threshold(blk.source, blk.estimate));
                    sw.note = os.str();
                }
            } catch (const std::exception& e) {
                sw.src = "error";
                sw.note = e.what();
            }
            row.cells.push_back(sw);
            return row;
        });

    detail::RunDir run(config, opts);
    auto csv = run.table("compare.csv");
    csv << "lambda";
    std::vector<std::string> names;
    for (auto kind : kinds) names.push_back(baseline_name(kind));
    names.push_back("switching");
    for (const auto& n : names) csv << "," << n << "," << n << "_src";
    csv << "\n";
    for (const auto& row : rows) {
        csv << detail::fmt_num(row.lambda);
        for (const auto& cell : row.cells) {
            if (cell.src == "error")
                csv << ",error,error";
            else
                csv << "," << detail::fmt_num(cell.cost) << "," << cell.src;
        }
        csv << "\n";
    }

    out << "lambda";
    for (const auto& n : names) out << "  " << n;
    out << "\n";
    for (const auto& row : rows) {
        char buf[32];
        out << detail::fmt_num(row.lambda);
        for (const auto& cell : row.cells) {
            if (cell.src == "error") {
                out << "  error";
            } else {
                std::snprintf(buf, sizeof buf, "  %.2f", cell.cost);
                out << buf;
            }
        }
        out << "\n";
    }

    nlohmann::json diag;
    diag["command"] = "compare";
    diag["horizon"] = horizon;
    diag["seed"] = base_seed;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        nlohmann::json p;
        p["lambda"] = rows[r].lambda;
        for (std::size_t c = 0; c < rows[r].cells.size(); ++c) {
            p["cells"][names[c]] = {{"cost", rows[r].cells[c].cost},
                                    {"src", rows[r].cells[c].src},
                                    {"note", rows[r].cells[c].note}};
        }
        diag["rows"].push_back(p);
    }
    run.write_diagnostics(diag);
    out << "wrote " << run.path("compare.csv") << "\n";
    return kExitOk;
}

/**
 * `truncation`: optimal cost across the configured truncation sizes with a
 * fitted geometric convergence ratio. Needs at least three sizes.
 */
inline int run_truncation(const ExperimentConfig& config, const CliOptions& opts,
                          std::ostream& out = std::cout) {
    if (config.age_caps.size() < 3)
        throw ConfigError("truncation: need at least 3 values of N for a rate fit");
    const auto model = config.source_model();
    const auto profile = config.profile(model);
    TruncationSweepResult sweep;
    try {
        sweep = truncation_sweep(model, profile, config.success_probs.front(),
                                 config.tx_costs.front(), config.age_caps,
                                 config.solver_max_iterations);
    } catch (const std::domain_error& e) {
        out << e.what() << "\n";
        return kExitAdmissibility;
    }

    detail::RunDir run(config, opts);
    auto csv = run.table("sweep.csv");
    csv << "N,L,gap\n";
    const double l_ref = sweep.points.back().average_cost;
    for (const auto& p : sweep.points)
        csv << p.age_cap << "," << detail::fmt_num(p.average_cost) << ","
            << detail::fmt_num(std::abs(p.average_cost - l_ref)) << "\n";

    nlohmann::json diag;
    diag["command"] = "truncation";
    diag["theoretical_ratio"] = sweep.theoretical_ratio;
    if (sweep.fitted_ratio) diag["fitted_ratio"] = *sweep.fitted_ratio;
    diag["noise_floor"] = sweep.noise_floor;
    run.write_diagnostics(diag);

    out << "L(N) over " << sweep.points.size() << " truncation sizes; theoretical ratio "
        << detail::fmt_num(sweep.theoretical_ratio);
    if (sweep.fitted_ratio) out << ", fitted ratio " << detail::fmt_num(*sweep.fitted_ratio);
    out << "\nwrote " << run.path("sweep.csv") << "\n";
    return kExitOk;
}

/**
 * `simulate`: Monte Carlo rollout of the solved switching policy, reported
 * next to its exact stationary cost.
 */
inline int run_simulate(const ExperimentConfig& config, const CliOptions& opts,
                        std::ostream& out = std::cout) {
    const auto model = config.source_model();
    const auto profile = config.profile(model);
    TruncatedMdp mdp(model, profile, config.success_probs.front(), config.tx_costs.front(),
                     config.age_caps.front());
    auto solved = detail::solve_with(config.solver_kind, mdp, config.solver_tol,
                                     config.solver_max_iterations);
    const std::int64_t horizon = opts.horizon.value_or(config.horizon);
    const std::uint64_t seed = opts.seed.value_or(config.seed);
    auto report = simulate(mdp, StateTablePolicy{solved.policy}, horizon, seed);
    const double exact = average_cost_exact(mdp, solved.policy);

    out << "simulated mean cost " << detail::fmt_num(report.mean_cost) << " +/- "
        << detail::fmt_num(report.half_width_95) << " (95% batch means), exact "
        << detail::fmt_num(exact) << ", tx rate " << detail::fmt_num(report.tx_rate)
        << ", horizon " << horizon << ", seed " << seed << "\n";

    detail::RunDir run(config, opts);
    nlohmann::json diag;
    diag["command"] = "simulate";
    diag["mean_cost"] = report.mean_cost;
    diag["half_width_95"] = report.half_width_95;
    diag["exact_cost"] = exact;
    diag["tx_rate"] = report.tx_rate;
    diag["horizon"] = report.horizon;
    diag["seed"] = report.seed;
    run.write_diagnostics(diag);
    return kExitOk;
}

}  // namespace aoce
