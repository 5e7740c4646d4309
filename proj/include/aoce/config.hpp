#pragma once

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "aoce/significance.hpp"
#include "aoce/source_model.hpp"

namespace aoce {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

using json = nlohmann::json;

inline const json& require(const json& obj, const char* key, const char* where) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        std::ostringstream os;
        os << where << ": missing required field '" << key << "'";
        throw ConfigError(os.str());
    }
    return *it;
}

inline double number_or_e(const json& v, const char* where) {
    if (v.is_string()) {
        if (v.get<std::string>() == "e") return std::exp(1.0);
        throw ConfigError(std::string(where) + ": expected a number or \"e\"");
    }
    if (!v.is_number()) throw ConfigError(std::string(where) + ": expected a number");
    return v.get<double>();
}

inline std::vector<double> number_list(const json& v, const char* where) {
    std::vector<double> out;
    if (v.is_number()) {
        out.push_back(v.get<double>());
        return out;
    }
    if (!v.is_array() || v.empty())
        throw ConfigError(std::string(where) + ": expected a number or nonempty list");
    for (const auto& x : v) {
        if (!x.is_number()) throw ConfigError(std::string(where) + ": expected numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

inline Eigen::MatrixXd matrix(const json& v, const char* where) {
    if (!v.is_array() || v.empty())
        throw ConfigError(std::string(where) + ": expected a matrix (list of rows)");
    const auto rows = v.size();
    const auto cols = v[0].size();
    Eigen::MatrixXd m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        if (!v[i].is_array() || v[i].size() != cols)
            throw ConfigError(std::string(where) + ": ragged matrix rows");
        for (std::size_t j = 0; j < cols; ++j) m(i, j) = v[i][j].get<double>();
    }
    return m;
}

inline json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

}  // namespace detail

inline AgeFunction age_function_from_json(const nlohmann::json& v) {
    using detail::number_or_e;
    if (!v.is_object()) throw ConfigError("age function: expected an object with a 'kind'");
    const std::string kind = detail::require(v, "kind", "age function").get<std::string>();
    try {
        if (kind == "constant")
            return AgeFunction::constant(detail::require(v, "value", "constant age function"));
        if (kind == "linear")
            return AgeFunction::linear(detail::require(v, "slope", "linear age function"),
                                       v.value("intercept", 0.0));
        if (kind == "logarithmic")
            return AgeFunction::logarithmic(
                v.value("scale", 1.0), v.value("offset", 0.0),
                v.contains("base") ? number_or_e(v["base"], "logarithmic base") : 10.0);
        if (kind == "exponential")
            return AgeFunction::exponential(
                v.contains("base") ? number_or_e(v["base"], "exponential base") : std::exp(1.0),
                detail::require(v, "rate", "exponential age function"), v.value("offset", 0.0));
        if (kind == "clipped")
            return AgeFunction::clipped(
                age_function_from_json(detail::require(v, "inner", "clipped age function")),
                detail::require(v, "cap", "clipped age function").get<std::int64_t>());
        if (kind == "table")
            return AgeFunction::table(
                detail::require(v, "values", "table age function").get<std::vector<double>>());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("age function: ") + e.what());
    }
    throw ConfigError("age function: unknown kind '" + kind + "'");
}

inline nlohmann::json age_function_to_json(const AgeFunction& g) {
    nlohmann::json v;
    switch (g.kind()) {
        case AgeFunctionKind::constant:
            v["kind"] = "constant";
            v["value"] = g.param0();
            break;
        case AgeFunctionKind::linear:
            v["kind"] = "linear";
            v["slope"] = g.param0();
            v["intercept"] = g.param1();
            break;
        case AgeFunctionKind::logarithmic:
            v["kind"] = "logarithmic";
            v["scale"] = g.param0();
            v["offset"] = g.param1();
            v["base"] = g.param2();
            break;
        case AgeFunctionKind::exponential:
            v["kind"] = "exponential";
            v["base"] = g.param0();
            v["rate"] = g.param1();
            v["offset"] = g.param2();
            break;
        case AgeFunctionKind::clipped:
            v["kind"] = "clipped";
            v["cap"] = static_cast<std::int64_t>(g.param0());
            v["inner"] = age_function_to_json(g.inner());
            break;
        case AgeFunctionKind::table:
            v["kind"] = "table";
            v["values"] = g.table_values();
            break;
    }
    return v;
}

/**
 * Declarative experiment description: source, significance, channel, cost
 * and truncation sweeps, solver settings, baseline list, and simulation
 * budget. States are 1-based in the file format and 0-based in memory.
 */
struct ExperimentConfig {
    // source
    bool symmetric = false;
    int sym_states = 0;
    double sym_change_prob = 0.0;
    Eigen::MatrixXd q;
    std::vector<int> alarm_states{0};

    // significance: scalar weight or full matrix, age functions by alarm class
    bool scalar_weight = true;
    double weight = 1.0;
    Eigen::MatrixXd weights;
    AgeFunction g_missed = AgeFunction::constant(1.0);
    AgeFunction g_false = AgeFunction::constant(1.0);
    AgeFunction g_other = AgeFunction::constant(1.0);

    std::vector<double> success_probs{0.9};
    std::vector<double> tx_costs{0.0};
    std::vector<int> age_caps{20};

    std::string solver_kind = "spi";  // spi | pi | rvi
    double solver_tol = 1e-10;
    long solver_max_iterations = 100000;

    std::vector<std::string> baselines;
    std::vector<double> randomized_grid;  // defaults to 0, 0.1, .., 1
    std::int64_t periodic_max = 20;

    std::int64_t horizon = 1000000;
    std::uint64_t seed = 1;

    std::string out_dir = "runs/out";

    static ExperimentConfig from_json(const nlohmann::json& v);
    nlohmann::json to_json() const;

    static ExperimentConfig load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file: " + path);
        nlohmann::json v;
        try {
            v = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError(std::string("config parse error: ") + e.what());
        }
        return from_json(v);
    }

    /// FNV-1a of the canonical serialized form; embedded in every output.
    std::string digest() const {
        const std::string dump = to_json().dump();
        std::uint64_t h = 1469598103934665603ull;
        for (unsigned char c : dump) {
            h ^= c;
            h *= 1099511628211ull;
        }
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
        return buf;
    }

    SourceModel source_model() const {
        if (symmetric) return make_symmetric_source(sym_states, sym_change_prob, alarm_states);
        return SourceModel(q, alarm_states);
    }

    SignificanceProfile profile(const SourceModel& model) const {
        Eigen::MatrixXd d;
        if (scalar_weight) {
            d = Eigen::MatrixXd::Constant(model.state_count(), model.state_count(), weight);
            d.diagonal().setZero();
        } else {
            d = weights;
        }
        return SignificanceProfile::alarm_classes(model, std::move(d), g_missed, g_false, g_other);
    }

    std::vector<double> effective_randomized_grid() const {
        if (!randomized_grid.empty()) return randomized_grid;
        std::vector<double> g;
        for (int k = 0; k <= 10; ++k) g.push_back(k / 10.0);
        return g;
    }
};

inline ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& v) {
    using detail::require;
    ExperimentConfig c;
    const auto& source = require(v, "source", "config");
    if (source.contains("symmetric")) {
        c.symmetric = true;
        const auto& sym = source["symmetric"];
        c.sym_states = require(sym, "states", "source.symmetric").get<int>();
        c.sym_change_prob = require(sym, "change_prob", "source.symmetric").get<double>();
    } else if (source.contains("Q")) {
        c.q = detail::matrix(source["Q"], "source.Q");
    } else {
        throw ConfigError("source: need either 'symmetric' or 'Q'");
    }
    c.alarm_states.clear();
    if (source.contains("alarm_states")) {
        for (const auto& a : source["alarm_states"]) {
            const int s = a.get<int>();
            if (s < 1) throw ConfigError("source.alarm_states: states are 1-based");
            c.alarm_states.push_back(s - 1);
        }
    } else {
        c.alarm_states.push_back(0);
    }

    const auto& sig = require(v, "significance", "config");
    if (sig.contains("weights")) {
        c.scalar_weight = false;
        c.weights = detail::matrix(sig["weights"], "significance.weights");
    } else {
        c.scalar_weight = true;
        c.weight = sig.value("weight", 1.0);
    }
    const auto& ages = require(sig, "age_functions", "significance");
    c.g_missed = age_function_from_json(require(ages, "missed", "age_functions"));
    c.g_false = age_function_from_json(require(ages, "false", "age_functions"));
    c.g_other = age_function_from_json(require(ages, "default", "age_functions"));

    const auto& channel = require(v, "channel", "config");
    c.success_probs = detail::number_list(require(channel, "p_s", "channel"), "channel.p_s");
    for (double p : c.success_probs)
        if (p < 0.0 || p > 1.0) throw ConfigError("channel.p_s: probabilities must be in [0,1]");

    c.tx_costs = detail::number_list(require(v, "lambda", "config"), "lambda");
    for (double l : c.tx_costs)
        if (l < 0.0) throw ConfigError("lambda: transmission costs must be >= 0");

    c.age_caps.clear();
    for (double n : detail::number_list(require(v, "N", "config"), "N")) {
        if (n < 1 || n != std::floor(n)) throw ConfigError("N: truncation sizes must be integers >= 1");
        c.age_caps.push_back(static_cast<int>(n));
    }

    if (v.contains("solver")) {
        const auto& s = v["solver"];
        c.solver_kind = s.value("kind", std::string("spi"));
        if (c.solver_kind != "spi" && c.solver_kind != "pi" && c.solver_kind != "rvi")
            throw ConfigError("solver.kind: expected spi, pi or rvi");
        c.solver_tol = s.value("tol", 1e-10);
        c.solver_max_iterations = s.value("max_iterations", 100000L);
    }

    if (v.contains("baselines"))
        c.baselines = v["baselines"].get<std::vector<std::string>>();
    if (v.contains("grids")) {
        const auto& g = v["grids"];
        if (g.contains("randomized"))
            c.randomized_grid = g["randomized"].get<std::vector<double>>();
        c.periodic_max = g.value("periodic_max", std::int64_t{20});
    }

    if (v.contains("simulation")) {
        const auto& s = v["simulation"];
        c.horizon = s.value("horizon", std::int64_t{1000000});
        c.seed = s.value("seed", std::uint64_t{1});
    }
    if (v.contains("output")) c.out_dir = v["output"].value("dir", c.out_dir);
    return c;
}

inline nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json v;
    if (symmetric)
        v["source"]["symmetric"] = {{"states", sym_states}, {"change_prob", sym_change_prob}};
    else
        v["source"]["Q"] = detail::matrix_to_json(q);
    {
        auto alarms = nlohmann::json::array();
        for (int a : alarm_states) alarms.push_back(a + 1);
        v["source"]["alarm_states"] = alarms;
    }
    if (scalar_weight)
        v["significance"]["weight"] = weight;
    else
        v["significance"]["weights"] = detail::matrix_to_json(weights);
    v["significance"]["age_functions"] = {{"missed", age_function_to_json(g_missed)},
                                          {"false", age_function_to_json(g_false)},
                                          {"default", age_function_to_json(g_other)}};
    v["channel"]["p_s"] = success_probs;
    v["lambda"] = tx_costs;
    v["N"] = age_caps;
    v["solver"] = {{"kind", solver_kind}, {"tol", solver_tol}, {"max_iterations", solver_max_iterations}};
    v["baselines"] = baselines;
    v["grids"] = {{"randomized", effective_randomized_grid()}, {"periodic_max", periodic_max}};
    v["simulation"] = {{"horizon", horizon}, {"seed", seed}};
    v["output"] = {{"dir", out_dir}};
    return v;
}

}  // namespace aoce
