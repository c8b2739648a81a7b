#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "gsmc/design_engine.hpp"
#include "gsmc/error.hpp"
#include "gsmc/spending.hpp"
#include "gsmc/surv_model.hpp"
#include "gsmc/trial_sim.hpp"

namespace gsmc {

using json = nlohmann::json;

namespace detail {

inline const json& require_key(const json& c, const std::string& key) {
    auto it = c.find(key);
    if (it == c.end() || it->is_null()) throw ConfigError(key, "missing required key");
    return *it;
}

template <class T>
T as(const json& v, const std::string& key) {
    try {
        return v.get<T>();
    } catch (const json::exception&) {
        throw ConfigError(key, "has the wrong type");
    }
}

template <class T>
T required(const json& c, const std::string& key) {
    return as<T>(require_key(c, key), key);
}

template <class T>
T optional(const json& c, const std::string& key, T def) {
    auto it = c.find(key);
    if (it == c.end() || it->is_null()) return def;
    return as<T>(*it, key);
}

inline std::vector<WeightSpec> parse_combo(const json& v, const std::string& key) {
    if (!v.is_array() || v.empty()) throw ConfigError(key, "must be a non-empty list of [rho, gamma]");
    std::vector<WeightSpec> out;
    for (const auto& w : v) {
        if (!w.is_array() || w.size() != 2) throw ConfigError(key, "each weight must be [rho, gamma]");
        out.emplace_back(as<double>(w[0], key), as<double>(w[1], key));
    }
    return out;
}

inline Spending parse_spending(const json& v) {
    const std::string family = optional<std::string>(v, "family", "power");
    if (family == "power") return Spending::power(optional<double>(v, "param", 3.0));
    if (family == "obf" || family == "obrien-fleming") return Spending::obrien_fleming();
    if (family == "schedule")
        return Spending::schedule(required<std::vector<double>>(v, "fractions"),
                                  required<std::vector<double>>(v, "values"));
    throw ConfigError("spending.family", "unknown family '" + family + "'");
}

inline AccrualProfile parse_accrual(const std::string& kind, double R, const std::string& key) {
    if (kind == "uniform") return AccrualProfile::uniform(R);
    if (kind == "staircase") return staircase_accrual(R);
    throw ConfigError(key, "expected 'uniform' or 'staircase'");
}

inline std::array<double, 2> parse_censoring(const json& c, const std::string& key) {
    const auto v = optional<std::vector<double>>(c, key, {0.0, 0.0});
    if (v.size() != 2) throw ConfigError(key, "must be [control, treatment] yearly proportions");
    return {yearly_proportion_to_rate(v[0]), yearly_proportion_to_rate(v[1])};
}

/// Re-throws library domain errors against the key being interpreted.
template <class F>
auto keyed(const std::string& key, F&& f) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(key, e.what());
    }
}

}  // namespace detail

inline json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, "cannot open config file");
    try {
        return json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError(path, std::string("parse error: ") + e.what());
    }
}

/// Sets a top-level key from a command-line string: JSON when it parses,
/// otherwise the raw string.
inline void apply_override(json& cfg, const std::string& key, const std::string& value) {
    try {
        cfg[key] = json::parse(value);
    } catch (const json::parse_error&) {
        cfg[key] = value;
    }
}

inline DesignSpec design_spec_from_config(const json& c) {
    using namespace detail;
    const double lambda = required<double>(c, "lambda");
    const double theta = required<double>(c, "theta");
    const double eps = required<double>(c, "eps");
    const double R = required<double>(c, "R");
    const double tau = required<double>(c, "tau");
    const double p = required<double>(c, "p");
    const double alpha = required<double>(c, "alpha");
    const double beta = required<double>(c, "beta");
    const auto combo = parse_combo(require_key(c, "combo"), "combo");
    const auto nu = required<std::vector<double>>(c, "nu");

    auto model = keyed("theta", [&] { return two_piece(lambda, theta, eps, p); });
    auto accrual = keyed("accrual", [&] { return parse_accrual(optional<std::string>(c, "accrual", "uniform"), R, "accrual"); });
    auto rates = keyed("censor_yearly", [&] { return parse_censoring(c, "censor_yearly"); });
    auto ac = keyed("tau", [&] { return AccrualCensoring(accrual, tau, rates); });

    DesignSpec s{std::move(model), std::move(ac)};
    s.combo = combo;
    s.nu = nu;
    s.alpha = alpha;
    s.beta = beta;
    s.monitor = optional<int>(c, "monitor_weight", 0);
    if (auto it = c.find("spending"); it != c.end() && !it->is_null())
        s.spending = keyed("spending", [&] { return parse_spending(*it); });
    s.b = optional<double>(c, "b", 30.0);
    s.source = keyed("source", [&] { return source_from_string(optional<std::string>(c, "source", "pred-sto")); });
    if (auto it = c.find("mvn"); it != c.end() && !it->is_null()) {
        s.mvn.accuracy = optional<double>(*it, "accuracy", s.mvn.accuracy);
        s.mvn.seed = optional<std::uint64_t>(*it, "seed", s.mvn.seed);
        s.mvn.replicates = optional<int>(*it, "replicates", s.mvn.replicates);
        if (s.mvn.replicates < 1 || s.mvn.replicates % 2 == 0)
            throw ConfigError("mvn.replicates", "must be odd and >= 1");
    }
    if (!(s.b >= 1.0)) throw ConfigError("b", "must be >= 1");
    keyed("nu", [&] {
        s.validate();
        return 0;
    });
    return s;
}

/// Design assumptions plus the true generating law for simulation.
struct ScenarioConfig {
    DesignSpec spec;
    TwoArmModel truth;
    AccrualCensoring true_ac;
    std::vector<Hypothesis> hypotheses;
    long reps_h0 = 20000;
    long reps_h1 = 10000;
    std::uint64_t seed = 20240601;
    double est_accuracy = 1e-4;
};

inline ScenarioConfig scenario_from_config(const json& c) {
    using namespace detail;
    DesignSpec spec = design_spec_from_config(c);
    const double lambda = optional<double>(c, "true_lambda", required<double>(c, "lambda"));
    const double theta = optional<double>(c, "true_theta", required<double>(c, "theta"));
    const double eps = optional<double>(c, "true_eps", required<double>(c, "eps"));
    const double R = required<double>(c, "R");
    auto truth = keyed("true_theta", [&] { return two_piece(lambda, theta, eps, required<double>(c, "p")); });
    const std::string acc = optional<std::string>(c, "true_accrual", optional<std::string>(c, "accrual", "uniform"));
    auto profile = keyed("true_accrual", [&] { return parse_accrual(acc, R, "true_accrual"); });
    auto rates = keyed("true_censor_yearly", [&] {
        return c.contains("true_censor_yearly") ? parse_censoring(c, "true_censor_yearly")
                                                : parse_censoring(c, "censor_yearly");
    });
    AccrualCensoring ac(profile, spec.ac.tau, rates);

    ScenarioConfig out{std::move(spec), std::move(truth), std::move(ac), {}, 20000, 10000, 20240601, 1e-4};
    for (const auto& h : optional<std::vector<std::string>>(c, "hypotheses", {"H0", "H1"})) {
        if (h == "H0")
            out.hypotheses.push_back(Hypothesis::H0);
        else if (h == "H1")
            out.hypotheses.push_back(Hypothesis::H1);
        else
            throw ConfigError("hypotheses", "expected H0 or H1, got '" + h + "'");
    }
    out.reps_h0 = optional<long>(c, "reps_h0", out.reps_h0);
    out.reps_h1 = optional<long>(c, "reps_h1", out.reps_h1);
    if (out.reps_h0 < 1) throw ConfigError("reps_h0", "must be >= 1");
    if (out.reps_h1 < 1) throw ConfigError("reps_h1", "must be >= 1");
    out.seed = optional<std::uint64_t>(c, "seed", out.seed);
    out.est_accuracy = optional<double>(c, "est_accuracy", out.est_accuracy);
    return out;
}

/// Scenario for one hypothesis given the pred-sto and pred-exa designs.
inline Scenario make_scenario(const ScenarioConfig& cfg, Hypothesis hyp, const DesignReport& sto,
                              const std::optional<DesignReport>& exa, int threads = 0) {
    Scenario sc{cfg.truth, cfg.true_ac, sto, exa};
    sc.hyp = hyp;
    sc.reps = hyp == Hypothesis::H0 ? cfg.reps_h0 : cfg.reps_h1;
    sc.seed = cfg.seed + (hyp == Hypothesis::H0 ? 0u : 1u);
    sc.threads = threads;
    sc.est_mvn.accuracy = cfg.est_accuracy;
    sc.est_mvn.seed = cfg.spec.mvn.seed;
    return sc;
}

struct CurveRow {
    double eps;
    long n_mc, d_mc;
    std::vector<long> n_single;  // per combo member
    std::vector<long> d_single;
};

/// Maxcombo and single-test sample sizes as the delay time varies, all other
/// config keys held fixed.
inline std::vector<CurveRow> delay_curve(const json& cfg, const std::vector<double>& grid) {
    const DesignSpec base = design_spec_from_config(cfg);
    std::vector<CurveRow> rows;
    for (double e : grid) {
        if (!(e >= 0.0 && e < base.ac.tau)) throw ConfigError("eps-grid", "values must lie in [0, tau)");
        json ce = cfg;
        ce["eps"] = e;
        const DesignSpec s = design_spec_from_config(ce);
        const DesignReport r = design(s);
        CurveRow row{e, r.n, r.d, {}, {}};
        for (int k = 0; k < s.K(); ++k) {
            const auto st = single_test_design(r, k, s.mvn);
            row.n_single.push_back(st.n);
            row.d_single.push_back(st.d);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace gsmc
