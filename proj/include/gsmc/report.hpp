#pragma once

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "gsmc/config.hpp"
#include "gsmc/design_engine.hpp"
#include "gsmc/trial_sim.hpp"

namespace gsmc {

/// 6 significant digits; non-finite values print as NA.
inline std::string fmt6(double x) {
    if (!std::isfinite(x)) return "NA";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

inline std::string weight_label(const WeightSpec& w) {
    return "G(" + fmt6(w.rho) + ";" + fmt6(w.gamma) + ")";  // no comma, the label goes into CSV cells
}

inline std::string stage_label(int m, int M) {
    if (M == 2) return m == 0 ? "int" : "fin";
    return "stage" + std::to_string(m + 1);
}

namespace detail {

inline nlohmann::json matrix_json(const Eigen::MatrixXd& a) {
    auto out = nlohmann::json::array();
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        auto row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < a.cols(); ++j) row.push_back(a(i, j));
        out.push_back(row);
    }
    return out;
}

inline nlohmann::json approx_json(const GaussianApprox& g) {
    std::vector<double> mean(g.mean.data(), g.mean.data() + g.mean.size());
    return {{"drift", mean}, {"corr", matrix_json(g.corr)}, {"repaired", g.repaired}};
}

}  // namespace detail

inline nlohmann::json to_json(const DesignReport& r) {
    auto combo = nlohmann::json::array();
    for (const auto& w : r.combo) combo.push_back({w.rho, w.gamma});
    return {{"source", to_string(r.source)},
            {"combo", combo},
            {"nu", r.nu},
            {"alpha", r.alpha},
            {"beta", r.beta},
            {"spending", r.spending},
            {"spend", r.spend},
            {"times_h0", r.times_h0},
            {"times_h1", r.times_h1},
            {"sigma0", detail::approx_json(r.sigma0)},
            {"sigma1", detail::approx_json(r.sigma1)},
            {"boundaries", r.boundaries},
            {"naive_boundaries", r.naive_boundaries},
            {"n_real", r.n_real},
            {"n", r.n},
            {"d", r.d},
            {"event_fraction", r.event_fraction},
            {"power", r.power},
            {"type1", r.type1},
            {"imprecise", r.imprecise}};
}

inline void write_design_summary(std::ostream& os, const DesignReport& r) {
    const int M = static_cast<int>(r.nu.size());
    os << "source      " << to_string(r.source) << "\n";
    os << "combo      ";
    for (const auto& w : r.combo) os << ' ' << weight_label(w);
    os << "\nspending    " << r.spending << "\n";
    os << "n=" << r.n << " d=" << r.d << " (n_real " << fmt6(r.n_real) << ")\n";
    os << "stage  nu        spend     t_H0      t_H1      boundary  naive     power     type1\n";
    for (int m = 0; m < M; ++m) {
        const auto i = static_cast<std::size_t>(m);
        char line[200];
        std::snprintf(line, sizeof line, "%-6s %-9s %-9s %-9s %-9s %-9s %-9s %-9s %s\n", stage_label(m, M).c_str(),
                      fmt6(r.nu[i]).c_str(), fmt6(r.spend[i]).c_str(), fmt6(r.times_h0[i]).c_str(),
                      fmt6(r.times_h1[i]).c_str(), fmt6(r.boundaries[i]).c_str(),
                      fmt6(r.naive_boundaries[i]).c_str(), fmt6(r.power[i]).c_str(), fmt6(r.type1[i]).c_str());
        os << line;
    }
}

inline void write_oc_csv_header(std::ostream& os) { os << "hypothesis,method,stage,reject,se,reps\n"; }

/// Stage column is "combined" for the last stage and the stage label otherwise.
inline void write_oc_csv(std::ostream& os, const OperatingCharacteristics& oc) {
    for (const auto& m : oc.methods) {
        const int M = static_cast<int>(m.reject.size());
        for (int s = M - 1; s >= 0; --s) {
            const auto i = static_cast<std::size_t>(s);
            os << to_string(oc.hyp) << ',' << to_string(m.method) << ','
               << (s == M - 1 ? std::string("combined") : stage_label(s, M)) << ',' << fmt6(m.reject[i]) << ','
               << fmt6(m.se[i]) << ',' << oc.reps << '\n';
        }
    }
}

inline nlohmann::json to_json(const OperatingCharacteristics& oc) {
    auto methods = nlohmann::json::object();
    for (const auto& m : oc.methods) methods[to_string(m.method)] = {{"reject", m.reject}, {"se", m.se}};
    auto times = nlohmann::json::array();
    for (double t : oc.mean_times) times.push_back(std::isfinite(t) ? nlohmann::json(t) : nlohmann::json());
    return {{"hypothesis", to_string(oc.hyp)},
            {"reps", oc.reps},
            {"exhausted", oc.exhausted},
            {"mean_times", times},
            {"methods", methods},
            {"corr_reps", oc.corr_reps}};
}

inline std::string stat_label(const std::vector<WeightSpec>& combo, std::pair<int, int> s, int M) {
    return weight_label(combo[static_cast<std::size_t>(s.second)]) + "@" + stage_label(s.first, M);
}

inline void write_corr_csv(std::ostream& os, const CorrelationReport& r, int M) {
    os << "hypothesis,stat_a,stat_b,gold,pred_sto,pred_exa,est,bias_sto,bias_exa,bias_est,flag_sto,flag_exa,flag_est\n";
    for (const auto& row : r.rows) {
        const double bs = row.pred_sto - row.gold, be = row.pred_exa - row.gold, bt = row.est - row.gold;
        os << to_string(r.hyp) << ',' << stat_label(r.combo, row.a, M) << ',' << stat_label(r.combo, row.b, M) << ','
           << fmt6(row.gold) << ',' << fmt6(row.pred_sto) << ',' << fmt6(row.pred_exa) << ',' << fmt6(row.est)
           << ',' << fmt6(bs) << ',' << fmt6(be) << ',' << fmt6(bt) << ',' << CorrelationRow::flag(bs, row.gold)
           << ',' << (std::isfinite(be) ? CorrelationRow::flag(be, row.gold) : "") << ','
           << CorrelationRow::flag(bt, row.gold) << '\n';
    }
}

inline void write_curve_csv(std::ostream& os, const std::vector<WeightSpec>& combo, const std::vector<CurveRow>& rows) {
    const int slrt = index_of(combo, WeightSpec(0, 0));
    os << "eps,n_MC,d_MC";
    for (std::size_t k = 0; k < combo.size(); ++k) {
        const bool is_slrt = static_cast<int>(k) == slrt;
        const std::string name = is_slrt ? "SLRT" : (combo.size() == 2 ? "WLRT" : "WLRT" + std::to_string(k));
        os << ",n_" << name << ",d_" << name;
    }
    os << '\n';
    for (const auto& r : rows) {
        os << fmt6(r.eps) << ',' << r.n_mc << ',' << r.d_mc;
        for (std::size_t k = 0; k < r.n_single.size(); ++k) os << ',' << r.n_single[k] << ',' << r.d_single[k];
        os << '\n';
    }
}

}  // namespace gsmc
