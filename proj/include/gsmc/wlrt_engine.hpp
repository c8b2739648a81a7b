#pragma once

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "gsmc/error.hpp"
#include "gsmc/stoch_predict.hpp"

namespace gsmc {

/// Latent per-subject record; event and censoring times are follow-up times.
struct Subject {
    double entry = 0.0;
    double event_time = std::numeric_limits<double>::infinity();
    double censor_time = std::numeric_limits<double>::infinity();
    int arm = 0;
};

struct TrialData {
    std::vector<Subject> subjects;

    std::size_t size() const { return subjects.size(); }
};

/// Observed data at calendar time t: Y = min(T, C, t - E), event iff T <= min(C, t - E).
struct FrozenView {
    struct Record {
        double entry;
        double time;
        bool event;
        int arm;
    };

    double t = 0.0;
    std::vector<Record> records;  // sorted by observed time

    std::size_t size() const { return records.size(); }
    std::size_t events() const {
        return static_cast<std::size_t>(
            std::count_if(records.begin(), records.end(), [](const Record& r) { return r.event; }));
    }
};

inline FrozenView freeze(const TrialData& data, double t) {
    if (!(t > 0.0)) throw DomainError("freeze: t must be > 0");
    FrozenView v;
    v.t = t;
    v.records.reserve(data.size());
    for (const auto& s : data.subjects) {
        if (s.entry > t) continue;
        const double follow = t - s.entry;
        const double y = std::min({s.event_time, s.censor_time, follow});
        const bool ev = s.event_time <= s.censor_time && s.entry + s.event_time <= t;
        v.records.push_back({s.entry, y, ev, s.arm});
    }
    std::stable_sort(v.records.begin(), v.records.end(),
                     [](const auto& a, const auto& b) { return a.time < b.time; });
    return v;
}

/// Left-continuous pooled Kaplan-Meier estimate S(s-).
inline double pooled_km(const FrozenView& v, double s) {
    double surv = 1.0;
    double at_risk = static_cast<double>(v.size());
    std::size_t i = 0;
    const auto& r = v.records;
    while (i < r.size() && r[i].time < s) {
        const double u = r[i].time;
        double d = 0.0, leaving = 0.0;
        for (; i < r.size() && r[i].time == u; ++i) {
            leaving += 1.0;
            if (r[i].event) d += 1.0;
        }
        if (d > 0.0) surv *= 1.0 - d / at_risk;
        at_risk -= leaving;
    }
    return surv;
}

/// Numerators and estimated covariance matrix of several WLRTs on one view.
struct WlrtPanel {
    std::vector<WeightSpec> weights;
    std::vector<double> numerator;  // G_k
    std::vector<double> cov;        // K x K row-major, sum of w_k w_l d n1 n0 / n^2
    std::size_t events = 0;

    std::size_t dim() const { return weights.size(); }
    double covariance(std::size_t k, std::size_t l) const { return cov[k * dim() + l]; }
    double variance(std::size_t k) const { return covariance(k, k); }

    /// G_k / sqrt(V_k).
    double statistic(std::size_t k) const {
        if (events == 0) throw DegenerateError("wlrt: no events observed");
        const double v = variance(k);
        if (!(v > 0.0)) throw DegenerateError("wlrt: zero estimated variance");
        return numerator[k] / std::sqrt(v);
    }

    double correlation(std::size_t k, std::size_t l) const {
        const double d = std::sqrt(variance(k) * variance(l));
        if (!(d > 0.0)) throw DegenerateError("wlrt: zero estimated variance");
        return covariance(k, l) / d;
    }
};

/// One pass over distinct event times. Tied events share at-risk counts;
/// subjects censored at an event time are still at risk for it.
inline WlrtPanel wlrt_panel(const FrozenView& v, std::span<const WeightSpec> weights) {
    const std::size_t K = weights.size();
    WlrtPanel out;
    out.weights.assign(weights.begin(), weights.end());
    out.numerator.assign(K, 0.0);
    out.cov.assign(K * K, 0.0);

    double n = static_cast<double>(v.size());
    double n1 = 0.0;
    for (const auto& r : v.records) n1 += r.arm == 1 ? 1.0 : 0.0;

    std::vector<double> w(K);
    double surv = 1.0;
    const auto& rec = v.records;
    std::size_t i = 0;
    while (i < rec.size()) {
        const double u = rec[i].time;
        double d = 0.0, d1 = 0.0, leaving = 0.0, leaving1 = 0.0;
        for (; i < rec.size() && rec[i].time == u; ++i) {
            leaving += 1.0;
            if (rec[i].arm == 1) leaving1 += 1.0;
            if (rec[i].event) {
                d += 1.0;
                if (rec[i].arm == 1) d1 += 1.0;
            }
        }
        if (d > 0.0) {
            out.events += static_cast<std::size_t>(d);
            const double info = d * n1 * (n - n1) / (n * n);
            for (std::size_t k = 0; k < K; ++k) {
                w[k] = weights[k](surv);
                out.numerator[k] += w[k] * (d1 - d * n1 / n);
            }
            for (std::size_t k = 0; k < K; ++k)
                for (std::size_t l = 0; l < K; ++l) out.cov[k * K + l] += w[k] * w[l] * info;
            surv *= 1.0 - d / n;
        }
        n -= leaving;
        n1 -= leaving1;
    }
    return out;
}

struct WlrtResult {
    double numerator;
    double variance;
    double statistic;
};

inline WlrtResult wlrt_statistic(const FrozenView& v, const WeightSpec& w) {
    const WeightSpec ws[1] = {w};
    const auto panel = wlrt_panel(v, ws);
    return {panel.numerator[0], panel.variance(0), panel.statistic(0)};
}

/// Estimated Cov(G_w1, G_w2): the variance sum with squared weight w1*w2,
/// i.e. the mid-parameter weight of the two.
inline double estimate_covariance(const FrozenView& v, const WeightSpec& w1, const WeightSpec& w2) {
    const WeightSpec ws[2] = {w1, w2};
    const auto panel = wlrt_panel(v, ws);
    if (panel.events == 0) throw DegenerateError("wlrt: no events observed");
    return panel.covariance(0, 1);
}

namespace detail {

inline std::vector<std::string> split_row(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, delim)) {
        const auto b = cell.find_first_not_of(" \t\r\"");
        const auto e = cell.find_last_not_of(" \t\r\"");
        out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
    }
    return out;
}

}  // namespace detail

/// Reads observed data with header columns entry, time, event, arm (any order,
/// comma, tab or semicolon delimited). Each row becomes a subject whose latent
/// event or censoring time equals the observed time.
inline TrialData read_trial_csv(std::istream& in) {
    std::string header;
    if (!std::getline(in, header)) throw DomainError("trial csv: empty input");
    char delim = ',';
    for (char c : {'\t', ';'})
        if (header.find(c) != std::string::npos && header.find(',') == std::string::npos) delim = c;
    const auto cols = detail::split_row(header, delim);
    auto col = [&](const char* name) {
        auto it = std::find(cols.begin(), cols.end(), name);
        if (it == cols.end()) throw DomainError(std::string("trial csv: missing column '") + name + "'");
        return static_cast<std::size_t>(it - cols.begin());
    };
    const std::size_t ce = col("entry"), ct = col("time"), cd = col("event"), ca = col("arm");

    TrialData data;
    std::string line;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto f = detail::split_row(line, delim);
        if (f.size() < cols.size())
            throw DomainError("trial csv: short row at line " + std::to_string(lineno));
        Subject s;
        try {
            s.entry = std::stod(f[ce]);
            const double y = std::stod(f[ct]);
            const int ev = std::stoi(f[cd]);
            s.arm = std::stoi(f[ca]);
            if ((ev != 0 && ev != 1) || (s.arm != 0 && s.arm != 1) || y < 0.0 || s.entry < 0.0)
                throw DomainError("");
            if (ev == 1)
                s.event_time = y;
            else
                s.censor_time = y;
        } catch (const std::exception&) {
            throw DomainError("trial csv: bad value at line " + std::to_string(lineno));
        }
        data.subjects.push_back(s);
    }
    return data;
}

inline void write_view_csv(std::ostream& out, const FrozenView& v) {
    const auto old = out.precision(10);
    out << "entry,time,event,arm\n";
    for (const auto& r : v.records)
        out << r.entry << ',' << r.time << ',' << (r.event ? 1 : 0) << ',' << r.arm << '\n';
    out.precision(old);
}

}  // namespace gsmc
