#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "gsmc/error.hpp"
#include "gsmc/surv_model.hpp"

namespace gsmc {

/// Fleming-Harrington weight w(s) = S(s-)^rho (1 - S(s-))^gamma.
struct WeightSpec {
    double rho = 0.0;
    double gamma = 0.0;

    WeightSpec() = default;
    WeightSpec(double r, double g) : rho(r), gamma(g) {
        if (!(rho >= 0.0) || !(gamma >= 0.0)) throw DomainError("weight: rho and gamma must be >= 0");
    }

    double operator()(double surv) const {
        // 0^0 is 1 here, so (0,0) is exactly the log-rank weight
        const double a = rho == 0.0 ? 1.0 : std::pow(surv, rho);
        const double c = gamma == 0.0 ? 1.0 : std::pow(1.0 - surv, gamma);
        return a * c;
    }

    bool operator==(const WeightSpec&) const = default;
};

/// Weight whose square is w1*w2: the parameter average used for covariances.
inline WeightSpec mid_weight(const WeightSpec& w1, const WeightSpec& w2) {
    return {0.5 * (w1.rho + w2.rho), 0.5 * (w1.gamma + w2.gamma)};
}

enum class Hypothesis { H0, H1 };

inline const char* to_string(Hypothesis h) { return h == Hypothesis::H0 ? "H0" : "H1"; }

/// Discretized per-subject quantities on s_j = j/b, j = 0..J-1, J = floor(b t).
struct PredictionGrid {
    double b = 0.0;
    double t = 0.0;
    std::vector<double> at_risk1;   // R*_1(j)
    std::vector<double> at_risk0;   // R*_0(j)
    std::vector<double> hazard1;    // h*_1(s_j)
    std::vector<double> hazard0;    // h*_0(s_j)
    std::vector<double> surv;       // pooled S(s_j) under the hypothesis
    std::vector<double> events;     // D*_{j,H}(t)
    std::vector<double> odds;       // phi_j = R*_1 / R*_0
    std::vector<double> ratio;      // theta*_j = h*_1 / h*_0

    std::size_t size() const { return events.size(); }
};

/// Marches the at-risk proportions of both arms forward from s = 0 to t.
/// Administrative censoring depletes subjects whose potential follow-up t - E
/// ends in the current interval, i.e. hazard a(t-s)/A(t-s) for accrual density a
/// and CDF A; for uniform accrual this is I(s > t-R)/(t-s).
inline PredictionGrid march(const TwoArmModel& model, const AccrualCensoring& ac, Hypothesis hyp,
                            double t, double b = 30.0) {
    if (!(t > 0.0) || !std::isfinite(t)) throw DomainError("march: t must be > 0");
    if (!(b >= 1.0)) throw DomainError("march: b must be >= 1");

    const TwoArmModel m = hyp == Hypothesis::H0 ? model.null_model() : model;
    const double p = m.assign_prob();
    const auto J = static_cast<std::size_t>(std::floor(b * t + 1e-9));
    const auto& acc = ac.accrual;
    const double R = acc.duration();
    const double enrolled = acc.is_uniform() ? std::min(t / R, 1.0) : acc.cdf(t);

    PredictionGrid g;
    g.b = b;
    g.t = t;
    for (auto* v : {&g.at_risk1, &g.at_risk0, &g.hazard1, &g.hazard0, &g.surv, &g.events,
                    &g.odds, &g.ratio})
        v->resize(J);

    double r1 = p, r0 = 1.0 - p;
    for (std::size_t j = 0; j < J; ++j) {
        const double s = static_cast<double>(j) / b;
        const double h1 = m.treatment().hazard(s);
        const double h0 = m.control().hazard(s);
        g.at_risk1[j] = r1;
        g.at_risk0[j] = r0;
        g.hazard1[j] = h1;
        g.hazard0[j] = h0;
        g.surv[j] = m.pooled_survival(s);
        g.events[j] = (h0 * r0 + h1 * r1) / b * enrolled;
        g.odds[j] = r0 > 0.0 ? r1 / r0 : 1.0;
        g.ratio[j] = h1 / h0;

        double admin = 0.0;
        if (acc.is_uniform()) {
            if (s > t - R) admin = 1.0 / (b * (t - s));
        } else {
            const double mass = acc.cdf(t - s);
            admin = mass > 0.0 ? acc.density(t - s) / (b * mass) : 1.0;
        }
        admin = std::min(admin, 1.0);
        r1 *= std::max(0.0, 1.0 - h1 / b - ac.censor_rates[1] / b - admin);
        r0 *= std::max(0.0, 1.0 - h0 / b - ac.censor_rates[0] / b - admin);
    }
    return g;
}

/// Per-subject mean of the WLRT numerator.
inline double predict_mean(const PredictionGrid& g, const WeightSpec& w) {
    double e = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
        const double phi = g.odds[j];
        const double pt = phi * g.ratio[j];
        e += g.events[j] * w(g.surv[j]) * (pt / (1.0 + pt) - phi / (1.0 + phi));
    }
    return e;
}

/// Per-subject covariance of two WLRT numerators; the variance when w1 == w2.
inline double predict_covariance(const PredictionGrid& g, const WeightSpec& w1, const WeightSpec& w2) {
    double v = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
        const double phi = g.odds[j];
        v += g.events[j] * w1(g.surv[j]) * w2(g.surv[j]) * phi / ((1.0 + phi) * (1.0 + phi));
    }
    return v;
}

/// Per-subject variance; multiply by n for the statistic's variance.
inline double predict_variance(const PredictionGrid& g, const WeightSpec& w) {
    return predict_covariance(g, w, w);
}

/// D*_H(t): probability that a subject contributes an event by calendar t.
inline double expected_event_fraction(const PredictionGrid& g) {
    double d = 0.0;
    for (double x : g.events) d += x;
    return d;
}

/// Standardized drift per sqrt(subject): E / sqrt(V).
inline double predict_mu(const PredictionGrid& g, const WeightSpec& w) {
    const double v = predict_variance(g, w);
    if (!(v > 0.0)) throw DegenerateError("predict_mu: zero predicted variance");
    return predict_mean(g, w) / std::sqrt(v);
}

inline double predict_mu(const TwoArmModel& model, const AccrualCensoring& ac, Hypothesis hyp,
                         double t, double b, const WeightSpec& w) {
    return predict_mu(march(model, ac, hyp, t, b), w);
}

}  // namespace gsmc
