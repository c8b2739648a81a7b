#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <boost/math/special_functions/binomial.hpp>

#include "gsmc/error.hpp"
#include "gsmc/stoch_predict.hpp"
#include "gsmc/surv_model.hpp"

namespace gsmc {

/// Two-piece exponential scenario with uniform accrual and administrative
/// censoring only.
struct ExactScenario {
    double lambda;
    double theta;
    double eps;
    double R;
    double tau;
    double p;

    ExactScenario(double lambda_, double theta_, double eps_, double R_, double tau_, double p_ = 0.5)
        : lambda(lambda_), theta(theta_), eps(eps_), R(R_), tau(tau_), p(p_) {
        if (!(lambda > 0.0) || !(theta > 0.0) || !(eps >= 0.0))
            throw DomainError("exact scenario: need lambda > 0, theta > 0, eps >= 0");
        if (!(R > 0.0 && R <= tau)) throw DomainError("exact scenario: need 0 < R <= tau");
        if (!(p > 0.0 && p < 1.0)) throw DomainError("exact scenario: p must be in (0,1)");
    }

    /// Continuity constant of the treatment survival c*exp(-theta*lambda*s) for s > eps.
    double c() const { return std::exp(-(1.0 - theta) * lambda * eps); }

    ExactScenario null() const { return {lambda, 1.0, eps, R, tau, p}; }

    /// Recognizes a two-piece model; anything else has no closed form here.
    static ExactScenario from(const TwoArmModel& m, const AccrualCensoring& ac) {
        if (!ac.accrual.is_uniform() || ac.has_random_censoring())
            throw UnsupportedModelError("exact prediction needs uniform accrual and no random censoring");
        const auto& h0 = m.control().hazards();
        const auto& h1 = m.treatment().hazards();
        const double lambda = h0[0];
        for (double h : h0)
            if (h != lambda) throw UnsupportedModelError("exact prediction needs an exponential control arm");
        double eps = 0.0;
        std::size_t changes = 0;
        for (std::size_t q = 1; q < h1.size(); ++q) {
            if (h1[q] != h1[q - 1]) {
                ++changes;
                eps = m.change_points()[q - 1];
            }
        }
        if (changes > 1) throw UnsupportedModelError("exact prediction supports a single change point");
        if (changes == 1 && h1[0] != lambda)
            throw UnsupportedModelError("exact prediction needs equal hazards before the delay");
        return {lambda, h1.back() / lambda, eps, ac.accrual_duration(), ac.tau, m.assign_prob()};
    }
};

namespace detail {

inline double expm(double x) { return x > 700.0 ? 0.0 : std::exp(-x); }

inline void require_k(double k) {
    if (!(k > 0.0)) throw DomainError("utility function: k must be > 0");
}

}  // namespace detail

/// v = integral_0^eps lambda exp(-k lambda x) dx, valid when eps <= t - R.
inline double util_v(double eps, double k, double lambda) {
    detail::require_k(k);
    return (1.0 - detail::expm(k * lambda * eps)) / k;
}

/// u = integral_0^{eps ^ t} min((t-x)/R, 1) lambda exp(-k lambda x) dx.
inline double util_u(double t, double eps, double k, double lambda, double R) {
    detail::require_k(k);
    const double a = std::max(t - R, 0.0);
    const double e = std::min(eps, t);
    if (e <= a) return util_v(e, k, lambda);
    const double ea = detail::expm(k * lambda * a);
    const double ee = detail::expm(k * lambda * e);
    return (1.0 - ea) / k + std::min(R, t) / (k * R) * ea - std::max(t - eps, 0.0) / (k * R) * ee +
           (ee - ea) / (k * k * R * lambda);
}

inline double util_uv(double t, double eps, double k, double lambda, double R) {
    detail::require_k(k);
    if (!(t >= 0.0)) throw DomainError("util_uv: t must be >= 0");
    return eps <= t - R ? util_v(eps, k, lambda) : util_u(t, eps, k, lambda, R);
}

/// integral of min((t-x)/R,1) S1^{k1} S0^{k2} f1 over [0, t].
inline double exact_h1(double t, double k1, double k2, const ExactScenario& sc) {
    if (!(k1 >= 0.0) || !(k2 >= 0.0)) throw DomainError("h1: k must be >= 0");
    const double l = sc.lambda, th = sc.theta, R = sc.R;
    const double kk = th * (k1 + 1.0) + k2;
    return util_uv(t, sc.eps, k1 + k2 + 1.0, l, R) +
           std::pow(sc.c(), k1 + 1.0) * th * (util_u(t, t, kk, l, R) - util_uv(t, sc.eps, kk, l, R));
}

/// integral of min((t-x)/R,1) S1^{k1} S0^{k2} f0 over [0, t].
inline double exact_h0(double t, double k1, double k2, const ExactScenario& sc) {
    if (!(k1 >= 0.0) || !(k2 >= 0.0)) throw DomainError("h0: k must be >= 0");
    const double l = sc.lambda, R = sc.R;
    const double kk = sc.theta * k1 + k2 + 1.0;
    return util_uv(t, sc.eps, k1 + k2 + 1.0, l, R) +
           std::pow(sc.c(), k1) * (util_u(t, t, kk, l, R) - util_uv(t, sc.eps, kk, l, R));
}

/// integral of min((t-x)/R,1) S^k f over [0, t] for the pooled law.
inline double exact_h_tilde(double t, int k, const ExactScenario& sc) {
    if (k < 0) throw DomainError("h_tilde: k must be >= 0");
    const double p = sc.p;
    double total = 0.0;
    for (int i = 0; i <= k; ++i) {
        const double coef = boost::math::binomial_coefficient<double>(static_cast<unsigned>(k),
                                                                      static_cast<unsigned>(i)) *
                            std::pow(p, i) * std::pow(1.0 - p, k - i);
        total += coef * (p * exact_h1(t, i, k - i, sc) + (1.0 - p) * exact_h0(t, i, k - i, sc));
    }
    return total;
}

namespace detail {

inline int integer_power(double x, const char* what) {
    const double r = std::round(x);
    if (std::abs(x - r) > 1e-12 || r < 0.0) throw UnsupportedWeightError(std::string(what) + " must be a nonnegative integer");
    return static_cast<int>(r);
}

/// p(1-p) * integral of min((t-x)/R,1) S^a (1-S)^c f, by binomial expansion of (1-S)^c.
inline double exact_power_integral(Hypothesis hyp, int a, int c, double t, const ExactScenario& sc) {
    double total = 0.0;
    for (int i = 0; i <= c; ++i) {
        const double coef = boost::math::binomial_coefficient<double>(static_cast<unsigned>(c),
                                                                      static_cast<unsigned>(i)) *
                            (i % 2 == 0 ? 1.0 : -1.0);
        const double f = hyp == Hypothesis::H0 ? util_u(t, t, a + i + 1.0, sc.lambda, sc.R)
                                               : exact_h_tilde(t, a + i, sc);
        total += coef * f;
    }
    return sc.p * (1.0 - sc.p) * total;
}

}  // namespace detail

/// Variance of the WLRT numerator for n subjects; integer (rho, gamma) only.
inline double exact_variance(Hypothesis hyp, const WeightSpec& w, double t, const ExactScenario& sc,
                             double n = 1.0) {
    const int r = detail::integer_power(w.rho, "rho");
    const int g = detail::integer_power(w.gamma, "gamma");
    return n * detail::exact_power_integral(hyp, 2 * r, 2 * g, t, sc);
}

/// Covariance of two numerators: the squared weight becomes S^{rho1+rho2}(1-S)^{gamma1+gamma2}.
inline double exact_covariance(const WeightSpec& w1, const WeightSpec& w2, double t, Hypothesis hyp,
                               const ExactScenario& sc, double n = 1.0) {
    const int a = detail::integer_power(w1.rho + w2.rho, "rho1 + rho2");
    const int c = detail::integer_power(w1.gamma + w2.gamma, "gamma1 + gamma2");
    return n * detail::exact_power_integral(hyp, a, c, t, sc);
}

/// Probability that a subject contributes an event by calendar t.
inline double exact_event_fraction(Hypothesis hyp, double t, const ExactScenario& sc) {
    return hyp == Hypothesis::H0 ? util_u(t, t, 1.0, sc.lambda, sc.R) : exact_h_tilde(t, 0, sc);
}

}  // namespace gsmc
