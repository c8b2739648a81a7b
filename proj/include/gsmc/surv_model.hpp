#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <iterator>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "gsmc/error.hpp"

namespace gsmc {

namespace detail {

inline void require_time(double s, const char* what) {
    if (!(s >= 0.0)) throw DomainError(std::string(what) + ": time must be >= 0");
}

}  // namespace detail

/// Event-time law with constant hazard on [eps_{q-1}, eps_q), eps_0 = 0 and the
/// last interval open to infinity. Time unit is months throughout.
class PiecewiseExponential {
public:
    /// `change_points` are the interior boundaries eps_1 < ... < eps_{Q-1}
    /// (all > 0); `hazards` has one rate per interval, so Q = change_points + 1.
    PiecewiseExponential(std::vector<double> change_points, std::vector<double> hazards)
        : hazards_(std::move(hazards)) {
        if (hazards_.size() != change_points.size() + 1)
            throw DomainError("piecewise exponential: need exactly one hazard per interval");
        for (double h : hazards_)
            if (!(h > 0.0) || !std::isfinite(h))
                throw DomainError("piecewise exponential: hazards must be positive and finite");
        starts_.reserve(hazards_.size());
        starts_.push_back(0.0);
        for (double c : change_points) {
            if (!(c > starts_.back()) || !std::isfinite(c))
                throw DomainError("piecewise exponential: change points must be strictly increasing and > 0");
            starts_.push_back(c);
        }
        cum_.resize(hazards_.size(), 0.0);
        for (std::size_t q = 1; q < hazards_.size(); ++q)
            cum_[q] = cum_[q - 1] + hazards_[q - 1] * (starts_[q] - starts_[q - 1]);
    }

    static PiecewiseExponential exponential(double rate) { return {{}, {rate}}; }

    std::size_t pieces() const { return hazards_.size(); }
    std::span<const double> hazards() const { return hazards_; }
    /// Interior change points eps_1..eps_{Q-1}.
    std::span<const double> change_points() const {
        return std::span<const double>(starts_).subspan(1);
    }

    /// Interval index q with eps_q <= s < eps_{q+1} (right-continuous).
    std::size_t interval_of(double s) const {
        auto it = std::upper_bound(starts_.begin(), starts_.end(), s);
        return static_cast<std::size_t>(std::distance(starts_.begin(), it)) - 1;
    }

    double hazard(double s) const {
        detail::require_time(s, "hazard");
        return hazards_[interval_of(s)];
    }

    double cumulative_hazard(double s) const {
        detail::require_time(s, "cumulative_hazard");
        if (std::isinf(s)) return std::numeric_limits<double>::infinity();
        const std::size_t q = interval_of(s);
        return cum_[q] + hazards_[q] * (s - starts_[q]);
    }

    double survival(double s) const { return std::exp(-cumulative_hazard(s)); }

    /// f(s) = S(s) * lambda_q, using the right-hand hazard at a change point.
    double density(double s) const { return survival(s) * hazard(s); }

    /// Inverse of the cumulative hazard: the time s with Lambda(s) = h.
    double time_at_cumulative_hazard(double h) const {
        if (!(h >= 0.0)) throw DomainError("time_at_cumulative_hazard: h must be >= 0");
        auto it = std::upper_bound(cum_.begin(), cum_.end(), h);
        const std::size_t q = static_cast<std::size_t>(std::distance(cum_.begin(), it)) - 1;
        return starts_[q] + (h - cum_[q]) / hazards_[q];
    }

    /// Same law expressed on a finer grid; `grid` must contain every change point.
    PiecewiseExponential refined(std::span<const double> grid) const {
        std::vector<double> rates;
        rates.reserve(grid.size() + 1);
        rates.push_back(hazards_[0]);
        for (double c : grid) rates.push_back(hazards_[interval_of(c)]);
        return {std::vector<double>(grid.begin(), grid.end()), std::move(rates)};
    }

private:
    std::vector<double> starts_;
    std::vector<double> hazards_;
    std::vector<double> cum_;  // cumulative hazard at each interval start
};

/// Control (arm 0) and treatment (arm 1) laws on a shared change-point grid,
/// with treatment assignment probability p.
class TwoArmModel {
public:
    TwoArmModel(const PiecewiseExponential& control, const PiecewiseExponential& treatment,
                double assign_prob)
        : control_(control), treatment_(treatment), p_(assign_prob) {
        if (!(p_ > 0.0 && p_ < 1.0)) throw DomainError("assignment probability must be in (0,1)");
        std::vector<double> grid;
        auto a = control.change_points();
        auto b = treatment.change_points();
        std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(grid));
        control_ = control.refined(grid);
        treatment_ = treatment.refined(grid);
    }

    const PiecewiseExponential& control() const { return control_; }
    const PiecewiseExponential& treatment() const { return treatment_; }
    const PiecewiseExponential& arm(int a) const { return a == 1 ? treatment_ : control_; }
    double assign_prob() const { return p_; }
    std::span<const double> change_points() const { return control_.change_points(); }
    std::size_t pieces() const { return control_.pieces(); }

    /// theta_q = lambda_{1q} / lambda_{0q}.
    double hazard_ratio(std::size_t q) const {
        return treatment_.hazards()[q] / control_.hazards()[q];
    }

    /// S(s) = (1-p) S_0(s) + p S_1(s).
    double pooled_survival(double s) const {
        return (1.0 - p_) * control_.survival(s) + p_ * treatment_.survival(s);
    }

    double pooled_density(double s) const {
        return (1.0 - p_) * control_.density(s) + p_ * treatment_.density(s);
    }

    /// The null law: treatment hazards replaced by control hazards.
    TwoArmModel null_model() const { return {control_, control_, p_}; }

private:
    PiecewiseExponential control_;
    PiecewiseExponential treatment_;
    double p_;
};

/// Exponential control arm against a treatment arm whose hazard drops from
/// lambda to theta*lambda after a delay eps.
inline TwoArmModel two_piece(double lambda, double theta, double eps, double p = 0.5) {
    if (!(lambda > 0.0)) throw DomainError("two_piece: lambda must be > 0");
    if (!(theta > 0.0)) throw DomainError("two_piece: theta must be > 0");
    if (!(eps >= 0.0)) throw DomainError("two_piece: eps must be >= 0");
    auto control = PiecewiseExponential::exponential(lambda);
    auto treatment = eps > 0.0 ? PiecewiseExponential({eps}, {lambda, theta * lambda})
                               : PiecewiseExponential::exponential(theta * lambda);
    return {control, treatment, p};
}

/// Entry-time density on [0, R], piecewise constant between knots.
class AccrualProfile {
public:
    static AccrualProfile uniform(double duration) {
        if (!(duration > 0.0)) throw DomainError("accrual duration must be > 0");
        return AccrualProfile({0.0, duration}, {1.0 / duration}, true);
    }

    /// `knots` = 0 < k_1 < ... < R (R last); `rates[i]` is the entry density on
    /// [knots[i], knots[i+1]). Rates must integrate to 1.
    static AccrualProfile piecewise(std::vector<double> knots, std::vector<double> rates) {
        if (knots.size() < 2 || rates.size() + 1 != knots.size() || knots.front() != 0.0)
            throw DomainError("accrual profile: need knots 0=k0<...<R and one rate per segment");
        double total = 0.0;
        for (std::size_t i = 0; i < rates.size(); ++i) {
            if (!(knots[i + 1] > knots[i])) throw DomainError("accrual profile: knots must increase");
            if (!(rates[i] >= 0.0)) throw DomainError("accrual profile: rates must be >= 0");
            total += rates[i] * (knots[i + 1] - knots[i]);
        }
        if (std::abs(total - 1.0) > 1e-9) throw DomainError("accrual profile: rates must integrate to 1");
        return AccrualProfile(std::move(knots), std::move(rates), false);
    }

    /// Builds a normalized profile from relative rates on unit-free segments.
    static AccrualProfile from_relative(std::vector<double> knots, std::vector<double> rates) {
        double total = 0.0;
        for (std::size_t i = 0; i < rates.size() && i + 1 < knots.size(); ++i)
            total += rates[i] * (knots[i + 1] - knots[i]);
        if (!(total > 0.0)) throw DomainError("accrual profile: rates must have positive mass");
        for (double& r : rates) r /= total;
        return piecewise(std::move(knots), std::move(rates));
    }

    bool is_uniform() const { return uniform_; }
    double duration() const { return knots_.back(); }
    std::span<const double> knots() const { return knots_; }
    std::span<const double> rates() const { return rates_; }

    double density(double x) const {
        if (x < 0.0 || x >= duration()) return 0.0;
        return rates_[segment_of(x)];
    }

    double cdf(double x) const {
        if (x <= 0.0) return 0.0;
        if (x >= duration()) return 1.0;
        const std::size_t i = segment_of(x);
        return cum_[i] + rates_[i] * (x - knots_[i]);
    }

    double quantile(double u) const {
        if (!(u >= 0.0 && u <= 1.0)) throw DomainError("accrual quantile: u must be in [0,1]");
        for (std::size_t i = 0; i < rates_.size(); ++i) {
            const double next = cum_[i] + rates_[i] * (knots_[i + 1] - knots_[i]);
            if (u <= next && rates_[i] > 0.0) return knots_[i] + (u - cum_[i]) / rates_[i];
        }
        return duration();
    }

private:
    AccrualProfile(std::vector<double> knots, std::vector<double> rates, bool uniform)
        : knots_(std::move(knots)), rates_(std::move(rates)), uniform_(uniform) {
        cum_.assign(rates_.size(), 0.0);
        for (std::size_t i = 1; i < rates_.size(); ++i)
            cum_[i] = cum_[i - 1] + rates_[i - 1] * (knots_[i] - knots_[i - 1]);
    }

    std::size_t segment_of(double x) const {
        auto it = std::upper_bound(knots_.begin(), knots_.end(), x);
        return std::min<std::size_t>(static_cast<std::size_t>(std::distance(knots_.begin(), it)) - 1,
                                     rates_.size() - 1);
    }

    std::vector<double> knots_;
    std::vector<double> rates_;
    std::vector<double> cum_;
    bool uniform_ = true;
};

/// Monthly exponential rate whose 12-month CDF equals a yearly proportion.
inline double yearly_proportion_to_rate(double proportion) {
    if (!(proportion >= 0.0 && proportion < 1.0))
        throw DomainError("yearly censoring proportion must be in [0,1)");
    return -std::log1p(-proportion) / 12.0;
}

/// Accrual window [0, R], planned study end tau, and per-arm random censoring
/// rates (index 0 control, 1 treatment) on top of administrative censoring.
struct AccrualCensoring {
    AccrualCensoring(double accrual_duration, double study_end,
                     std::array<double, 2> censor_rates = {0.0, 0.0})
        : AccrualCensoring(AccrualProfile::uniform(accrual_duration), study_end, censor_rates) {}

    AccrualCensoring(AccrualProfile profile, double study_end,
                     std::array<double, 2> censor_rates = {0.0, 0.0})
        : accrual(std::move(profile)), tau(study_end), censor_rates(censor_rates) {
        if (!(accrual.duration() > 0.0 && accrual.duration() <= tau))
            throw DomainError("accrual/censoring: need 0 < R <= tau");
        for (double c : censor_rates)
            if (!(c >= 0.0) || !std::isfinite(c)) throw DomainError("censoring rates must be >= 0");
    }

    double accrual_duration() const { return accrual.duration(); }
    bool has_random_censoring() const { return censor_rates[0] > 0.0 || censor_rates[1] > 0.0; }

    AccrualProfile accrual;
    double tau;
    std::array<double, 2> censor_rates;
};

}  // namespace gsmc
