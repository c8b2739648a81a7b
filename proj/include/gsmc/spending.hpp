#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "gsmc/error.hpp"
#include "gsmc/normal.hpp"

namespace gsmc {

/// Cumulative type I error alpha(nu) on information fractions nu in [0,1].
struct Spending {
    enum class Family { Power, OBrienFleming, Schedule };

    Family family = Family::Power;
    double param = 3.0;             // exponent of the power family
    std::vector<double> fractions;  // schedule knots in (0,1]
    std::vector<double> values;     // cumulative error at each knot

    static Spending power(double rho = 3.0) {
        if (!(rho > 0.0)) throw DomainError("spending: power exponent must be > 0");
        return {Family::Power, rho, {}, {}};
    }

    static Spending obrien_fleming() { return {Family::OBrienFleming, 0.0, {}, {}}; }

    /// Explicit cumulative error at given fractions, linear in between; the
    /// value at nu = 1 is always the full alpha.
    static Spending schedule(std::vector<double> fractions, std::vector<double> values) {
        if (fractions.size() != values.size() || fractions.empty())
            throw DomainError("spending: schedule needs one value per fraction");
        for (std::size_t i = 0; i < fractions.size(); ++i) {
            const double f0 = i ? fractions[i - 1] : 0.0, v0 = i ? values[i - 1] : 0.0;
            if (!(fractions[i] > f0 && fractions[i] <= 1.0))
                throw DomainError("spending: schedule fractions must increase within (0,1]");
            if (!(values[i] > v0)) throw DomainError("spending: schedule values must increase");
        }
        return {Family::Schedule, 0.0, std::move(fractions), std::move(values)};
    }

    double operator()(double alpha, double nu) const {
        if (!(nu >= 0.0 && nu <= 1.0)) throw DomainError("spending: nu must be in [0,1]");
        if (nu == 0.0) return 0.0;
        if (nu == 1.0) return alpha;
        switch (family) {
            case Family::Power:
                return alpha * std::pow(nu, param);
            case Family::OBrienFleming:
                return 2.0 * (1.0 - norm_cdf(z_upper(alpha / 2.0) / std::sqrt(nu)));
            case Family::Schedule: {
                double f0 = 0.0, v0 = 0.0;
                for (std::size_t i = 0; i <= fractions.size(); ++i) {
                    const double f1 = i < fractions.size() ? fractions[i] : 1.0;
                    const double v1 = i < fractions.size() ? values[i] : alpha;
                    if (nu <= f1) return v0 + (v1 - v0) * (nu - f0) / (f1 - f0);
                    f0 = f1;
                    v0 = v1;
                }
                return alpha;
            }
        }
        return alpha;
    }

    std::string name() const {
        switch (family) {
            case Family::Power: return "power";
            case Family::OBrienFleming: return "obf";
            case Family::Schedule: return "schedule";
        }
        return "";
    }
};

}  // namespace gsmc
