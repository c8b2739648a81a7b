#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/tools/roots.hpp>

#include "gsmc/corr_assembly.hpp"
#include "gsmc/error.hpp"
#include "gsmc/exact_predict.hpp"
#include "gsmc/mvn_quad.hpp"
#include "gsmc/normal.hpp"
#include "gsmc/spending.hpp"
#include "gsmc/stoch_predict.hpp"
#include "gsmc/surv_model.hpp"

namespace gsmc {

/// Where correlations and stopping times come from. `Estimated` designs with
/// the stochastic predictor and re-derives boundaries from data during a trial;
/// `Naive` applies single-test boundaries to the maximum.
enum class SourceKind { PredSto, PredExa, Estimated, Naive };

inline const char* to_string(SourceKind s) {
    switch (s) {
        case SourceKind::PredSto: return "pred-sto";
        case SourceKind::PredExa: return "pred-exa";
        case SourceKind::Estimated: return "est";
        case SourceKind::Naive: return "naive";
    }
    return "";
}

inline SourceKind source_from_string(const std::string& s) {
    if (s == "pred-sto") return SourceKind::PredSto;
    if (s == "pred-exa") return SourceKind::PredExa;
    if (s == "est") return SourceKind::Estimated;
    if (s == "naive") return SourceKind::Naive;
    throw DomainError("unknown source '" + s + "' (expected pred-sto, pred-exa, est or naive)");
}

struct DesignSpec {
    TwoArmModel model;                  // H1 law; H0 sets the treatment hazards to control
    AccrualCensoring ac;
    std::vector<WeightSpec> combo = {WeightSpec(0, 0), WeightSpec(0, 1)};
    std::vector<double> nu = {0.6, 1.0};
    int monitor = 0;                    // index into combo that defines the stages
    double alpha = 0.025;               // one-sided
    double beta = 0.1;
    Spending spending = Spending::power(3.0);
    double b = 30.0;
    SourceKind source = SourceKind::PredSto;
    MvnProblem mvn;                     // accuracy, seed and replicates; bounds unused

    void validate() const {
        if (combo.empty()) throw DomainError("design: combo must not be empty");
        if (nu.empty() || nu.back() != 1.0) throw DomainError("design: stage fractions must end at 1");
        for (std::size_t m = 0; m < nu.size(); ++m)
            if (!(nu[m] > (m ? nu[m - 1] : 0.0))) throw DomainError("design: stage fractions must increase in (0,1]");
        if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("design: alpha must be in (0,1)");
        if (!(beta > 0.0 && beta < 1.0)) throw DomainError("design: beta must be in (0,1)");
        if (monitor < 0 || monitor >= static_cast<int>(combo.size()))
            throw DomainError("design: monitor_weight must index the combo");
    }

    int K() const { return static_cast<int>(combo.size()); }
    int M() const { return static_cast<int>(nu.size()); }
};

struct DesignReport {
    SourceKind source = SourceKind::PredSto;
    std::vector<WeightSpec> combo;
    std::vector<double> nu;
    double alpha = 0.0;
    double beta = 0.0;
    std::string spending;
    std::vector<double> spend;             // cumulative alpha(nu_m)
    std::vector<double> times_h0;
    std::vector<double> times_h1;
    GaussianApprox sigma0;
    GaussianApprox sigma1;
    std::vector<double> boundaries;        // on the sign-flipped standardized scale
    std::vector<double> naive_boundaries;  // single-test boundaries for comparison
    double n_real = 0.0;
    long n = 0;
    long d = 0;
    double event_fraction = 0.0;           // D*_H1(tau)
    std::vector<double> power;             // cumulative rejection by stage under H1 at n
    std::vector<double> type1;             // cumulative rejection by stage under H0
    bool imprecise = false;
};

namespace detail {

inline bool monitors_events(const DesignSpec& s) {
    return s.combo[static_cast<std::size_t>(s.monitor)] == WeightSpec(0, 0);
}

/// The monitored information quantity under `hyp` at calendar t.
inline double information(const DesignSpec& s, Hypothesis hyp, double t, bool exact) {
    const auto& w = s.combo[static_cast<std::size_t>(s.monitor)];
    if (exact) {
        const ExactScenario sc = ExactScenario::from(s.model, s.ac);
        return monitors_events(s) ? exact_event_fraction(hyp, t, sc) : exact_variance(hyp, w, t, sc);
    }
    const auto g = march(s.model, s.ac, hyp, t, s.b);
    return monitors_events(s) ? expected_event_fraction(g) : predict_variance(g, w);
}

inline double solve_root(const std::function<double(double)>& f, double lo, double hi, double tol,
                         const char* what) {
    const double flo = f(lo), fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0.0) == (fhi > 0.0)) throw SolverError(std::string(what) + ": root not bracketed");
    std::uintmax_t it = 200;
    auto r = boost::math::tools::toms748_solve(
        f, lo, hi, flo, fhi, [tol](double a, double b) { return std::abs(b - a) <= tol; }, it);
    return 0.5 * (r.first + r.second);
}

inline Eigen::MatrixXd information_correlation(const std::vector<double>& nu) {
    const auto M = static_cast<Eigen::Index>(nu.size());
    Eigen::MatrixXd c(M, M);
    for (Eigen::Index i = 0; i < M; ++i)
        for (Eigen::Index j = 0; j < M; ++j)
            c(i, j) = std::sqrt(std::min(nu[static_cast<std::size_t>(i)], nu[static_cast<std::size_t>(j)]) /
                                std::max(nu[static_cast<std::size_t>(i)], nu[static_cast<std::size_t>(j)]));
    return c;
}

}  // namespace detail

/// Calendar times at which the monitored quantity reaches nu_m times its H1
/// value at tau. Uses the closed forms when `exact` is set.
inline std::vector<double> predict_stopping_times(const DesignSpec& s, Hypothesis hyp, bool exact = false) {
    s.validate();
    const double tau = s.ac.tau;
    const double cap = tau + 5.0 * s.ac.accrual_duration();
    const double full = detail::information(s, Hypothesis::H1, tau, exact);
    if (!(full > 0.0)) throw DegenerateError("stopping times: no information at tau");
    const double top = detail::information(s, hyp, cap, exact);
    std::vector<double> out;
    for (double v : s.nu) {
        if (hyp == Hypothesis::H1 && v == 1.0) {
            out.push_back(tau);
            continue;
        }
        const double target = v * full;
        if (top < target) throw InfeasibleStageError("stopping times: target information is not reached by tau + 5R");
        double lo = 0.0, hi = cap;
        while (hi - lo > 1e-6) {
            const double mid = 0.5 * (lo + hi);
            if (detail::information(s, hyp, mid, exact) < target)
                lo = mid;
            else
                hi = mid;
        }
        out.push_back(0.5 * (lo + hi));
    }
    return out;
}

/// Cumulative probability of crossing by each stage for statistics
/// N(shift, corr) in stage-major blocks of K and boundaries g per stage.
inline std::vector<double> crossing_probabilities(const std::vector<double>& g, const Eigen::VectorXd& shift,
                                                  const Eigen::MatrixXd& corr, int K, const MvnProblem& opts) {
    const int M = static_cast<int>(g.size());
    std::vector<double> out;
    for (int m = 1; m <= M; ++m) {
        std::vector<double> u;
        for (int j = 0; j < m; ++j)
            for (int k = 0; k < K; ++k) u.push_back(g[static_cast<std::size_t>(j)] - shift(j * K + k));
        out.push_back(1.0 - mvn_cdf(u, corr.topLeftCorner(m * K, m * K), opts));
    }
    return out;
}

/// Sequential stage equations: P(no crossing before m, crossing at m | H0)
/// equals the spending increment at m.
inline std::vector<double> solve_boundaries(const Eigen::MatrixXd& sigma0, int K, const std::vector<double>& spend,
                                            const MvnProblem& opts) {
    const int M = static_cast<int>(spend.size());
    if (sigma0.rows() != K * M) throw DomainError("solve_boundaries: matrix size does not match K*M");
    std::vector<double> g;
    double stay = 1.0;  // P(no crossing through stage m-1)
    for (int m = 1; m <= M; ++m) {
        const double inc = spend[static_cast<std::size_t>(m - 1)] - (m > 1 ? spend[static_cast<std::size_t>(m - 2)] : 0.0);
        if (!(inc > 0.0)) throw DegenerateError("solve_boundaries: spending increment must be positive");
        const Eigen::MatrixXd c = sigma0.topLeftCorner(m * K, m * K);
        auto f = [&](double x) {
            std::vector<double> u;
            for (int j = 0; j < m - 1; ++j) u.insert(u.end(), K, g[static_cast<std::size_t>(j)]);
            u.insert(u.end(), K, x);
            return stay - mvn_cdf(u, c, opts) - inc;
        };
        const double gm = detail::solve_root(f, 0.0, 15.0, 1e-7, "solve_boundaries");
        g.push_back(gm);
        std::vector<double> u;
        for (int j = 0; j < m; ++j) u.insert(u.end(), K, g[static_cast<std::size_t>(j)]);
        stay = mvn_cdf(u, c, opts);
    }
    return g;
}

/// Single-test boundaries using the nominal information fractions.
inline std::vector<double> naive_boundaries(const std::vector<double>& nu, const std::vector<double>& spend,
                                            const MvnProblem& opts) {
    return solve_boundaries(detail::information_correlation(nu), 1, spend, opts);
}

struct SampleSize {
    double n_real;
    long n;
};

/// Smallest n with P(no crossing | H1) <= beta, where `drift` is the
/// per-sqrt(subject) mean of the sign-flipped statistics.
inline SampleSize solve_sample_size(const std::vector<double>& g, const Eigen::VectorXd& drift,
                                    const Eigen::MatrixXd& sigma1, int K, double beta, const MvnProblem& opts) {
    if (!(drift.maxCoeff() > 0.0)) throw NoEffectError("sample size: no positive drift, power cannot be reached");
    const int M = static_cast<int>(g.size());
    auto miss = [&](double n) {
        std::vector<double> u;
        for (int j = 0; j < M; ++j)
            for (int k = 0; k < K; ++k) u.push_back(g[static_cast<std::size_t>(j)] - std::sqrt(n) * drift(j * K + k));
        return mvn_cdf(u, sigma1, opts) - beta;
    };
    const double nr = detail::solve_root(miss, 10.0, 1e6, 1e-3, "solve_sample_size");
    return {nr, static_cast<long>(std::ceil(nr - 1e-9))};
}

/// Required events for the standard log-rank test with log hazard ratio delta.
inline double schoenfeld_events_real(double alpha, double beta, double p, double delta) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("schoenfeld: p must be in (0,1)");
    if (delta == 0.0) throw NoEffectError("schoenfeld: zero log hazard ratio");
    const double z = z_upper(alpha) + z_upper(beta);
    return z * z / (p * (1.0 - p) * delta * delta);
}

inline long schoenfeld_events(double alpha, double beta, double p, double delta) {
    return static_cast<long>(std::ceil(schoenfeld_events_real(alpha, beta, p, delta) - 1e-9));
}

inline std::unique_ptr<VarianceSource> make_source(const DesignSpec& s, Hypothesis hyp) {
    if (s.source == SourceKind::PredExa) return std::make_unique<ExactSource>(s.model, s.ac, hyp, s.b);
    return std::make_unique<StochasticSource>(s.model, s.ac, hyp, s.b);
}

/// Stopping times, correlation matrices, boundaries, sample size and event target.
inline DesignReport design(const DesignSpec& s) {
    s.validate();
    if (s.source == SourceKind::Estimated)
        throw DomainError("design: estimated correlations need trial data; use pred-sto, pred-exa or naive");
    const int K = s.K(), M = s.M();
    const bool exact = s.source == SourceKind::PredExa;

    DesignReport r;
    r.source = s.source;
    r.combo = s.combo;
    r.nu = s.nu;
    r.alpha = s.alpha;
    r.beta = s.beta;
    r.spending = s.spending.name();
    for (double v : s.nu) r.spend.push_back(s.spending(s.alpha, v));

    r.times_h0 = predict_stopping_times(s, Hypothesis::H0, exact);
    r.times_h1 = predict_stopping_times(s, Hypothesis::H1, exact);
    r.sigma0 = assemble(*make_source(s, Hypothesis::H0), s.combo, r.times_h0);
    r.sigma1 = assemble(*make_source(s, Hypothesis::H1), s.combo, r.times_h1);

    r.naive_boundaries = naive_boundaries(s.nu, r.spend, s.mvn);
    if (s.source == SourceKind::Naive) {
        r.boundaries = r.naive_boundaries;
    } else {
        r.boundaries = solve_boundaries(r.sigma0.corr, K, r.spend, s.mvn);
    }

    // statistics are sign-flipped so that benefit (negative drift) rejects upward
    const Eigen::VectorXd drift = -r.sigma1.mean;
    const auto ss = solve_sample_size(r.boundaries, drift, r.sigma1.corr, K, s.beta, s.mvn);
    r.n_real = ss.n_real;
    r.n = ss.n;
    r.event_fraction = expected_event_fraction(march(s.model, s.ac, Hypothesis::H1, s.ac.tau, s.b));
    r.d = static_cast<long>(std::ceil(static_cast<double>(r.n) * r.event_fraction - 1e-9));

    r.power = crossing_probabilities(r.boundaries, std::sqrt(static_cast<double>(r.n)) * drift, r.sigma1.corr, K, s.mvn);
    r.type1 = crossing_probabilities(r.boundaries, Eigen::VectorXd::Zero(K * M), r.sigma0.corr, K, s.mvn);
    return r;
}

/// Group-sequential design for combo member k alone, on the maxcombo
/// design's stopping times and the matching block of its predictions.
struct SingleTestDesign {
    std::vector<double> boundaries;
    double n_real = 0.0;
    long n = 0;
    long d = 0;
};

inline SingleTestDesign single_test_design(const DesignReport& r, int k, const MvnProblem& opts) {
    const int K = static_cast<int>(r.combo.size());
    const int M = static_cast<int>(r.nu.size());
    if (k < 0 || k >= K) throw DomainError("single_test_design: index outside the combo");
    std::vector<Eigen::Index> idx;
    for (int m = 0; m < M; ++m) idx.push_back(m * K + k);
    Eigen::MatrixXd c0(M, M), c1(M, M);
    Eigen::VectorXd drift(M);
    for (int i = 0; i < M; ++i) {
        drift(i) = -r.sigma1.mean(idx[static_cast<std::size_t>(i)]);
        for (int j = 0; j < M; ++j) {
            c0(i, j) = r.sigma0.corr(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
            c1(i, j) = r.sigma1.corr(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
        }
    }
    SingleTestDesign out;
    out.boundaries = solve_boundaries(c0, 1, r.spend, opts);
    const auto ss = solve_sample_size(out.boundaries, drift, c1, 1, r.beta, opts);
    out.n_real = ss.n_real;
    out.n = ss.n;
    out.d = static_cast<long>(std::ceil(static_cast<double>(out.n) * r.event_fraction - 1e-9));
    return out;
}

}  // namespace gsmc
