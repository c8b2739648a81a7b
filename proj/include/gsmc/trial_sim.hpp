#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gsmc/corr_assembly.hpp"
#include "gsmc/design_engine.hpp"
#include "gsmc/error.hpp"
#include "gsmc/mvn_quad.hpp"
#include "gsmc/random.hpp"
#include "gsmc/surv_model.hpp"
#include "gsmc/wlrt_engine.hpp"

namespace gsmc {

enum class Method { WLRT, SLRT, MCNaive, MCPredSto, MCPredExa, MCEst };

inline constexpr std::array<Method, 6> all_methods = {Method::WLRT,      Method::SLRT,      Method::MCNaive,
                                                      Method::MCPredSto, Method::MCPredExa, Method::MCEst};

inline const char* to_string(Method m) {
    switch (m) {
        case Method::WLRT: return "WLRT";
        case Method::SLRT: return "SLRT";
        case Method::MCNaive: return "MC-naive";
        case Method::MCPredSto: return "MC-pred-sto";
        case Method::MCPredExa: return "MC-pred-exa";
        case Method::MCEst: return "MC-est";
    }
    return "";
}

/// Accrual over `duration` months with relative monthly intensities 1,2,3,4
/// for the first four months and 6 afterwards.
inline AccrualProfile staircase_accrual(double duration = 14.0) {
    if (!(duration > 4.0)) throw DomainError("staircase accrual needs more than four months");
    return AccrualProfile::from_relative({0.0, 1.0, 2.0, 3.0, 4.0, duration}, {1.0, 2.0, 3.0, 4.0, 6.0});
}

struct Scenario {
    TwoArmModel truth;                       // H1 generating law
    AccrualCensoring true_ac;
    DesignReport design;                     // n, d, pred-sto and naive boundaries
    std::optional<DesignReport> design_exa;  // boundaries for MC-pred-exa
    Hypothesis hyp = Hypothesis::H0;
    long reps = 20000;
    std::uint64_t seed = 20240601;
    int threads = 0;                         // 0: GSMC_THREADS or hardware concurrency
    MvnProblem est_mvn = [] {
        MvnProblem p;
        p.accuracy = 1e-4;
        p.replicates = 1;
        return p;
    }();

    void validate() const {
        if (reps < 1) throw DomainError("scenario: reps must be >= 1");
        if (design.n < 1 || design.d < 1) throw DomainError("scenario: design has no sample size");
    }

    TwoArmModel law() const { return hyp == Hypothesis::H0 ? truth.null_model() : truth; }
};

/// Draws entry, arm, event and censoring uniforms in that order per subject.
inline TrialData generate_trial(const TwoArmModel& law, const AccrualCensoring& ac, long n, CounterStream& rng) {
    if (n < 0) throw DomainError("generate_trial: n must be >= 0");
    TrialData data;
    data.subjects.resize(static_cast<std::size_t>(n));
    const double p = law.assign_prob();
    for (auto& s : data.subjects) {
        s.entry = ac.accrual.quantile(rng.uniform());
        s.arm = rng.uniform() < p ? 1 : 0;
        s.event_time = law.arm(s.arm).time_at_cumulative_hazard(-std::log(rng.uniform()));
        const double u = rng.uniform();
        const double c = ac.censor_rates[static_cast<std::size_t>(s.arm)];
        if (c > 0.0) s.censor_time = -std::log(u) / c;
    }
    return data;
}

inline TrialData generate_trial(const Scenario& sc, long n, CounterStream& rng) {
    return generate_trial(sc.law(), sc.true_ac, n, rng);
}

/// Statistics of every combo weight at each event-triggered stage.
struct TrialAnalysis {
    std::vector<double> times;      // calendar time of each reached stage
    std::vector<WlrtPanel> panels;  // one per reached stage
    std::vector<double> z;          // stage-major, sign-flipped so benefit is positive
    int K = 0;
    int M = 0;

    int reached() const { return static_cast<int>(times.size()); }
    bool exhausted() const { return reached() < M; }
    double stat(int m, int k) const { return z[static_cast<std::size_t>(m * K + k)]; }
    double max_stat(int m) const {
        double out = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < K; ++k) out = std::max(out, stat(m, k));
        return out;
    }
};

inline long stage_event_count(double nu, long d) {
    return std::max(1L, static_cast<long>(std::ceil(nu * static_cast<double>(d) - 1e-9)));
}

/// Stage m is analysed at the calendar time of the ceil(nu_m d)-th event;
/// ties in calendar time are ordered by subject index.
inline TrialAnalysis analyze_trial(const TrialData& data, std::span<const WeightSpec> combo,
                                   std::span<const double> nu, long d) {
    TrialAnalysis a;
    a.K = static_cast<int>(combo.size());
    a.M = static_cast<int>(nu.size());
    std::vector<std::pair<double, std::size_t>> ev;
    ev.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& s = data.subjects[i];
        if (s.event_time <= s.censor_time) ev.emplace_back(s.entry + s.event_time, i);
    }
    std::sort(ev.begin(), ev.end());
    for (int m = 0; m < a.M; ++m) {
        const long k = stage_event_count(nu[static_cast<std::size_t>(m)], d);
        if (k > static_cast<long>(ev.size())) break;
        const double t = ev[static_cast<std::size_t>(k - 1)].first;
        a.times.push_back(t);
        a.panels.push_back(wlrt_panel(freeze(data, t), combo));
        for (int j = 0; j < a.K; ++j) a.z.push_back(-a.panels.back().statistic(static_cast<std::size_t>(j)));
    }
    return a;
}

/// Estimated covariances read from the panels of an analysed trial.
class PanelSource : public VarianceSource {
public:
    PanelSource(const TrialAnalysis& a, std::span<const WeightSpec> combo) : a_(a), combo_(combo) {}

    double covariance(const WeightSpec& w1, const WeightSpec& w2, double t) const override {
        for (int m = 0; m < a_.reached(); ++m)
            if (a_.times[static_cast<std::size_t>(m)] == t)
                return a_.panels[static_cast<std::size_t>(m)].covariance(index(w1), index(w2));
        throw DomainError("panel source: no analysis at the requested time");
    }

private:
    std::size_t index(const WeightSpec& w) const {
        for (std::size_t k = 0; k < combo_.size(); ++k)
            if (combo_[k] == w) return k;
        throw DomainError("panel source: weight not in combo");
    }

    const TrialAnalysis& a_;
    std::span<const WeightSpec> combo_;
};

/// Stage-major correlation of the reached stages from the trial's own data.
inline Eigen::MatrixXd estimated_correlation(const TrialAnalysis& a, std::span<const WeightSpec> combo) {
    const PanelSource src(a, combo);
    return assemble(src, combo, a.times).corr;
}

/// First stage (1-based) at which any listed test exceeds the stage
/// boundary; 0 when the trial never rejects.
inline int first_crossing(const TrialAnalysis& a, std::span<const int> tests, std::span<const double> g) {
    for (int m = 0; m < a.reached(); ++m) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int k : tests) mx = std::max(mx, a.stat(m, k));
        if (mx > g[static_cast<std::size_t>(m)]) return m + 1;
    }
    return 0;
}

namespace detail {

inline std::vector<double> stage_bounds(const std::vector<double>& g, int stages, int K, double last) {
    std::vector<double> u;
    for (int j = 0; j < stages; ++j) u.insert(u.end(), static_cast<std::size_t>(K), g[static_cast<std::size_t>(j)]);
    u.insert(u.end(), static_cast<std::size_t>(K), last);
    return u;
}

inline MvnResult cdf_with_error(std::vector<double> upper, const Eigen::MatrixXd& corr, const MvnProblem& opts) {
    MvnProblem pb = opts;
    pb.lower.assign(upper.size(), -std::numeric_limits<double>::infinity());
    pb.upper = std::move(upper);
    pb.corr = corr;
    return detail::mvn_single(pb, 0);
}

}  // namespace detail

/// Maxcombo with boundaries re-derived from the trial's estimated
/// correlations at each stage. Non-final boundaries are solved; at the last
/// reached stage only the sign of F(max) - target is needed, which usually
/// follows from Frechet bounds without integrating.
inline int est_crossing(const TrialAnalysis& a, std::span<const WeightSpec> combo, std::span<const double> spend,
                        const MvnProblem& opts) {
    if (a.reached() == 0) return 0;
    const int K = a.K;
    Eigen::MatrixXd corr;
    try {
        corr = estimated_correlation(a, combo);
    } catch (const InconsistentInputsError&) {
        return 0;
    }
    std::vector<double> g;
    double stay = 1.0;
    for (int m = 0; m < a.reached(); ++m) {
        const double inc = spend[static_cast<std::size_t>(m)] - (m ? spend[static_cast<std::size_t>(m - 1)] : 0.0);
        const double target = stay - inc;
        const Eigen::MatrixXd c = corr.topLeftCorner((m + 1) * K, (m + 1) * K);
        const double mx = a.max_stat(m);
        const bool last = m + 1 == a.reached();

        if (last) {
            const std::vector<double> own(static_cast<std::size_t>(K), mx);
            const double marginal = mvn_cdf(own, corr.block(m * K, m * K, K, K), opts);
            if (std::min(stay, marginal) <= target) return 0;
            if (marginal - (1.0 - stay) > target) return m + 1;
            MvnProblem o = opts;
            auto r = detail::cdf_with_error(detail::stage_bounds(g, m, K, mx), c, o);
            if (std::abs(r.value - target) <= r.error) {
                o.accuracy = std::min(o.accuracy, 1e-6);
                r = detail::cdf_with_error(detail::stage_bounds(g, m, K, mx), c, o);
            }
            return r.value > target ? m + 1 : 0;
        }

        auto f = [&](double x) { return mvn_cdf(detail::stage_bounds(g, m, K, x), c, opts) - target; };
        const double gm = detail::solve_root(f, -15.0, 15.0, 1e-7, "est boundaries");
        if (mx > gm) return m + 1;
        g.push_back(gm);
        stay = target;
    }
    return 0;
}

/// Per-method boundaries and tests resolved from a scenario.
struct MethodPlan {
    Method method;
    std::vector<int> tests;
    std::vector<double> g;
};

inline int index_of(std::span<const WeightSpec> combo, const WeightSpec& w) {
    for (std::size_t k = 0; k < combo.size(); ++k)
        if (combo[k] == w) return static_cast<int>(k);
    return -1;
}

/// SLRT is the (0,0) member of the combo and WLRT the first other member;
/// methods whose ingredients are absent are left out.
inline std::vector<MethodPlan> method_plans(const Scenario& sc) {
    const auto& ds = sc.design;
    const int K = static_cast<int>(ds.combo.size());
    std::vector<int> all(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) all[static_cast<std::size_t>(k)] = k;
    const int slrt = index_of(ds.combo, WeightSpec(0, 0));
    int wlrt = -1;
    for (int k = 0; k < K && wlrt < 0; ++k)
        if (k != slrt) wlrt = k;

    std::vector<MethodPlan> out;
    if (wlrt >= 0) out.push_back({Method::WLRT, {wlrt}, ds.naive_boundaries});
    if (slrt >= 0) out.push_back({Method::SLRT, {slrt}, ds.naive_boundaries});
    out.push_back({Method::MCNaive, all, ds.naive_boundaries});
    out.push_back({Method::MCPredSto, all, ds.boundaries});
    if (sc.design_exa) out.push_back({Method::MCPredExa, all, sc.design_exa->boundaries});
    out.push_back({Method::MCEst, all, {}});
    return out;
}

struct GroupSequentialOutcome {
    std::vector<double> times;
    std::vector<int> reject_stage;  // per plan, 0 = no rejection
    bool exhausted = false;
};

inline GroupSequentialOutcome run_group_sequential(const TrialAnalysis& a, const Scenario& sc,
                                                   const std::vector<MethodPlan>& plans) {
    GroupSequentialOutcome out;
    out.times = a.times;
    out.exhausted = a.exhausted();
    for (const auto& p : plans) {
        if (p.method == Method::MCEst)
            out.reject_stage.push_back(est_crossing(a, sc.design.combo, sc.design.spend, sc.est_mvn));
        else
            out.reject_stage.push_back(first_crossing(a, p.tests, p.g));
    }
    return out;
}

inline GroupSequentialOutcome run_group_sequential(const TrialData& trial, const Scenario& sc) {
    const auto a = analyze_trial(trial, sc.design.combo, sc.design.nu, sc.design.d);
    return run_group_sequential(a, sc, method_plans(sc));
}

struct MethodOC {
    Method method;
    std::vector<double> reject;  // cumulative proportion by stage
    std::vector<double> se;      // binomial Monte Carlo SE; NaN when reps == 1
};

struct OperatingCharacteristics {
    Hypothesis hyp = Hypothesis::H0;
    long reps = 0;
    long exhausted = 0;
    std::vector<double> mean_times;  // over replicates reaching each stage
    std::vector<MethodOC> methods;
    Eigen::MatrixXd sample_corr;     // over replicates reaching every stage
    Eigen::MatrixXd mean_est_corr;
    long corr_reps = 0;

    const MethodOC* find(Method m) const {
        for (const auto& x : methods)
            if (x.method == m) return &x;
        return nullptr;
    }
};

inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("GSMC_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs f(i) for i in [0, n) on up to `threads` workers.
template <class F>
void parallel_for(long n, int threads, F&& f) {
    threads = static_cast<int>(std::min<long>(std::max(1, threads), std::max(1L, n)));
    if (threads == 1) {
        for (long i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<long> next{0};
    std::exception_ptr err;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w)
        pool.emplace_back([&] {
            for (;;) {
                const long start = next.fetch_add(64);
                if (start >= n || failed) return;
                try {
                    for (long i = start; i < std::min(n, start + 64); ++i) f(i);
                } catch (...) {
                    if (!failed.exchange(true)) err = std::current_exception();
                    return;
                }
            }
        });
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

inline OperatingCharacteristics operating_characteristics(const Scenario& sc) {
    sc.validate();
    const auto plans = method_plans(sc);
    const int K = static_cast<int>(sc.design.combo.size());
    const int M = static_cast<int>(sc.design.nu.size());
    const int D = K * M;
    const TwoArmModel law = sc.law();

    struct Rep {
        GroupSequentialOutcome out;
        std::vector<double> z;
        Eigen::MatrixXd est;
    };
    std::vector<Rep> reps(static_cast<std::size_t>(sc.reps));
    parallel_for(sc.reps, resolve_threads(sc.threads), [&](long i) {
        CounterStream rng(sc.seed, static_cast<std::uint64_t>(i));
        const TrialData trial = generate_trial(law, sc.true_ac, sc.design.n, rng);
        const auto a = analyze_trial(trial, sc.design.combo, sc.design.nu, sc.design.d);
        auto& r = reps[static_cast<std::size_t>(i)];
        r.out = run_group_sequential(a, sc, plans);
        if (!a.exhausted()) {
            r.z = a.z;
            try {
                r.est = estimated_correlation(a, sc.design.combo);
            } catch (const InconsistentInputsError&) {
            }
        }
    });

    OperatingCharacteristics oc;
    oc.hyp = sc.hyp;
    oc.reps = sc.reps;
    oc.mean_times.assign(static_cast<std::size_t>(M), 0.0);
    std::vector<long> reached(static_cast<std::size_t>(M), 0);
    std::vector<std::vector<long>> hits(plans.size(), std::vector<long>(static_cast<std::size_t>(M), 0));
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(D);
    oc.mean_est_corr = Eigen::MatrixXd::Zero(D, D);
    long est_count = 0;
    for (const auto& r : reps) {
        if (r.out.exhausted) ++oc.exhausted;
        for (std::size_t m = 0; m < r.out.times.size(); ++m) {
            oc.mean_times[m] += r.out.times[m];
            ++reached[m];
        }
        for (std::size_t p = 0; p < plans.size(); ++p)
            if (int s = r.out.reject_stage[p]; s > 0)
                for (int m = s - 1; m < M; ++m) ++hits[p][static_cast<std::size_t>(m)];
        if (!r.z.empty()) {
            ++oc.corr_reps;
            mean += Eigen::Map<const Eigen::VectorXd>(r.z.data(), D);
        }
        if (r.est.size()) {
            oc.mean_est_corr += r.est;
            ++est_count;
        }
    }
    for (int m = 0; m < M; ++m)
        oc.mean_times[static_cast<std::size_t>(m)] =
            reached[static_cast<std::size_t>(m)] ? oc.mean_times[static_cast<std::size_t>(m)] / static_cast<double>(reached[static_cast<std::size_t>(m)])
                                                 : std::numeric_limits<double>::quiet_NaN();
    const double nrep = static_cast<double>(sc.reps);
    for (std::size_t p = 0; p < plans.size(); ++p) {
        MethodOC mo{plans[p].method, {}, {}};
        for (int m = 0; m < M; ++m) {
            const double pr = static_cast<double>(hits[p][static_cast<std::size_t>(m)]) / nrep;
            mo.reject.push_back(pr);
            mo.se.push_back(sc.reps > 1 ? std::sqrt(pr * (1.0 - pr) / nrep) : std::numeric_limits<double>::quiet_NaN());
        }
        oc.methods.push_back(std::move(mo));
    }

    if (est_count) oc.mean_est_corr /= static_cast<double>(est_count);
    oc.sample_corr = Eigen::MatrixXd::Constant(D, D, std::numeric_limits<double>::quiet_NaN());
    if (oc.corr_reps > 1) {
        mean /= static_cast<double>(oc.corr_reps);
        Eigen::MatrixXd s = Eigen::MatrixXd::Zero(D, D);
        for (const auto& r : reps) {
            if (r.z.empty()) continue;
            const Eigen::VectorXd c = Eigen::Map<const Eigen::VectorXd>(r.z.data(), D) - mean;
            s.noalias() += c * c.transpose();
        }
        const Eigen::VectorXd sd = s.diagonal().cwiseSqrt().cwiseInverse();
        oc.sample_corr = sd.asDiagonal() * s * sd.asDiagonal();
    }
    return oc;
}

/// One row per pair (i < j) of stage-major statistics.
struct CorrelationRow {
    std::pair<int, int> a;  // (stage, weight index)
    std::pair<int, int> b;
    double gold = 0.0;
    double pred_sto = 0.0;
    double pred_exa = std::numeric_limits<double>::quiet_NaN();
    double est = 0.0;

    /// "" below 5% relative difference, "italic" for 5-10%, "bold" above 10%.
    static const char* flag(double bias, double gold) {
        const double rel = std::abs(bias) / std::abs(gold);
        if (!(rel >= 0.05)) return "";
        return rel > 0.10 ? "bold" : "italic";
    }
};

struct CorrelationReport {
    Hypothesis hyp = Hypothesis::H0;
    std::vector<WeightSpec> combo;
    long reps = 0;
    std::vector<CorrelationRow> rows;
};

inline CorrelationReport correlation_report(const OperatingCharacteristics& oc, const Scenario& sc) {
    const auto& ds = sc.design;
    const int K = static_cast<int>(ds.combo.size());
    const Eigen::MatrixXd& sto = sc.hyp == Hypothesis::H0 ? ds.sigma0.corr : ds.sigma1.corr;
    const Eigen::MatrixXd* exa = nullptr;
    if (sc.design_exa) exa = sc.hyp == Hypothesis::H0 ? &sc.design_exa->sigma0.corr : &sc.design_exa->sigma1.corr;
    CorrelationReport rep;
    rep.hyp = sc.hyp;
    rep.combo = ds.combo;
    rep.reps = oc.corr_reps;
    const auto D = oc.sample_corr.rows();
    for (Eigen::Index i = 0; i < D; ++i)
        for (Eigen::Index j = i + 1; j < D; ++j) {
            CorrelationRow r;
            r.a = {static_cast<int>(i) / K, static_cast<int>(i) % K};
            r.b = {static_cast<int>(j) / K, static_cast<int>(j) % K};
            r.gold = oc.sample_corr(i, j);
            r.pred_sto = sto(i, j);
            if (exa) r.pred_exa = (*exa)(i, j);
            r.est = oc.mean_est_corr(i, j);
            rep.rows.push_back(r);
        }
    return rep;
}

inline CorrelationReport sample_correlation_report(const Scenario& sc) {
    return correlation_report(operating_characteristics(sc), sc);
}

}  // namespace gsmc
