#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gsmc/error.hpp"
#include "gsmc/exact_predict.hpp"
#include "gsmc/stoch_predict.hpp"
#include "gsmc/wlrt_engine.hpp"

namespace gsmc {

/// Supplies V(G_w(t)) and Cov(G_w1(t), G_w2(t)) on a common scale.
class VarianceSource {
public:
    virtual ~VarianceSource() = default;

    virtual double covariance(const WeightSpec& w1, const WeightSpec& w2, double t) const = 0;

    double variance(const WeightSpec& w, double t) const { return covariance(w, w, t); }

    /// Standardized drift per sqrt(subject); zero when the source has no model for it.
    virtual double drift(const WeightSpec&, double) const { return 0.0; }
};

/// Per-subject predictions by the discretized marching scheme.
class StochasticSource : public VarianceSource {
public:
    StochasticSource(TwoArmModel model, AccrualCensoring ac, Hypothesis hyp, double b = 30.0)
        : model_(std::move(model)), ac_(std::move(ac)), hyp_(hyp), b_(b) {}

    double covariance(const WeightSpec& w1, const WeightSpec& w2, double t) const override {
        return predict_covariance(march(model_, ac_, hyp_, t, b_), w1, w2);
    }

    double drift(const WeightSpec& w, double t) const override {
        return predict_mu(march(model_, ac_, hyp_, t, b_), w);
    }

private:
    TwoArmModel model_;
    AccrualCensoring ac_;
    Hypothesis hyp_;
    double b_;
};

/// Per-subject closed-form variances; drift is taken from the marching scheme
/// since the closed forms only cover second moments.
class ExactSource : public VarianceSource {
public:
    ExactSource(const TwoArmModel& model, const AccrualCensoring& ac, Hypothesis hyp, double b = 30.0)
        : sc_(ExactScenario::from(model, ac)), hyp_(hyp), sto_(model, ac, hyp, b) {}

    double covariance(const WeightSpec& w1, const WeightSpec& w2, double t) const override {
        return exact_covariance(w1, w2, t, hyp_, sc_);
    }

    double drift(const WeightSpec& w, double t) const override { return sto_.drift(w, t); }

    const ExactScenario& scenario() const { return sc_; }

private:
    ExactScenario sc_;
    Hypothesis hyp_;
    StochasticSource sto_;
};

/// Data-driven estimates from frozen views registered by analysis time.
class EstimatedSource : public VarianceSource {
public:
    void add(const FrozenView& view) { views_.insert_or_assign(view.t, view); }

    bool has(double t) const { return find(t) != nullptr; }

    double covariance(const WeightSpec& w1, const WeightSpec& w2, double t) const override {
        const FrozenView* v = find(t);
        if (!v) throw DomainError("estimated source: no data frozen at the requested time");
        return estimate_covariance(*v, w1, w2);
    }

private:
    const FrozenView* find(double t) const {
        auto it = views_.lower_bound(t - 1e-9);
        if (it == views_.end() || std::abs(it->first - t) > 1e-9) return nullptr;
        return &it->second;
    }

    std::map<double, FrozenView> views_;
};

/// Estimates where data exist, n times a per-subject prediction elsewhere.
/// At an interim analysis this pairs estimated interim variances with the
/// predicted final variance.
class HybridSource : public VarianceSource {
public:
    HybridSource(std::shared_ptr<const EstimatedSource> est, std::shared_ptr<const VarianceSource> pred,
                 double n)
        : est_(std::move(est)), pred_(std::move(pred)), n_(n) {}

    double covariance(const WeightSpec& w1, const WeightSpec& w2, double t) const override {
        if (est_->has(t)) return est_->covariance(w1, w2, t);
        return n_ * pred_->covariance(w1, w2, t);
    }

    double drift(const WeightSpec& w, double t) const override { return pred_->drift(w, t); }

private:
    std::shared_ptr<const EstimatedSource> est_;
    std::shared_ptr<const VarianceSource> pred_;
    double n_;
};

inline double within_stage_cor(const VarianceSource& src, const WeightSpec& w1, const WeightSpec& w2,
                               double t) {
    if (w1 == w2) {
        if (!(src.variance(w1, t) > 0.0)) throw DegenerateError("correlation: zero variance");
        return 1.0;
    }
    const double v1 = src.variance(w1, t), v2 = src.variance(w2, t);
    if (!(v1 > 0.0) || !(v2 > 0.0)) throw DegenerateError("correlation: zero variance");
    return std::clamp(src.covariance(w1, w2, t) / std::sqrt(v1 * v2), -1.0, 1.0);
}

/// Same test at two times: sqrt of the information fraction V(t1)/V(t2).
inline double within_test_cor(const VarianceSource& src, const WeightSpec& w, double t1, double t2) {
    if (t1 > t2) throw DomainError("within_test_cor: need t1 <= t2");
    const double v2 = src.variance(w, t2);
    if (!(v2 > 0.0)) throw DegenerateError("correlation: zero variance at the later time");
    if (t1 == t2) return 1.0;
    return std::min(1.0, std::sqrt(std::max(0.0, src.variance(w, t1)) / v2));
}

/// Different tests at different times, bridged through w2 at t1.
inline double cross_cor(const VarianceSource& src, const WeightSpec& w1, double t1, const WeightSpec& w2,
                        double t2) {
    if (t1 > t2) throw DomainError("cross_cor: need t1 <= t2");
    return within_stage_cor(src, w1, w2, t1) * within_test_cor(src, w2, t1, t2);
}

/// Stacked statistics in stage-major order: (stage 0, weight 0), (stage 0, weight 1), ...
struct GaussianApprox {
    std::vector<std::pair<int, int>> labels;  // (stage, weight index)
    Eigen::VectorXd mean;                     // per-sqrt(subject) drift
    Eigen::MatrixXd corr;
    bool repaired = false;

    Eigen::Index dim() const { return corr.rows(); }

    /// Leading block for the first `stages` stages.
    Eigen::MatrixXd leading(int stages, int K) const {
        return corr.topLeftCorner(stages * K, stages * K);
    }
};

/// Smallest eigenvalue below -1e-8 is an error; small negative ones are clipped
/// and the diagonal rescaled to one. Returns whether a repair was needed.
inline bool repair_correlation(Eigen::MatrixXd& c) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
    const double lo = es.eigenvalues().minCoeff();
    if (lo < -1e-8) throw InconsistentInputsError("correlation matrix is not positive semidefinite");
    if (lo >= 0.0) return false;
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
    Eigen::MatrixXd r = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    Eigen::VectorXd d = r.diagonal().cwiseSqrt().cwiseInverse();
    c = d.asDiagonal() * r * d.asDiagonal();
    c = 0.5 * (c + c.transpose());
    c.diagonal().setOnes();
    return true;
}

inline GaussianApprox assemble(const VarianceSource& src, std::span<const WeightSpec> weights,
                               std::span<const double> times) {
    const int K = static_cast<int>(weights.size());
    const int M = static_cast<int>(times.size());
    if (K < 1 || M < 1) throw DomainError("assemble: need at least one weight and one stage");
    for (int m = 1; m < M; ++m)
        if (!(times[m] >= times[m - 1])) throw DomainError("assemble: stage times must be nondecreasing");

    GaussianApprox g;
    const int D = K * M;
    for (int m = 0; m < M; ++m)
        for (int k = 0; k < K; ++k) g.labels.emplace_back(m, k);
    g.corr = Eigen::MatrixXd::Identity(D, D);
    g.mean = Eigen::VectorXd::Zero(D);

    for (int i = 0; i < D; ++i) {
        const auto [mi, ki] = g.labels[i];
        g.mean(i) = src.drift(weights[ki], times[mi]);
        for (int j = i + 1; j < D; ++j) {
            const auto [mj, kj] = g.labels[j];
            double c;
            if (mi == mj)
                c = within_stage_cor(src, weights[ki], weights[kj], times[mi]);
            else
                c = cross_cor(src, weights[ki], times[mi], weights[kj], times[mj]);
            g.corr(i, j) = g.corr(j, i) = c;
        }
    }
    g.repaired = repair_correlation(g.corr);
    return g;
}

}  // namespace gsmc
