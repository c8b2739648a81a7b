#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "gsmc/corr_assembly.hpp"
#include "gsmc/design_engine.hpp"

using namespace gsmc;

namespace {

const double kLambda = std::log(2.0) / 6.0;

// Cov(G_k(t), G_l(t)) = f(t) C_kl with f increasing, so increments are
// independent and the bridged correlations are exact.
class SyntheticSource : public VarianceSource {
public:
    double covariance(const WeightSpec& w1, const WeightSpec& w2, double t) const override {
        return t * c(w1, w2);
    }

private:
    static double c(const WeightSpec& a, const WeightSpec& b) {
        const std::map<std::pair<double, double>, double> diag = {{{0, 0}, 4.0}, {{0, 1}, 1.0}, {{1, 0}, 2.0}};
        if (a == b) return diag.at({a.rho, a.gamma});
        auto key = [](const WeightSpec& w) { return w.rho * 10 + w.gamma; };
        const double s = key(a) + key(b);
        if (s == 1) return 1.6;   // (0,0)-(0,1)
        if (s == 10) return 2.4;  // (0,0)-(1,0)
        return 1.0;               // (0,1)-(1,0)
    }
};

// Variance 0.6 before t = 4 and 1 afterwards.
class TwoLevelSource : public VarianceSource {
public:
    double covariance(const WeightSpec&, const WeightSpec&, double t) const override { return t < 4 ? 0.6 : 1.0; }
};

DesignSpec theta06() { return DesignSpec{two_piece(kLambda, 0.6, 2.0), AccrualCensoring(14, 18)}; }

}  // namespace

TEST(CorrAssembly, EqualWeightsGiveOne) {
    StochasticSource src(two_piece(kLambda, 0.6, 2.0), AccrualCensoring(14, 18), Hypothesis::H0);
    EXPECT_DOUBLE_EQ(within_stage_cor(src, WeightSpec(0, 1), WeightSpec(0, 1), 12.0), 1.0);
    EXPECT_DOUBLE_EQ(within_test_cor(src, WeightSpec(0, 1), 12.0, 12.0), 1.0);
}

TEST(CorrAssembly, WithinTestIsSqrtVarianceRatio) {
    TwoLevelSource src;
    EXPECT_NEAR(within_test_cor(src, WeightSpec(0, 0), 3.0, 5.0), std::sqrt(0.6), 1e-15);
    EXPECT_THROW(within_test_cor(src, WeightSpec(0, 0), 5.0, 3.0), DomainError);
}

TEST(CorrAssembly, SyntheticIndependentIncrements) {
    SyntheticSource src;
    const WeightSpec w[3] = {WeightSpec(0, 0), WeightSpec(0, 1), WeightSpec(1, 0)};
    const double t[2] = {6.0, 15.0};
    auto g = assemble(src, w, t);
    ASSERT_EQ(g.dim(), 6);
    EXPECT_FALSE(g.repaired);
    // Cov(G_k(t1), G_l(t2)) = t1 C_kl for independent increments
    const double C[3][3] = {{4.0, 1.6, 2.4}, {1.6, 1.0, 1.0}, {2.4, 1.0, 2.0}};
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) {
            const int mi = i / 3, ki = i % 3, mj = j / 3, kj = j % 3;
            const double ti = t[mi], tj = t[mj];
            const double cov = std::min(ti, tj) * C[ki][kj];
            const double expected = cov / std::sqrt(ti * C[ki][ki] * tj * C[kj][kj]);
            EXPECT_NEAR(g.corr(i, j), expected, 1e-12) << i << "," << j;
        }
}

TEST(CorrAssembly, CrossCorReducesToWithinTest) {
    SyntheticSource src;
    EXPECT_NEAR(cross_cor(src, WeightSpec(0, 1), 6.0, WeightSpec(0, 1), 15.0), std::sqrt(6.0 / 15.0), 1e-15);
    EXPECT_NEAR(cross_cor(src, WeightSpec(0, 0), 9.0, WeightSpec(0, 1), 9.0),
                within_stage_cor(src, WeightSpec(0, 0), WeightSpec(0, 1), 9.0), 1e-15);
}

TEST(CorrAssembly, SingleStatistic) {
    SyntheticSource src;
    const WeightSpec w[1] = {WeightSpec(0, 0)};
    const double t[1] = {10.0};
    auto g = assemble(src, w, t);
    ASSERT_EQ(g.dim(), 1);
    EXPECT_DOUBLE_EQ(g.corr(0, 0), 1.0);
}

TEST(CorrAssembly, PermutingWeightsPermutesMatrix) {
    StochasticSource src(two_piece(kLambda, 0.6, 2.0), AccrualCensoring(14, 18), Hypothesis::H1);
    const WeightSpec a[2] = {WeightSpec(0, 0), WeightSpec(0, 1)};
    const WeightSpec b[2] = {WeightSpec(0, 1), WeightSpec(0, 0)};
    const double t[2] = {11.0, 18.0};
    auto ga = assemble(src, a, t), gb = assemble(src, b, t);
    const int perm[4] = {1, 0, 3, 2};
    for (int i = 0; i < 4; ++i) {
        EXPECT_NEAR(ga.mean(i), gb.mean(perm[i]), 1e-14);
        for (int j = 0; j < 4; ++j) EXPECT_NEAR(ga.corr(i, j), gb.corr(perm[i], perm[j]), 1e-14);
    }
}

TEST(CorrAssembly, BadTimesRejected) {
    SyntheticSource src;
    const WeightSpec w[1] = {WeightSpec(0, 0)};
    const double t[2] = {10.0, 5.0};
    EXPECT_THROW(assemble(src, w, t), DomainError);
}

TEST(RepairCorrelation, ClipsTinyNegativeEigenvalues) {
    Eigen::MatrixXd c(3, 3);
    c << 1, 1, 0, 1, 1, 0, 0, 0, 1;
    c(0, 1) = c(1, 0) = 1.0 + 1e-10;
    EXPECT_TRUE(repair_correlation(c));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12);
    EXPECT_DOUBLE_EQ(c(0, 0), 1.0);
    Eigen::MatrixXd ok = Eigen::MatrixXd::Identity(2, 2);
    EXPECT_FALSE(repair_correlation(ok));
}

TEST(RepairCorrelation, ThrowsOnIndefinite) {
    Eigen::MatrixXd c(3, 3);
    c << 1, 0.9, -0.9, 0.9, 1, 0.9, -0.9, 0.9, 1;
    EXPECT_THROW(repair_correlation(c), InconsistentInputsError);
}

TEST(CorrAssembly, Theta06NullPredictionsMatchReference) {
    auto s = theta06();
    const auto t = predict_stopping_times(s, Hypothesis::H0);
    StochasticSource sto(s.model, s.ac, Hypothesis::H0);
    auto g = assemble(sto, s.combo, t);
    // stage-major: 0 int/G00, 1 int/G01, 2 fin/G00, 3 fin/G01
    EXPECT_NEAR(g.corr(0, 1), 0.8300, 0.01);
    EXPECT_NEAR(g.corr(0, 2), 0.7729, 0.01);
    EXPECT_NEAR(g.corr(1, 3), 0.6389, 0.01);
    EXPECT_NEAR(g.corr(1, 2), 0.6415, 0.01);
    EXPECT_NEAR(g.corr(0, 3), 0.5304, 0.01);

    ExactSource exa(s.model, s.ac, Hypothesis::H0);
    EXPECT_NEAR(within_stage_cor(exa, s.combo[0], s.combo[1], t[0]), 0.8320, 0.003);
    EXPECT_NEAR(within_stage_cor(exa, s.combo[0], s.combo[1], t[0]),
                within_stage_cor(sto, s.combo[0], s.combo[1], t[0]), 0.005);
}

TEST(CorrAssembly, EstimatedSourceLooksUpFrozenViews) {
    EstimatedSource est;
    EXPECT_THROW(est.covariance(WeightSpec(0, 0), WeightSpec(0, 0), 5.0), DomainError);
    TrialData d{{{0, 1, 1e9, 1}, {0, 2, 1e9, 0}, {0, 4, 1e9, 0}}};
    est.add(freeze(d, 10.0));
    EXPECT_TRUE(est.has(10.0));
    EXPECT_FALSE(est.has(9.0));
    EXPECT_GT(est.variance(WeightSpec(0, 0), 10.0), 0.0);
}
