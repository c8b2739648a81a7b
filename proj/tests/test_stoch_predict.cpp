#include <gtest/gtest.h>

#include <cmath>

#include "gsmc/design_engine.hpp"
#include "gsmc/exact_predict.hpp"
#include "gsmc/stoch_predict.hpp"

using namespace gsmc;

namespace {
const double kLambda = std::log(2.0) / 6.0;
const AccrualCensoring kAc(14.0, 18.0);
const WeightSpec kLr(0, 0), kLate(0, 1);
}

TEST(March, NullGridHasUnitRatios) {
    auto g = march(two_piece(kLambda, 0.7, 2.0), kAc, Hypothesis::H0, 18.0);
    for (double r : g.ratio) EXPECT_EQ(r, 1.0);
    for (double o : g.odds) EXPECT_NEAR(o, 1.0, 1e-15);
}

TEST(March, AtRiskNonIncreasing) {
    for (auto h : {Hypothesis::H0, Hypothesis::H1}) {
        auto g = march(two_piece(kLambda, 0.5, 2.0), AccrualCensoring(14.0, 18.0, {0.01, 0.02}), h, 18.0);
        for (std::size_t j = 1; j < g.size(); ++j) {
            EXPECT_LE(g.at_risk1[j], g.at_risk1[j - 1]);
            EXPECT_LE(g.at_risk0[j], g.at_risk0[j - 1]);
        }
    }
}

TEST(March, EventFractionDefaultScenario) {
    // d/n = 597/927 for the default theta = 0.7 design
    auto g = march(two_piece(kLambda, 0.7, 2.0), kAc, Hypothesis::H1, 18.0);
    EXPECT_NEAR(expected_event_fraction(g), 597.0 / 927.0, 0.002);
}

TEST(March, EventFractionOrdering) {
    auto m = two_piece(kLambda, 0.6, 2.0);
    const double early = expected_event_fraction(march(m, kAc, Hypothesis::H1, 1.0 / 30.0));
    EXPECT_GT(early, 0.0);
    EXPECT_LT(early, 2e-5);
    for (double t : {2.0, 6.0, 12.0, 18.0, 24.0})
        EXPECT_GE(expected_event_fraction(march(m, kAc, Hypothesis::H0, t)),
                  expected_event_fraction(march(m, kAc, Hypothesis::H1, t)));
}

TEST(Mean, NullMeanIsExactlyZero) {
    for (double th : {0.5, 0.7})
        for (auto w : {kLr, kLate, WeightSpec(1, 1)})
            EXPECT_EQ(predict_mean(march(two_piece(kLambda, th, 2.0), kAc, Hypothesis::H0, 18.0), w), 0.0);
}

TEST(Mean, AlternativeMeanIsNegative) {
    EXPECT_LT(predict_mean(march(two_piece(kLambda, 0.6, 2.0), kAc, Hypothesis::H1, 18.0), kLate), 0.0);
}

TEST(Mean, GridRefinementConverges) {
    auto m = two_piece(kLambda, 0.6, 2.0);
    const double coarse = predict_mean(march(m, kAc, Hypothesis::H1, 18.0, 30), kLate);
    const double fine = predict_mean(march(m, kAc, Hypothesis::H1, 18.0, 300), kLate);
    EXPECT_LT(std::abs(coarse / fine - 1.0), 0.005);
    const double v30 = predict_variance(march(m, kAc, Hypothesis::H1, 18.0, 30), kLate);
    const double v120 = predict_variance(march(m, kAc, Hypothesis::H1, 18.0, 120), kLate);
    const double v480 = predict_variance(march(m, kAc, Hypothesis::H1, 18.0, 480), kLate);
    EXPECT_LT(std::abs(v120 - v480), std::abs(v30 - v480));
}

TEST(Variance, NullLogRankIsQuarterEvents) {
    auto g = march(two_piece(kLambda, 1.0, 2.0), kAc, Hypothesis::H1, 18.0);
    EXPECT_NEAR(predict_variance(g, kLr), expected_event_fraction(g) / 4.0, 1e-15);
}

TEST(Variance, AgreesWithClosedFormUnderNull) {
    auto m = two_piece(kLambda, 0.6, 2.0);
    const auto sc = ExactScenario::from(m, kAc);
    for (auto w : {kLr, kLate}) {
        const double s = predict_variance(march(m, kAc, Hypothesis::H0, 18.0, 30), w);
        const double e = exact_variance(Hypothesis::H0, w, 18.0, sc);
        EXPECT_LT(std::abs(s / e - 1.0), 0.01);
    }
}

TEST(Variance, NonDecreasingInTime) {
    auto m = two_piece(kLambda, 0.6, 2.0);
    double prev = 0.0;
    for (double t = 1.0; t <= 30.0; t += 1.0) {
        const double v = predict_variance(march(m, kAc, Hypothesis::H1, t), kLate);
        EXPECT_GE(v, prev);
        prev = v;
    }
}

TEST(Covariance, MidParameterIdentity) {
    auto g = march(two_piece(kLambda, 0.6, 2.0), kAc, Hypothesis::H1, 15.0);
    const double c = predict_covariance(g, kLr, kLate);
    EXPECT_NEAR(c, predict_variance(g, mid_weight(kLr, kLate)), 1e-14 * c);
}

TEST(Drift, NullIsZeroAndSignsMatch) {
    auto m = two_piece(kLambda, 0.7, 2.0);
    EXPECT_EQ(predict_mu(m, kAc, Hypothesis::H0, 18.0, 30, kLate), 0.0);
    auto g = march(m, kAc, Hypothesis::H1, 18.0);
    EXPECT_EQ(std::signbit(predict_mu(g, kLate)), std::signbit(predict_mean(g, kLate)));
}

TEST(Drift, LateWeightNeedsFewerSubjectsWithDelay) {
    auto g = march(two_piece(kLambda, 0.7, 2.0), kAc, Hypothesis::H1, 18.0);
    const double z = z_upper(0.025) + z_upper(0.1);
    const double n_late = std::ceil(z * z / std::pow(predict_mu(g, kLate), 2));
    const double n_lr = std::ceil(z * z / std::pow(predict_mu(g, kLr), 2));
    EXPECT_LT(n_late, n_lr);
}

TEST(March, BadArguments) {
    auto m = two_piece(kLambda, 0.7, 2.0);
    EXPECT_THROW(march(m, kAc, Hypothesis::H1, 0.0), DomainError);
    EXPECT_THROW(march(m, kAc, Hypothesis::H1, 18.0, 0.5), DomainError);
    EXPECT_THROW(predict_mu(march(m, kAc, Hypothesis::H1, 1e-3), kLate), DegenerateError);
}
