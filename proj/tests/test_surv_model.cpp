#include <gtest/gtest.h>

#include <cmath>

#include "gsmc/surv_model.hpp"

using namespace gsmc;

namespace {
const double kLambda = std::log(2.0) / 6.0;
}

TEST(Survival, MedianOfExponential) {
    auto e = PiecewiseExponential::exponential(kLambda);
    EXPECT_NEAR(e.survival(6.0), 0.5, 1e-15);
    EXPECT_EQ(e.survival(0.0), 1.0);
    EXPECT_NEAR(e.density(0.0), kLambda, 1e-15);
}

TEST(Survival, TwoPieceClosedForm) {
    auto m = two_piece(kLambda, 0.6, 2.0);
    const double c = std::exp(-(1.0 - 0.6) * kLambda * 2.0);
    EXPECT_NEAR(m.treatment().survival(8.0), c * std::exp(-0.6 * kLambda * 8.0), 1e-15);
    EXPECT_NEAR(m.treatment().survival(8.0), std::pow(2.0, -2.0 / 6.0) * std::pow(2.0, -3.6 / 6.0), 1e-15);
    EXPECT_NEAR(m.treatment().survival(2.0), m.control().survival(2.0), 1e-15);
    EXPECT_NEAR(m.treatment().density(8.0), 0.6 * kLambda * m.treatment().survival(8.0), 1e-15);
}

TEST(Survival, DensityIsMinusDerivative) {
    auto m = two_piece(kLambda, 0.6, 2.0);
    const double h = 1e-5;
    for (double s : {0.3, 1.0, 1.9, 2.1, 5.0, 17.0}) {
        const auto& law = m.treatment();
        const double fd = -(law.survival(s + h) - law.survival(s - h)) / (2 * h);
        EXPECT_NEAR(fd, law.density(s), 1e-6) << s;
    }
}

TEST(Survival, NullAndProportionalReductions) {
    auto n = two_piece(kLambda, 1.0, 2.0);
    for (double s : {0.0, 1.0, 3.0, 10.0}) EXPECT_NEAR(n.treatment().survival(s), n.control().survival(s), 1e-15);
    auto ph = two_piece(kLambda, 0.6, 0.0);
    for (double s : {0.5, 3.0, 10.0}) EXPECT_NEAR(ph.treatment().survival(s), std::exp(-0.6 * kLambda * s), 1e-15);
}

TEST(Survival, PooledSurvival) {
    auto m = two_piece(kLambda, 0.6, 2.0);
    EXPECT_EQ(m.pooled_survival(0.0), 1.0);
    EXPECT_NEAR(m.pooled_survival(8.0), 0.5 * m.control().survival(8.0) + 0.5 * m.treatment().survival(8.0), 1e-15);
    auto n = two_piece(kLambda, 1.0, 2.0);
    EXPECT_NEAR(n.pooled_survival(5.0), n.control().survival(5.0), 1e-15);
}

TEST(Survival, InverseCumulativeHazard) {
    PiecewiseExponential law({1.0, 4.0}, {0.2, 0.05, 0.3});
    for (double s : {0.0, 0.5, 1.0, 2.0, 4.0, 9.0}) {
        EXPECT_NEAR(law.time_at_cumulative_hazard(law.cumulative_hazard(s)), s, 1e-12) << s;
    }
}

TEST(Survival, RefinedKeepsTheLaw) {
    PiecewiseExponential law({2.0}, {0.1, 0.3});
    const double grid[] = {1.0, 2.0, 3.5};
    auto r = law.refined(grid);
    EXPECT_EQ(r.pieces(), 4u);
    for (double s : {0.5, 1.5, 2.5, 5.0}) EXPECT_NEAR(r.survival(s), law.survival(s), 1e-15);
}

TEST(Survival, BadInputs) {
    EXPECT_THROW(two_piece(-1.0, 0.6, 2.0), DomainError);
    EXPECT_THROW(two_piece(kLambda, 0.0, 2.0), DomainError);
    EXPECT_THROW(PiecewiseExponential({2.0, 1.0}, {0.1, 0.2, 0.3}), DomainError);
    EXPECT_THROW(TwoArmModel(PiecewiseExponential::exponential(1.0), PiecewiseExponential::exponential(1.0), 1.0),
                 DomainError);
}

TEST(Accrual, UniformProfile) {
    auto a = AccrualProfile::uniform(14.0);
    EXPECT_NEAR(a.cdf(7.0), 0.5, 1e-15);
    EXPECT_NEAR(a.quantile(0.25), 3.5, 1e-12);
    EXPECT_NEAR(a.density(3.0), 1.0 / 14.0, 1e-15);
}

TEST(Accrual, StaircaseIntegratesToOne) {
    // relative rates 1,2,3,4 then 6 for ten months: 70 units in total
    auto a = AccrualProfile::from_relative({0, 1, 2, 3, 4, 14}, {1, 2, 3, 4, 6});
    EXPECT_NEAR(a.cdf(14.0), 1.0, 1e-15);
    EXPECT_NEAR(a.cdf(1.0), 1.0 / 70.0, 1e-15);
    EXPECT_NEAR(a.cdf(4.0), 10.0 / 70.0, 1e-15);
    EXPECT_NEAR(a.density(8.0), 6.0 / 70.0, 1e-15);
    for (double u : {0.01, 0.1, 0.5, 0.99}) EXPECT_NEAR(a.cdf(a.quantile(u)), u, 1e-12);
}

TEST(Accrual, PiecewiseMustNormalize) {
    EXPECT_THROW(AccrualProfile::piecewise({0, 1, 2}, {0.5, 0.6}), DomainError);
}

TEST(Censoring, YearlyProportionToRate) {
    const double r = yearly_proportion_to_rate(0.2);
    EXPECT_NEAR(1.0 - std::exp(-12.0 * r), 0.2, 1e-15);
    EXPECT_EQ(yearly_proportion_to_rate(0.0), 0.0);
    EXPECT_THROW(yearly_proportion_to_rate(1.0), DomainError);
}

TEST(Censoring, AccrualMustFitStudy) {
    EXPECT_THROW(AccrualCensoring(20.0, 18.0), DomainError);
    AccrualCensoring ac(14.0, 18.0, {0.01, 0.02});
    EXPECT_TRUE(ac.has_random_censoring());
}
