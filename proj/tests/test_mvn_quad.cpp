#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "gsmc/mvn_quad.hpp"

using namespace gsmc;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

Eigen::MatrixXd equicorrelated(int d, double r) {
    Eigen::MatrixXd c = Eigen::MatrixXd::Constant(d, d, r);
    c.diagonal().setOnes();
    return c;
}

MvnProblem orthant(const Eigen::MatrixXd& c) {
    MvnProblem pb;
    pb.corr = c;
    pb.lower.assign(static_cast<std::size_t>(c.rows()), -kInf);
    pb.upper.assign(static_cast<std::size_t>(c.rows()), 0.0);
    return pb;
}

}  // namespace

TEST(Bvn, UpperTailKnownValues) {
    EXPECT_NEAR(bvn_upper(0, 0, 0.0), 0.25, 1e-14);
    EXPECT_NEAR(bvn_upper(0, 0, 0.5), 0.25 + std::asin(0.5) / (2 * std::numbers::pi), 1e-14);
    EXPECT_NEAR(bvn_upper(0, 0, -0.9), 0.25 + std::asin(-0.9) / (2 * std::numbers::pi), 1e-14);
    EXPECT_NEAR(bvn_upper(1.0, -0.5, 0.0), norm_cdf(-1.0) * norm_cdf(0.5), 1e-14);
    EXPECT_NEAR(bvn_upper(1.2, 1.2, 1.0), norm_cdf(-1.2), 1e-12);
    EXPECT_DOUBLE_EQ(bvn_upper(kInf, 0.0, 0.3), 0.0);
    EXPECT_NEAR(bvn_upper(-kInf, 0.7, 0.3), norm_cdf(-0.7), 1e-15);
}

TEST(Mvn, Univariate) {
    MvnProblem pb;
    pb.corr = Eigen::MatrixXd::Identity(1, 1);
    pb.lower = {-kInf};
    pb.upper = {1.959964};
    EXPECT_NEAR(mvn_rectangle(pb).value, 0.975, 1e-6);
}

TEST(Mvn, IdentityAndBivariateOrthants) {
    EXPECT_NEAR(mvn_rectangle(orthant(Eigen::MatrixXd::Identity(2, 2))).value, 0.25, 1e-12);
    EXPECT_NEAR(mvn_rectangle(orthant(equicorrelated(2, 0.5))).value, 1.0 / 3.0, 1e-12);
}

TEST(Mvn, EquicorrelatedHalfOrthantFourDims) {
    auto pb = orthant(equicorrelated(4, 0.5));
    auto r = median_of_replicates(pb, 5);
    EXPECT_NEAR(r.value, 0.2, 1e-5);
    EXPECT_FALSE(r.imprecise);
}

TEST(Mvn, TrivariateOrthantFormula) {
    Eigen::MatrixXd c(3, 3);
    c << 1, 0.3, 0.6, 0.3, 1, -0.2, 0.6, -0.2, 1;
    const double pi = std::numbers::pi;
    const double exact = 0.125 + (std::asin(0.3) + std::asin(0.6) + std::asin(-0.2)) / (4 * pi);
    EXPECT_NEAR(median_of_replicates(orthant(c), 5).value, exact, 1e-5);
    auto forced = orthant(c);
    forced.force_qmc = true;
    EXPECT_NEAR(median_of_replicates(forced, 5).value, exact, 1e-5);
}

TEST(Mvn, IndependenceFactorizes) {
    MvnProblem pb;
    pb.corr = Eigen::MatrixXd::Identity(3, 3);
    pb.lower = {-1.0, -kInf, 0.5};
    pb.upper = {0.7, 1.3, 2.0};
    const double exact = (norm_cdf(0.7) - norm_cdf(-1.0)) * norm_cdf(1.3) * (norm_cdf(2.0) - norm_cdf(0.5));
    EXPECT_NEAR(median_of_replicates(pb, 5).value, exact, 1e-5);
}

TEST(Mvn, ForcedQmcMatchesClosedFormInTwoDims) {
    auto pb = orthant(equicorrelated(2, 0.5));
    pb.force_qmc = true;
    EXPECT_NEAR(median_of_replicates(pb, 5).value, 1.0 / 3.0, 1e-5);
}

TEST(Mvn, ReplicateSpreadWithinAccuracy) {
    Eigen::MatrixXd c = equicorrelated(4, 0.7);
    c(0, 3) = c(3, 0) = 0.4;
    MvnProblem pb;
    pb.corr = c;
    pb.lower.assign(4, -kInf);
    pb.upper = {2.1, 2.4, 1.9, 2.2};
    double lo = 1.0, hi = 0.0;
    for (std::uint64_t s = 0; s < 7; ++s) {
        const double v = detail::mvn_single(pb, s).value;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    EXPECT_LT(hi - lo, 5 * pb.accuracy);
}

TEST(Mvn, EmptyRectangleAndSeedDeterminism) {
    MvnProblem pb = orthant(equicorrelated(3, 0.2));
    pb.lower[1] = 0.5;
    pb.upper[1] = 0.5;
    EXPECT_DOUBLE_EQ(mvn_rectangle(pb).value, 0.0);
    auto a = orthant(equicorrelated(4, 0.3));
    EXPECT_EQ(median_of_replicates(a, 3).value, median_of_replicates(a, 3).value);
}

TEST(Mvn, EvenReplicatesRejected) {
    EXPECT_THROW(median_of_replicates(orthant(equicorrelated(3, 0.2)), 2), DomainError);
}

TEST(Mvn, CdfHelper) {
    EXPECT_NEAR(mvn_cdf({0.0, 0.0}, equicorrelated(2, 0.5), MvnProblem{}), 1.0 / 3.0, 1e-12);
}
