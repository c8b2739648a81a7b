#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "gsmc/random.hpp"

using namespace gsmc;

// Known-answer vectors from the Random123 distribution (philox4x32, 10 rounds).
TEST(Philox, KnownAnswers) {
    auto a = Philox4x32::apply({0, 0, 0, 0}, {0, 0});
    EXPECT_EQ(a[0], 0x6627e8d5u);
    EXPECT_EQ(a[1], 0xe169c58du);
    EXPECT_EQ(a[2], 0xbc57ac4cu);
    EXPECT_EQ(a[3], 0x9b00dbd8u);

    auto b = Philox4x32::apply({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
    EXPECT_EQ(b[0], 0x408f276du);
    EXPECT_EQ(b[1], 0x41c83b0eu);
    EXPECT_EQ(b[2], 0xa20bc7c6u);
    EXPECT_EQ(b[3], 0x6d5451fdu);

    auto c = Philox4x32::apply({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
    EXPECT_EQ(c[0], 0xd16cfe09u);
    EXPECT_EQ(c[1], 0x94fdccebu);
    EXPECT_EQ(c[2], 0x5001e420u);
    EXPECT_EQ(c[3], 0x24126ea1u);
}

TEST(CounterStream, SameKeySameDraws) {
    CounterStream a(42, 7), b(42, 7);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(CounterStream, StreamsDiffer) {
    std::set<std::uint64_t> first;
    for (std::uint64_t s = 0; s < 1000; ++s) first.insert(CounterStream(42, s).next_u64());
    EXPECT_EQ(first.size(), 1000u);
}

TEST(CounterStream, UniformMoments) {
    CounterStream r(1, 0);
    const int n = 200000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = r.uniform();
        ASSERT_GT(u, 0.0);
        ASSERT_LT(u, 1.0);
        s += u;
        s2 += u * u;
    }
    const double mean = s / n, var = s2 / n - mean * mean;
    EXPECT_NEAR(mean, 0.5, 4.0 * std::sqrt(1.0 / 12.0 / n));
    EXPECT_NEAR(var, 1.0 / 12.0, 1e-3);
}

TEST(CounterStream, ExponentialMean) {
    CounterStream r(3, 9);
    const int n = 100000;
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += r.exponential(2.0);
    EXPECT_NEAR(s / n, 0.5, 4.0 * 0.5 / std::sqrt(n));
}
