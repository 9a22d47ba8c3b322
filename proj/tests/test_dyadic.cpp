#include <gtest/gtest.h>

#include <random>

#include "qcarleson/dyadic.hpp"

using namespace qc;

TEST(Dyadic, Center)
{
    EXPECT_DOUBLE_EQ(center(DyadicInterval(1, 0)), 0.25);
    EXPECT_DOUBLE_EQ(center(DyadicInterval(0, 0)), 0.5);
    EXPECT_DOUBLE_EQ(center(DyadicInterval(3, 6)), 0.8125);
}

TEST(Dyadic, Brothers)
{
    const auto r = right_brother(DyadicInterval(1, 0));
    EXPECT_EQ(r.interval, DyadicInterval(1, 1));
    EXPECT_FALSE(r.escapes_unit);
    EXPECT_EQ(left_brother(DyadicInterval(1, 1)).interval, DyadicInterval(1, 0));
    EXPECT_EQ(right_brother(DyadicInterval(2, 0)).interval, DyadicInterval(2, 1));
    EXPECT_TRUE(right_brother(DyadicInterval(1, 1)).escapes_unit);
    EXPECT_TRUE(left_brother(DyadicInterval(3, 0)).escapes_unit);
    // c(I_r) = c(I) + |I|
    const DyadicInterval I(4, 5);
    EXPECT_DOUBLE_EQ(right_brother(I).interval.center(), I.center() + I.length());
}

TEST(Dyadic, Dilate)
{
    EXPECT_EQ(dilate(DyadicInterval(0, 0), 13.0), RealInterval(-6.0, 7.0));
    EXPECT_EQ(tilde(DyadicInterval(0, 0)), RealInterval(-6.0, 7.0));
    EXPECT_EQ(dilate(DyadicInterval(0, 0), 1.0), RealInterval(0.0, 1.0));
    EXPECT_EQ(dilate(DyadicInterval(2, 1), 2.0), RealInterval(0.125, 0.625));
    EXPECT_THROW(dilate(RealInterval(0, 1), 0.0), std::invalid_argument);
    EXPECT_THROW(dilate(RealInterval(0, 1), -2.0), std::invalid_argument);
}

TEST(Dyadic, DilateComposes)
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(0.1, 10.0);
    for (int t = 0; t < 1000; ++t) {
        const RealInterval I(-U(rng), U(rng));
        const double a = U(rng), b = U(rng);
        const auto x = dilate(dilate(I, a), b), y = dilate(I, a * b);
        EXPECT_NEAR(x.left, y.left, 1e-12 * (1 + std::abs(y.left)));
        EXPECT_NEAR(x.right, y.right, 1e-12 * (1 + std::abs(y.right)));
    }
}

TEST(Dyadic, StarIntervals)
{
    const auto s = star_intervals(DyadicInterval(0, 0));
    EXPECT_EQ(s.right, RealInterval(4.0, 6.0));
    EXPECT_EQ(s.left, RealInterval(-5.0, -3.0));
    EXPECT_EQ(star_intervals(DyadicInterval(1, 0)).right, RealInterval(2.0, 3.0));
    for (int k = 0; k < 8; ++k) {
        const DyadicInterval I(k, (1 << k) / 3);
        const auto st = star_intervals(I);
        EXPECT_DOUBLE_EQ(st.right.length(), 2 * I.length());
        EXPECT_DOUBLE_EQ(st.left.length(), 2 * I.length());
        // every point of I* sits at distance in [3|I|, 5|I|) from I
        for (double x : {st.right.left, st.right.center(), st.left.left + 1e-9 * I.length(), st.left.center()}) {
            const double d = dist_to(x, I.real());
            EXPECT_GE(d, 3 * I.length() * (1 - 1e-12));
            EXPECT_LT(d, 5 * I.length());
        }
    }
}

TEST(Dyadic, ScalePartitionIsExact)
{
    for (int k = 0; k <= 12; ++k) {
        const auto v = scale_partition(k);
        ASSERT_EQ(v.size(), std::size_t{1} << k);
        EXPECT_EQ(v.front().left(), 0.0);
        EXPECT_EQ(v.back().right(), 1.0);
        for (std::size_t i = 1; i < v.size(); ++i)
            EXPECT_EQ(v[i - 1].right(), v[i].left());
    }
}

TEST(Dyadic, NestingOrDisjoint)
{
    std::mt19937_64 rng(11);
    for (int t = 0; t < 5000; ++t) {
        const int k1 = static_cast<int>(rng() % 10), k2 = static_cast<int>(rng() % 10);
        const DyadicInterval a(k1, static_cast<std::int64_t>(rng() % (1u << k1)));
        const DyadicInterval b(k2, static_cast<std::int64_t>(rng() % (1u << k2)));
        const bool overlap = !intersect(a.real(), b.real()).empty();
        EXPECT_EQ(overlap, a.subset_of(b) || b.subset_of(a));
        if (k1 == k2) {
            EXPECT_EQ(overlap, a == b);
        }
    }
}

TEST(Dyadic, FrequencyAxisAllowsNegativeScales)
{
    const DyadicInterval w(-3, -2, Axis::freq);
    EXPECT_DOUBLE_EQ(w.length(), 8.0);
    EXPECT_DOUBLE_EQ(w.left(), -16.0);
    EXPECT_THROW(DyadicInterval(-1, 0, Axis::time), std::invalid_argument);
}

TEST(Dyadic, WrapUnit)
{
    IntervalSet s({-0.25, 0.25});
    const auto w = wrap_unit(s);
    EXPECT_DOUBLE_EQ(w.measure(), 0.5);
    EXPECT_TRUE(w.contains(0.9));
    EXPECT_TRUE(w.contains(0.1));
    EXPECT_FALSE(w.contains(0.5));
}
