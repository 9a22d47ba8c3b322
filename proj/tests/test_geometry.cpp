#include <gtest/gtest.h>

#include <random>

#include "qcarleson/geometry.hpp"

using namespace qc;

namespace {

Tile random_tile(std::mt19937_64& rng, int kmin, int kmax, std::int64_t span = 6)
{
    const int k = kmin + static_cast<int>(rng() % static_cast<unsigned>(kmax - kmin + 1));
    const auto j = static_cast<std::int64_t>(rng() % (1u << k));
    const std::int64_t p = static_cast<std::int64_t>(rng() % static_cast<unsigned>(2 * span)) - span;
    const std::int64_t q = p + static_cast<std::int64_t>(rng() % 5) - 2;
    return Tile::at(k, j, p, q);
}

// Grid oracle: minimize over g points per edge of both tiles.
// Longer interval first; equal lengths put the earlier tile first.
std::pair<Tile, Tile> ordered(const Tile& A, const Tile& B)
{
    const double la = A.time.length(), lb = B.time.length();
    if (la != lb)
        return la > lb ? std::pair{A, B} : std::pair{B, A};
    return B < A ? std::pair{B, A} : std::pair{A, B};
}

double brute_delta(const Tile& A, const Tile& B, int g)
{
    const auto [P1, P2] = ordered(A, B);
    auto pts = [g](const RealInterval& r) {
        std::vector<double> v;
        for (int i = 0; i < g; ++i)
            v.push_back(r.left + (r.right - r.left) * i / (g - 1));
        return v;
    };
    const auto U1 = pts(P1.alpha_edge()), V1 = pts(P1.omega_edge());
    const auto U2 = pts(P2.alpha_edge()), V2 = pts(P2.omega_edge());
    const RealInterval J = P2.time.real();
    double best = infinity;
    for (double u1 : U1)
        for (double v1 : V1) {
            const Line l1 = Line::through(P1.xl(), u1, P1.xr(), v1);
            const double a = l1(J.left), b = l1(J.right);
            for (double u2 : U2)
                for (double v2 : V2)
                    best = std::min(best, std::max(std::abs(a - u2), std::abs(b - v2)));
        }
    return best / P2.omega_edge().length();
}

}  // namespace

TEST(Geometry, Distances)
{
    const Line l0{0.0, 0.0}, l2{0.0, 1.0};
    EXPECT_DOUBLE_EQ(dist_sup(l0, l0, {0, 1}), 0.0);
    EXPECT_DOUBLE_EQ(dist_sup(l0, l2, {0, 1}), 2.0);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> U(-5, 5);
    for (int t = 0; t < 1000; ++t) {
        const Line a{U(rng), U(rng)}, b{U(rng), U(rng)};
        const double lo = U(rng), hi = lo + std::abs(U(rng)) + 0.01;
        const double x = lo + (hi - lo) * (U(rng) + 5) / 10;
        EXPECT_GE(dist_sup(a, b, {lo, hi}) + 1e-12, dist_at(a, b, x));
    }
}

TEST(Geometry, Bracket)
{
    EXPECT_DOUBLE_EQ(bracket(0.0), 1.0);
    EXPECT_DOUBLE_EQ(bracket(3.0), 0.25);
    EXPECT_DOUBLE_EQ(bracket(-3.0), bracket(3.0));
}

TEST(Geometry, DeltaLine)
{
    const Tile P = Tile::at(0, 0, 0, 0);
    EXPECT_DOUBLE_EQ(delta_line(P, central_line(P)), 0.0);
    EXPECT_DOUBLE_EQ(delta_line(P, {10.0, 0.0}), 9.0);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> U(-20, 20);
    for (int t = 0; t < 500; ++t) {
        const Tile Q = random_tile(rng, 0, 3);
        const Line l{U(rng), U(rng)};
        const double num1 = delta_line(Q, l) * Q.omega_edge().length();
        const double num2 = delta_line(Q.dilated(2), l) * Q.dilated(2).omega_edge().length();
        EXPECT_LE(num2, num1 + 1e-12);
    }
}

TEST(Geometry, DeltaPairExamples)
{
    const Tile P = Tile::at(0, 0, 0, 0);
    const auto g = delta_pair(P, P);
    EXPECT_DOUBLE_EQ(g.delta, 0.0);
    EXPECT_DOUBLE_EQ(g.bracket, 1.0);
    EXPECT_DOUBLE_EQ(delta_value(P, Tile::at(0, 0, 10, 10)), 9.0);
    EXPECT_NEAR(brute_delta(P, Tile::at(0, 0, 10, 10), 11), 9.0, 1e-12);
    // gamma / min|I| = bracket^(1/2 - eps0)
    const auto h = delta_pair(P, Tile::at(1, 0, 3, 2), 0.1);
    EXPECT_NEAR(h.gamma / 0.5, std::pow(h.bracket, 0.4), 1e-14);
    EXPECT_DOUBLE_EQ(h.bracket, 1.0 / (1.0 + h.delta));
}

TEST(Geometry, DeltaSymmetricAndInvariant)
{
    std::mt19937_64 rng(4);
    for (int t = 0; t < 2000; ++t) {
        const Tile A = random_tile(rng, 0, 3), B = random_tile(rng, 0, 3);
        const double d = delta_value(A, B);
        EXPECT_DOUBLE_EQ(d, delta_value(B, A));
        // frequency shift by whole rows of the widest tile
        const int kmax = std::max(A.scale(), B.scale());
        auto shift_fine = [&](Tile P) {
            const std::int64_t rows = std::int64_t{3} << (kmax - P.scale());
            P.alpha.index += rows;
            P.omega.index += rows;
            return P;
        };
        EXPECT_NEAR(delta_value(shift_fine(A), shift_fine(B)), d, 1e-12 * (1 + d));
    }
}

TEST(Geometry, ShearInvariance)
{
    // adding the line 2 s x (s a multiple of 4^kmax rows) shears both tiles
    std::mt19937_64 rng(6);
    for (int t = 0; t < 1000; ++t) {
        const Tile A = random_tile(rng, 0, 2), B = random_tile(rng, 0, 2);
        const double slope = 64.0;  // frequency change over [0,1)
        auto shear = [&](Tile P) {
            const double w = P.width();
            P.alpha.index += static_cast<std::int64_t>(slope * P.xl() / w);
            P.omega.index += static_cast<std::int64_t>(slope * P.xr() / w);
            return P;
        };
        const double d = delta_value(A, B);
        EXPECT_NEAR(delta_value(shear(A), shear(B)), d, 1e-12 * (1 + d));
    }
}

TEST(Geometry, DeltaMatchesBruteForce)
{
    std::mt19937_64 rng(8);
    const int g = 20;
    for (int t = 0; t < 200; ++t) {
        const Tile A = random_tile(rng, 0, 2, 3).dilated(1.0 + static_cast<double>(rng() % 3));
        const Tile B = random_tile(rng, 0, 3, 3).dilated(1.0 + static_cast<double>(rng() % 3));
        const auto [P1, P2] = ordered(A, B);
        const double exact = delta_value(A, B);
        const double grid = brute_delta(A, B, g);
        // Lipschitz constant of l1 at the edges of I2 in P1's edge values
        const double s = (P2.xl() - P1.xl()) / P1.time.length(), u = (P2.xr() - P1.xl()) / P1.time.length();
        const double lip = std::max(std::abs(1 - s) + std::abs(s), std::abs(1 - u) + std::abs(u));
        const double res = (lip * P1.alpha_edge().length() + P2.alpha_edge().length()) / (g - 1) /
                           P2.omega_edge().length();
        EXPECT_LE(exact, grid + 1e-12);
        EXPECT_LE(grid - exact, res + 1e-12) << t;
    }
}

TEST(Geometry, PairFactorVersusLineFactors)
{
    std::mt19937_64 rng(10);
    double worst = 1.0;
    int used = 0;
    for (int t = 0; used < 10000; ++t) {
        const Tile A = random_tile(rng, 0, 3), B = random_tile(rng, 0, 3);
        const auto [P1, P2] = ordered(A, B);
        // only pairs whose star sets meet carry any interaction
        if (star_intervals(P1.time).both().intersect(star_intervals(P2.time).both()).empty())
            continue;
        ++used;
        const double lhs = bracket(delta_value(P1, P2));
        const double rhs =
            std::max(bracket(delta_line(P2, central_line(P1))), bracket(delta_line(P1, central_line(P2))));
        const double ratio = std::max(lhs / rhs, rhs / lhs);
        worst = std::max(worst, ratio);
    }
    RecordProperty("worst_ratio", std::to_string(worst));
    EXPECT_LE(worst, 4.0);
}

TEST(Geometry, SeparationGeometry)
{
    const Top T = make_top({Tile::at(2, 1, 0, 0)});
    const double delta = 0.25;
    const auto g = separation_geometry(T, {0.0, 1.0}, T, {1.0, 0.0}, delta);
    EXPECT_DOUBLE_EQ(g.w, 0.25 * std::pow(delta, -0.5) / 100.0);
    ASSERT_FALSE(g.I_s.empty());
    EXPECT_NEAR(g.I_c.length(), 3 * std::pow(delta, 0.45) * g.I_s.length(), 1e-15);
    const auto par = separation_geometry(T, {0.0, 1.0}, T, {1.0, 1.0}, delta);
    EXPECT_TRUE(par.I_s.empty());
    EXPECT_TRUE(par.I_c.empty());
    EXPECT_THROW(separation_geometry(T, T, 1.5), std::invalid_argument);
}

TEST(Geometry, CriticalInterval)
{
    // crossing lines: the critical set is inside both star sets
    const Tile A = Tile::at(0, 0, 0, 3), B = Tile::at(0, 0, 3, 0);
    const auto g = delta_pair(A, B);
    ASSERT_TRUE(std::isfinite(g.x_intersect));
    EXPECT_DOUBLE_EQ(g.x_intersect, 0.5);
    for (const auto& p : g.critical.parts()) {
        EXPECT_TRUE(star_intervals(A.time).both().contains(p.left));
    }
}
