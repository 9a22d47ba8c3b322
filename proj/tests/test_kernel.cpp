#include <gtest/gtest.h>

#include <random>

#include "qcarleson/kernel.hpp"

using namespace qc;

TEST(Kernel, PsiOddAndSupported)
{
    const KernelPiece psi = build_psi();
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> U(-10, 10);
    for (int t = 0; t < 1000; ++t) {
        const double y = U(rng);
        EXPECT_DOUBLE_EQ(psi(-y), -psi(y));
        if (std::abs(y) <= 2 || std::abs(y) >= 8) {
            EXPECT_EQ(psi(y), 0.0);
        }
    }
    EXPECT_EQ(psi(1.0), 0.0);
    EXPECT_EQ(psi(9.0), 0.0);
    EXPECT_NE(psi(4.0), 0.0);
}

TEST(Kernel, Telescoping)
{
    const KernelPiece psi = build_psi();
    EXPECT_NEAR(psi_sum(psi, 20, 0.3), 1.0 / 0.3, 1e-9);
    EXPECT_LT(telescoping_error(10, 10000), 1e-8);
    EXPECT_LT(telescoping_error(16, 10000), 1e-8);
}

TEST(Kernel, Split13)
{
    const KernelPiece psi = build_psi();
    const auto pieces = split_13(psi);
    ASSERT_EQ(pieces.size(), 13u);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> U(-9, 9);
    for (int t = 0; t < 1000; ++t) {
        const double y = U(rng);
        double s = 0.0;
        for (const auto& p : pieces) {
            s += p(y);
            EXPECT_DOUBLE_EQ(p(-y), -p(y));
        }
        EXPECT_NEAR(s, psi(y), 1e-10);
    }
    for (int j = 1; j <= 13; ++j) {
        const KernelPiece p{j, 0};
        for (int t = 0; t < 200; ++t) {
            const double y = U(rng);
            const double r = std::abs(y);
            if (r <= 1 + 0.5 * j || r >= 2 + 0.5 * j) {
                EXPECT_EQ(p(y), 0.0) << j << " " << y;
            }
        }
    }
    const KernelPiece narrow = pieces[narrow_piece - 1];
    EXPECT_NE(narrow(4.5), 0.0);
    EXPECT_EQ(narrow(3.9), 0.0);
    EXPECT_EQ(narrow(5.0), 0.0);
    EXPECT_THROW(split_13(narrow), std::invalid_argument);
}

TEST(Kernel, Rescaling)
{
    const KernelPiece psi = build_psi();
    const KernelPiece p0 = psi_k(psi, 0);
    for (double y : {-5.0, 2.5, 3.3, 7.9})
        EXPECT_EQ(p0(y), psi(y));
    const double l1 = l1_norm(psi);
    for (int k = 1; k <= 6; ++k)
        EXPECT_NEAR(l1_norm(psi_k(psi, k)), l1, 1e-9);
    const KernelPiece n3 = psi_k({narrow_piece, 0}, 3);
    EXPECT_EQ(n3.support(), RealInterval(0.5, 0.625));
    EXPECT_EQ(n3(0.49), 0.0);
    EXPECT_EQ(n3(0.63), 0.0);
    EXPECT_NE(n3(0.56), 0.0);
    EXPECT_THROW(psi_k(psi, -1), std::invalid_argument);
}

TEST(Kernel, AveragedKernel)
{
    const KernelPiece psi = build_psi();
    const AveragedKernel R = build_R(psi, 20);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(2.0, 8.0);
    for (int t = 0; t < 500; ++t) {
        const double y = U(rng);
        EXPECT_DOUBLE_EQ(R(y), psi(y));
        EXPECT_DOUBLE_EQ(R(-y), -R(y));
        const double z = y * std::ldexp(1.0, -10);
        EXPECT_DOUBLE_EQ(R(z), psi_k(psi, 10)(z));
    }
    EXPECT_NEAR(integrate_support([&](double y) { return R(y); }, {1e-6, 8.0}, 100000), 0.0, 1e-12);
}

TEST(Kernel, MeanZeroPieces)
{
    for (int j = 0; j <= 13; ++j) {
        const KernelPiece p{j, 0};
        EXPECT_LT(std::abs(integrate_support(p, p.support())), 1e-10);
    }
}

TEST(Kernel, FourierDecay)
{
    // log-log slope of |psi^| over [1, 1000] is well below -4
    const KernelPiece psi = build_psi();
    std::vector<double> xs, ys;
    for (double xi = 1.0; xi <= 1000.0; xi *= 1.5) {
        xs.push_back(std::log(xi));
        ys.push_back(std::log(std::max(fourier_abs(psi, xi), 1e-300)));
    }
    // sup bound C (1+xi)^-4 with C fitted on the first point
    const double C = std::exp(ys.front()) * std::pow(2.0, 4.0) * 10;
    for (std::size_t i = 0; i < xs.size(); ++i)
        EXPECT_LE(std::exp(ys[i]), C * std::pow(1.0 + std::exp(xs[i]), -4.0) + 1e-12);
}
