#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "dyadic.hpp"

namespace qc {

namespace bump {

// C-infinity step: 0 for t <= 0, 1 for t >= 1, built from exp(-1/t).
inline double smooth_step(double t)
{
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    const double a = std::exp(-1.0 / t), b = std::exp(-1.0 / (1.0 - t));
    return a / (a + b);
}

// 1 on [0, 1/2], 0 on [1, inf).
inline double phi(double r) { return 1.0 - smooth_step(2.0 * r - 1.0); }

// Even, supported in 2 < |y| < 8, and sum_k chi(2^k y) = 1 for y != 0.
inline double chi(double y)
{
    const double r = std::abs(y);
    return phi(r / 8.0) - phi(r / 4.0);
}

// Smooth partition of [2, 8]: piece j lives in (1 + j/2, 2 + j/2).
inline double rho(int j, double r)
{
    auto S = [](double t) { return smooth_step(2.0 * t); };
    return S(r - (1.0 + 0.5 * j)) - S(r - (1.5 + 0.5 * j));
}

}  // namespace bump

inline constexpr int full_piece = 0;
inline constexpr int narrow_piece = 6;

/// psi (piece 0) or one of its 13 pieces psi^j, rescaled to scale k:
/// psi_k(y) = 2^k psi(2^k y).
struct KernelPiece {
    int piece = full_piece;
    int scale = 0;

    static double base(int piece, double y)
    {
        if (y == 0.0)
            return 0.0;
        const double c = bump::chi(y);
        if (c == 0.0)
            return 0.0;
        if (piece == full_piece)
            return c / y;
        return bump::rho(piece, std::abs(y)) * c / y;
    }

    double operator()(double y) const
    {
        const double s = std::ldexp(1.0, scale);
        return s * base(piece, s * y);
    }

    // Support on the positive half-line; the kernel is odd.
    RealInterval support() const
    {
        double lo = 2.0, hi = 8.0;
        if (piece != full_piece) {
            lo = std::max(lo, 1.0 + 0.5 * piece);
            hi = std::min(hi, 2.0 + 0.5 * piece);
        }
        const double s = std::ldexp(1.0, -scale);
        return {lo * s, hi * s};
    }
};

inline KernelPiece build_psi() { return {full_piece, 0}; }

inline std::vector<KernelPiece> split_13(const KernelPiece& psi)
{
    if (psi.piece != full_piece)
        throw std::invalid_argument("split_13 expects the full kernel");
    std::vector<KernelPiece> v;
    for (int j = 1; j <= 13; ++j)
        v.push_back({j, psi.scale});
    return v;
}

inline KernelPiece psi_k(const KernelPiece& psi, int k)
{
    if (k < 0)
        throw std::invalid_argument("psi_k: k must be >= 0");
    return {psi.piece, psi.scale + k};
}

/// R(y) = sum over k in {0, 10, 20, ...} up to k_max of psi_k(y).
struct AveragedKernel {
    KernelPiece psi;
    int k_max = 10;

    double operator()(double y) const
    {
        double s = 0.0;
        for (int k = 0; k <= k_max; k += 10)
            s += psi_k(psi, k)(y);
        return s;
    }
};

inline AveragedKernel build_R(const KernelPiece& psi, int k_max = 10) { return {psi, k_max}; }

// Partial sum sum_{k=0..k_max} psi_k(y).
inline double psi_sum(const KernelPiece& psi, int k_max, double y)
{
    double s = 0.0;
    for (int k = 0; k <= k_max; ++k)
        s += psi_k(psi, k)(y);
    return s;
}

/// Largest |sum_{k<=k_max} psi_k(y) - 1/y| over `count` points spread
/// log-uniformly in (8 2^-k_max, 1), both signs.
inline double telescoping_error(int k_max, int count)
{
    const KernelPiece psi = build_psi();
    const double lo = std::log(8.0 * std::ldexp(1.0, -k_max)), hi = 0.0;
    double worst = 0.0;
    for (int i = 0; i < count; ++i) {
        const double t = (i + 0.5) / count;
        double y = std::exp(lo + t * (hi - lo));
        if (i % 2) y = -y;
        worst = std::max(worst, std::abs(psi_sum(psi, k_max, y) - 1.0 / y));
    }
    return worst;
}

// Midpoint-rule integral of a kernel piece over its support.
template <class F>
double integrate_support(const F& f, const RealInterval& supp, int n = 20000)
{
    double s = 0.0;
    const double h = supp.length() / n;
    for (int i = 0; i < n; ++i) {
        const double y = supp.left + (i + 0.5) * h;
        s += f(y) + f(-y);
    }
    return s * h;
}

inline double l1_norm(const KernelPiece& p, int n = 20000)
{
    return integrate_support([&](double y) { return std::abs(p(y)); }, p.support(), n);
}

// |psi^(xi)| with psi^(xi) = int psi(y) e^{-i xi y} dy, by the midpoint rule.
inline double fourier_abs(const KernelPiece& p, double xi, int n = 200000)
{
    const RealInterval s = p.support();
    const double h = s.length() / n;
    std::complex<double> acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const double y = s.left + (i + 0.5) * h;
        const double v = p(y);
        // odd kernel: psi(y) e^{-i xi y} + psi(-y) e^{i xi y} = -2i psi(y) sin(xi y)
        acc += std::complex<double>(0.0, -2.0 * v * std::sin(xi * y));
    }
    return std::abs(acc) * h;
}

}  // namespace qc
