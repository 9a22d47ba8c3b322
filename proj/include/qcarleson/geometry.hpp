#pragma once

#include <array>
#include <cmath>
#include <limits>

#include "dyadic.hpp"
#include "tile.hpp"

namespace qc {

inline constexpr double infinity = std::numeric_limits<double>::infinity();

inline double dist_at(const Line& l1, const Line& l2, double x0) { return std::abs(l1(x0) - l2(x0)); }

// Affine difference: the sup over an interval sits at an endpoint.
inline double dist_sup(const Line& l1, const Line& l2, const RealInterval& A)
{
    return std::max(dist_at(l1, l2, A.left), dist_at(l1, l2, A.right));
}

inline double bracket(double x) { return 1.0 / (1.0 + std::abs(x)); }

/// Delta_l(P). The edge values of l1 in P are independent, so the infimum of
/// the endpoint max is the max of the two clamping distances.
inline double delta_line(const Tile& P, const Line& l)
{
    const double d = std::max(dist_to(l(P.xl()), P.alpha_edge()), dist_to(l(P.xr()), P.omega_edge()));
    return d / P.omega_edge().length();
}

namespace detail {

// Order a pair so that the first tile has the longer (or, on ties, the
// earlier) time interval.
inline bool pair_swapped(const Tile& P1, const Tile& P2)
{
    const double L1 = P1.time.length(), L2 = P2.time.length();
    if (L1 != L2)
        return L1 < L2;
    return P2 < P1;
}

// inf over l1 in P1, l2 in P2 of the sup distance on I2, unnormalized.
// P1's edge values (u, v) range over a box; the values of l1 at the edges of
// I2 are affine in (u, v) and the objective is the max of five affine pieces.
// The minimum sits at a vertex of the arrangement formed by the box edges and
// the pairwise equality lines of the pieces.
inline double min_edge_distance(const Tile& P1, const Tile& P2)
{
    const RealInterval A1 = P1.alpha_edge(), W1 = P1.omega_edge();
    const RealInterval A2 = P2.alpha_edge(), W2 = P2.omega_edge();
    const double L1 = P1.time.length();
    const double s = (P2.xl() - P1.xl()) / L1, t = (P2.xr() - P1.xl()) / L1;

    struct Aff {
        double a, b, c;
        double operator()(double u, double v) const { return a * u + b * v + c; }
    };
    const std::array<Aff, 5> f{{{0, 0, 0},
                                {-(1 - s), -s, A2.left},
                                {(1 - s), s, -A2.right},
                                {-(1 - t), -t, W2.left},
                                {(1 - t), t, -W2.right}}};
    auto F = [&](double u, double v) {
        double m = 0.0;
        for (const auto& g : f)
            m = std::max(m, g(u, v));
        return m;
    };

    // Lines written as p*u + q*v = r.
    struct L {
        double p, q, r;
    };
    std::array<L, 14> lines{};
    std::size_t n = 0;
    lines[n++] = {1, 0, A1.left};
    lines[n++] = {1, 0, A1.right};
    lines[n++] = {0, 1, W1.left};
    lines[n++] = {0, 1, W1.right};
    for (std::size_t i = 0; i < f.size(); ++i)
        for (std::size_t j = i + 1; j < f.size(); ++j) {
            const double p = f[i].a - f[j].a, q = f[i].b - f[j].b;
            if (std::abs(p) + std::abs(q) < 1e-15)
                continue;
            lines[n++] = {p, q, f[j].c - f[i].c};
        }

    const double scale = 1.0 + std::max({std::abs(A1.left), std::abs(A1.right), std::abs(W1.left),
                                         std::abs(W1.right)});
    const double tol = 1e-12 * scale;
    double best = std::min({F(A1.left, W1.left), F(A1.left, W1.right), F(A1.right, W1.left),
                            F(A1.right, W1.right)});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double det = lines[i].p * lines[j].q - lines[j].p * lines[i].q;
            if (std::abs(det) < 1e-14)
                continue;
            double u = (lines[i].r * lines[j].q - lines[j].r * lines[i].q) / det;
            double v = (lines[i].p * lines[j].r - lines[j].p * lines[i].r) / det;
            if (u < A1.left - tol || u > A1.right + tol || v < W1.left - tol || v > W1.right + tol)
                continue;
            u = std::clamp(u, A1.left, A1.right);
            v = std::clamp(v, W1.left, W1.right);
            best = std::min(best, F(u, v));
        }
    return best;
}

}  // namespace detail

/// Delta(P1, P2), normalized by |a omega| of the tile with the shorter interval.
inline double delta_value(const Tile& P1, const Tile& P2)
{
    if (detail::pair_swapped(P1, P2))
        return delta_value(P2, P1);
    return detail::min_edge_distance(P1, P2) / P2.omega_edge().length();
}

/// Abscissa where the central lines meet; +inf when parallel.
inline double x_intersect(const Line& l1, const Line& l2)
{
    if (l1.b == l2.b)
        return infinity;
    return (l2.c - l1.c) / (2.0 * (l1.b - l2.b));
}

struct PairGeometry {
    double delta = 0.0;
    double bracket = 1.0;
    double x_intersect = infinity;
    IntervalSet critical;
    double gamma = 0.0;
};

inline PairGeometry delta_pair(const Tile& P1, const Tile& P2, double eps0 = 0.1)
{
    PairGeometry g;
    g.delta = delta_value(P1, P2);
    g.bracket = bracket(g.delta);
    g.x_intersect = x_intersect(central_line(P1), central_line(P2));
    g.gamma = std::min(P1.time.length(), P2.time.length()) * std::pow(g.bracket, 0.5 - eps0);
    if (std::isfinite(g.x_intersect)) {
        const RealInterval around{g.x_intersect - g.gamma, g.x_intersect + g.gamma};
        // closed in the definition; the endpoints carry no measure
        g.critical = IntervalSet(around).intersect(star_intervals(P1.time).both())
                         .intersect(star_intervals(P2.time).both());
    }
    return g;
}

struct TreeSeparationGeometry {
    double w = 0.0;
    RealInterval I_s = RealInterval::empty_set();
    RealInterval I_c = RealInterval::empty_set();
    double delta_sep = 0.0;
    double x_intersect = infinity;
};

/// Separation and critical intervals of two trees, read off the top
/// representatives and the trees' frequency lines.
inline TreeSeparationGeometry separation_geometry(const Top& top1, const Line& line1, const Top& top2,
                                                  const Line& line2, double delta_sep, double eps = 0.05)
{
    if (!(delta_sep > 0 && delta_sep < 1))
        throw std::invalid_argument("separation_geometry: delta must lie in (0,1)");
    const Tile& P1 = top1.rep();
    const Tile& P2 = top2.rep();
    TreeSeparationGeometry g;
    g.delta_sep = delta_sep;
    const double br = bracket(delta_value(P1, P2));
    g.w = std::min(P1.time.length(), P2.time.length()) * std::sqrt(br / delta_sep) / 100.0;
    g.x_intersect = x_intersect(line1, line2);
    if (!std::isfinite(g.x_intersect))
        return g;
    g.I_s = intersect(intersect({g.x_intersect - g.w, g.x_intersect + g.w}, tilde(P1.time)), tilde(P2.time));
    if (!g.I_s.empty())
        g.I_c = dilate(g.I_s, 3.0 * std::pow(delta_sep, 0.5 - eps));
    return g;
}

inline TreeSeparationGeometry separation_geometry(const Top& top1, const Top& top2, double delta_sep,
                                                  double eps = 0.05)
{
    return separation_geometry(top1, central_line(top1.rep()), top2, central_line(top2.rep()), delta_sep, eps);
}

}  // namespace qc
