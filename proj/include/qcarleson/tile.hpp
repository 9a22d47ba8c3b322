#pragma once

#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "dyadic.hpp"

namespace qc {

/// l(x) = c + 2 b x
struct Line {
    double c = 0.0;
    double b = 0.0;

    double operator()(double x) const { return c + 2.0 * b * x; }
    double slope() const { return 2.0 * b; }

    static Line through(double x0, double y0, double x1, double y1)
    {
        const double s = (y1 - y0) / (x1 - x0);
        return {y0 - s * x0, 0.5 * s};
    }

    friend bool operator==(const Line&, const Line&) = default;
};

/// P = [alpha, omega, I] with |alpha| = |omega| = 1/|I|, dilated by a about the
/// centers of alpha and omega.
struct Tile {
    DyadicInterval alpha{0, 0, Axis::freq};
    DyadicInterval omega{0, 0, Axis::freq};
    DyadicInterval time{0, 0, Axis::time};
    double a = 1.0;

    Tile() = default;
    Tile(DyadicInterval al, DyadicInterval om, DyadicInterval I, double dil = 1.0)
        : alpha(al), omega(om), time(I), a(dil)
    {
        if (alpha.axis != Axis::freq || omega.axis != Axis::freq || time.axis != Axis::time)
            throw std::invalid_argument("tile axes: alpha/omega on freq, I on time");
        if (alpha.scale != -time.scale || omega.scale != -time.scale)
            throw std::invalid_argument("tile needs |alpha| = |omega| = 1/|I|");
        if (!(a > 0))
            throw std::invalid_argument("tile dilation must be positive");
    }

    // Tile over the scale-k interval j with frequency row indices p (alpha) and q (omega).
    static Tile at(int k, std::int64_t j, std::int64_t p, std::int64_t q, double dil = 1.0)
    {
        return {{-k, p, Axis::freq}, {-k, q, Axis::freq}, {k, j, Axis::time}, dil};
    }

    int scale() const { return time.scale; }
    double width() const { return alpha.length(); }  // |alpha| before dilation
    std::int64_t offset() const { return omega.index - alpha.index; }

    RealInterval alpha_edge() const { return dilate(alpha.real(), a); }
    RealInterval omega_edge() const { return dilate(omega.real(), a); }
    double xl() const { return time.left(); }
    double xr() const { return time.right(); }

    Tile dilated(double f) const
    {
        Tile t = *this;
        t.a *= f;
        return t;
    }
    Tile undilated() const
    {
        Tile t = *this;
        t.a = 1.0;
        return t;
    }

    // Frequency of the central line at c(I).
    double frequency_center() const { return 0.5 * (alpha.center() + omega.center()); }
    double area() const { return time.length() * a * omega.length(); }

    friend bool operator==(const Tile&, const Tile&) = default;
    friend std::partial_ordering operator<=>(const Tile& x, const Tile& y)
    {
        if (auto c = x.time <=> y.time; c != 0) return c;
        if (auto c = x.alpha.index <=> y.alpha.index; c != 0) return c;
        if (auto c = x.omega.index <=> y.omega.index; c != 0) return c;
        return x.a <=> y.a;
    }
};

inline Line central_line(const Tile& P)
{
    return Line::through(P.xl(), P.alpha.center(), P.xr(), P.omega.center());
}

// tan of the tile angle: (c(omega) - c(alpha)) / |I|
inline double tile_slope(const Tile& P) { return (P.omega.center() - P.alpha.center()) / P.time.length(); }

/// Closed-edge membership: l(left I) in a*alpha and l(right I) in a*omega.
inline bool contains_line(const Tile& P, const Line& l)
{
    return P.alpha_edge().contains_closed(l(P.xl())) && P.omega_edge().contains_closed(l(P.xr()));
}

/// Half-open membership, matching the half-open dyadic intervals of the tile.
/// This is the rule behind E(P) and the order relations.
inline bool passes_through(const Tile& P, const Line& l)
{
    return P.alpha_edge().contains(l(P.xl())) && P.omega_edge().contains(l(P.xr()));
}

/// The unique undilated tile over I that l passes through.
inline Tile tile_of_line(const Line& l, const DyadicInterval& I)
{
    const int k = I.scale;
    const double yl = std::ldexp(l(I.left()), -k);
    const double yr = std::ldexp(l(I.right()), -k);
    return Tile::at(k, I.index, static_cast<std::int64_t>(std::floor(yl)),
                    static_cast<std::int64_t>(std::floor(yr)));
}

struct Brothers {
    Tile upper;
    Tile lower;
};

inline Brothers brothers(const Tile& P)
{
    Tile u = P, l = P;
    u.alpha.index += 1;
    u.omega.index += 1;
    l.alpha.index -= 1;
    l.omega.index -= 1;
    return {u, l};
}

/// Tiles of P(k, beta) whose parallelogram meets the band [0,1) x [f0, f1).
/// The angle is given by its integer tangent; at scale k the representable
/// tangents are the multiples of 4^k (omega - alpha is a whole number of rows).
inline std::vector<Tile> tile_partition_offset(int k, std::int64_t m, double f0, double f1)
{
    if (k < 0)
        throw std::invalid_argument("tile_partition: scale must be >= 0");
    std::vector<Tile> out;
    const double w = std::ldexp(1.0, k);
    const double lo_min = std::min(0.0, m * w), hi_max = std::max(0.0, m * w);
    const auto pmin = static_cast<std::int64_t>(std::floor((f0 - hi_max) / w)) - 1;
    const auto pmax = static_cast<std::int64_t>(std::ceil((f1 - lo_min) / w)) + 1;
    for (std::int64_t j = 0; j < (std::int64_t{1} << k); ++j)
        for (std::int64_t p = pmin; p <= pmax; ++p) {
            const double lower = p * w + lo_min, upper = (p + 1) * w + hi_max;
            if (lower < f1 && upper > f0)
                out.push_back(Tile::at(k, j, p, p + m));
        }
    return out;
}

inline std::vector<Tile> tile_partition(int k, double tan_beta, double f0, double f1)
{
    if (tan_beta != std::floor(tan_beta))
        throw std::invalid_argument("tile_partition: tan(beta) must be an integer");
    const double rows = std::ldexp(tan_beta, -2 * k);
    if (rows != std::floor(rows))
        throw std::invalid_argument("tile_partition: tan(beta) is not a multiple of 4^k at this scale");
    return tile_partition_offset(k, static_cast<std::int64_t>(rows), f0, f1);
}

namespace detail {

struct Pt {
    double u, v;
};

// Clip a convex polygon by {p : cu*u + cv*v <= b}.
inline std::vector<Pt> clip(const std::vector<Pt>& poly, double cu, double cv, double b)
{
    std::vector<Pt> out;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Pt& p = poly[i];
        const Pt& q = poly[(i + 1) % n];
        const double fp = cu * p.u + cv * p.v - b;
        const double fq = cu * q.u + cv * q.v - b;
        if (fp <= 0)
            out.push_back(p);
        if ((fp < 0 && fq > 0) || (fp > 0 && fq < 0)) {
            const double t = fp / (fp - fq);
            out.push_back({p.u + t * (q.u - p.u), p.v + t * (q.v - p.v)});
        }
    }
    return out;
}

inline double area(const std::vector<Pt>& poly)
{
    double s = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Pt& p = poly[i];
        const Pt& q = poly[(i + 1) % poly.size()];
        s += p.u * q.v - q.u * p.v;
    }
    return 0.5 * std::abs(s);
}

// Set of lines lying in both tiles, written as the polygon of edge values
// (u, v) = (l(left I2), l(right I2)) of the larger tile P2. Requires I1 within I2.
inline std::vector<Pt> common_lines(const Tile& P1, const Tile& P2, double slack)
{
    const RealInterval A2 = P2.alpha_edge(), W2 = P2.omega_edge();
    const RealInterval A1 = P1.alpha_edge(), W1 = P1.omega_edge();
    const double L2 = P2.time.length();
    const double t1 = (P1.xl() - P2.xl()) / L2, t2 = (P1.xr() - P2.xl()) / L2;
    std::vector<Pt> poly{{A2.left - slack, W2.left - slack},
                         {A2.right + slack, W2.left - slack},
                         {A2.right + slack, W2.right + slack},
                         {A2.left - slack, W2.right + slack}};
    poly = clip(poly, 1 - t1, t1, A1.right + slack);
    poly = clip(poly, -(1 - t1), -t1, -(A1.left - slack));
    poly = clip(poly, 1 - t2, t2, W1.right + slack);
    poly = clip(poly, -(1 - t2), -t2, -(W1.left - slack));
    return poly;
}

inline double edge_scale(const Tile& P1, const Tile& P2)
{
    return 1.0 + std::max({std::abs(P1.alpha.center()), std::abs(P1.omega.center()),
                           std::abs(P2.alpha.center()), std::abs(P2.omega.center()),
                           P1.alpha.length() * P1.a, P2.alpha.length() * P2.a});
}

// Necessary condition for a common line: at both edges of I1 the range of P2's
// lines meets P1's edge interval. Requires I1 within I2.
inline bool edge_ranges_meet(const Tile& P1, const Tile& P2, double slack)
{
    const RealInterval A2 = P2.alpha_edge(), W2 = P2.omega_edge();
    const RealInterval A1 = P1.alpha_edge(), W1 = P1.omega_edge();
    const double L2 = P2.time.length();
    auto meets = [&](double x, const RealInterval& J) {
        const double t = (x - P2.xl()) / L2;
        const double lo = (1 - t) * A2.left + t * W2.left, hi = (1 - t) * A2.right + t * W2.right;
        return lo <= J.right + slack && hi >= J.left - slack;
    };
    return meets(P1.xl(), A1) && meets(P1.xr(), W1);
}

}  // namespace detail

/// P1 <= P2: I1 within I2 and some line passes through both tiles (half-open
/// edges). The common-line set is convex with nonempty interior whenever it is
/// nonempty, so the test is a positive-area check on the closed polygon.
inline bool leq(const Tile& P1, const Tile& P2)
{
    if (!P1.time.subset_of(P2.time))
        return false;
    if (!detail::edge_ranges_meet(P1, P2, 0.0))
        return false;
    const auto poly = detail::common_lines(P1, P2, 0.0);
    if (poly.size() < 3)
        return false;
    const double box = P2.alpha_edge().length() * P2.omega_edge().length();
    return detail::area(poly) > 1e-12 * box;
}

/// Same relation with closed edges (lines touching a corner count).
inline bool leq_closed(const Tile& P1, const Tile& P2)
{
    if (!P1.time.subset_of(P2.time))
        return false;
    const double slack = 1e-12 * detail::edge_scale(P1, P2);
    if (!detail::edge_ranges_meet(P1, P2, slack))
        return false;
    return !detail::common_lines(P1, P2, slack).empty();
}

/// P1 ⊴ P2: I1 within I2 and every line of P2 lies in P1. The lines of P2 fill
/// an interval at each abscissa; compare those ranges at the edges of I1.
inline bool trianglelefteq(const Tile& P1, const Tile& P2)
{
    if (!P1.time.subset_of(P2.time))
        return false;
    const RealInterval A2 = P2.alpha_edge(), W2 = P2.omega_edge();
    const RealInterval A1 = P1.alpha_edge(), W1 = P1.omega_edge();
    const double L2 = P2.time.length();
    const double tol = 1e-12 * detail::edge_scale(P1, P2);
    auto range_at = [&](double x) {
        const double t = (x - P2.xl()) / L2;
        return RealInterval{(1 - t) * A2.left + t * W2.left, (1 - t) * A2.right + t * W2.right};
    };
    const RealInterval rl = range_at(P1.xl()), rr = range_at(P1.xr());
    return rl.left >= A1.left - tol && rl.right <= A1.right + tol && rr.left >= W1.left - tol &&
           rr.right <= W1.right + tol;
}

inline bool lneq(const Tile& P1, const Tile& P2)
{
    return P1.time.length() < P2.time.length() && leq(P1, P2);
}

/// 1 to 4 tiles over one time interval, pairwise 4P^j <= 4P^k.
struct Top {
    std::vector<Tile> tiles;
    std::size_t representative = 0;

    const Tile& rep() const { return tiles.at(representative); }
};

// Representative: the member with the smallest frequency center.
inline std::size_t pick_representative(const std::vector<Tile>& tiles)
{
    std::size_t best = 0;
    for (std::size_t i = 1; i < tiles.size(); ++i) {
        const double fi = tiles[i].frequency_center(), fb = tiles[best].frequency_center();
        if (fi < fb || (fi == fb && tiles[i] < tiles[best]))
            best = i;
    }
    return best;
}

struct TopCheck {
    bool ok = true;
    std::string reason;
};

inline TopCheck check_top(const std::vector<Tile>& tiles)
{
    if (tiles.empty() || tiles.size() > 4)
        return {false, "top must have 1 to 4 members"};
    for (const auto& t : tiles)
        if (!(t.time == tiles.front().time))
            return {false, "top members must share the time interval"};
    for (const auto& x : tiles)
        for (const auto& y : tiles)
            if (!leq(x.dilated(4), y.dilated(4)))
                return {false, "top members must satisfy 4P <= 4P'"};
    return {};
}

inline Top make_top(std::vector<Tile> tiles)
{
    std::sort(tiles.begin(), tiles.end());
    if (auto c = check_top(tiles); !c.ok)
        throw std::invalid_argument("make_top: " + c.reason);
    Top t;
    t.representative = pick_representative(tiles);
    t.tiles = std::move(tiles);
    return t;
}

inline bool top_leq(const Tile& P, const Top& T)
{
    for (const auto& m : T.tiles)
        if (leq(P, m))
            return true;
    return false;
}

}  // namespace qc
