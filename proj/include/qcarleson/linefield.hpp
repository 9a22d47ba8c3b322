#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "dyadic.hpp"
#include "geometry.hpp"
#include "tile.hpp"

namespace qc {

inline bool is_pow2(std::size_t n) { return n && !(n & (n - 1)); }

inline int log2_exact(std::size_t n)
{
    if (!is_pow2(n))
        throw std::invalid_argument("expected a power of two");
    int k = 0;
    while ((std::size_t{1} << k) < n)
        ++k;
    return k;
}

/// x -> l_x with (c, b) constant on each of the n cells [i/n, (i+1)/n).
struct LineField {
    std::size_t n = 0;
    std::vector<double> c;
    std::vector<double> b;
    std::string generator = "constant";
    std::uint64_t seed = 0;

    LineField() = default;
    explicit LineField(std::size_t res, Line l = {}, std::string gen = "constant")
        : n(res), c(res, l.c), b(res, l.b), generator(std::move(gen))
    {
        if (!is_pow2(n))
            throw std::invalid_argument("line field resolution must be a power of two");
    }

    double h() const { return 1.0 / static_cast<double>(n); }
    Line line(std::size_t i) const { return {c[i], b[i]}; }
    void set(std::size_t i, const Line& l)
    {
        c[i] = l.c;
        b[i] = l.b;
    }

    // Cell range [first, last) covered by a time interval.
    std::pair<std::size_t, std::size_t> cells(const DyadicInterval& I) const
    {
        if (I.scale > log2_exact(n))
            throw std::invalid_argument("line field is coarser than the interval scale");
        const std::size_t per = n >> I.scale;
        return {static_cast<std::size_t>(I.index) * per, static_cast<std::size_t>(I.index + 1) * per};
    }
};

/// |E(P)| counted cell by cell with half-open tile membership.
inline double measure_E(const Tile& P, const LineField& L)
{
    const auto [i0, i1] = L.cells(P.time);
    std::size_t hits = 0;
    for (std::size_t i = i0; i < i1; ++i)
        hits += passes_through(P, L.line(i));
    return hits * L.h();
}

inline std::vector<std::size_t> E_cells(const Tile& P, const LineField& L)
{
    const auto [i0, i1] = L.cells(P.time);
    std::vector<std::size_t> v;
    for (std::size_t i = i0; i < i1; ++i)
        if (passes_through(P, L.line(i)))
            v.push_back(i);
    return v;
}

inline double density(const Tile& P, const LineField& L) { return measure_E(P, L) / P.time.length(); }

/// |{x in I : dist^I(l_x, l0) < 2/|I|}|
inline double density_set(const Line& l0, const DyadicInterval& I, const LineField& L)
{
    const auto [i0, i1] = L.cells(I);
    const RealInterval J = I.real();
    const double thr = 2.0 / I.length();
    std::size_t hits = 0;
    for (std::size_t i = i0; i < i1; ++i)
        hits += dist_sup(L.line(i), l0, J) < thr;
    return hits * L.h();
}

// ---- generators -------------------------------------------------------------

inline LineField constant_field(std::size_t n, const Line& l) { return LineField(n, l, "constant"); }

// Random line whose values on [0,1] stay inside [f0, f1).
inline Line random_line(std::mt19937_64& rng, double f0, double f1)
{
    const double margin = 0.05 * (f1 - f0);
    std::uniform_real_distribution<double> U(f0 + margin, f1 - margin);
    const double y0 = U(rng), y1 = U(rng);
    return {y0, 0.5 * (y1 - y0)};
}

/// `pieces` equal pieces, each with its own random line inside the window.
inline LineField piecewise_random_field(std::size_t n, std::size_t pieces, double f0, double f1,
                                        std::uint64_t seed)
{
    if (!is_pow2(pieces) || pieces > n)
        throw std::invalid_argument("pieces must be a power of two not exceeding the resolution");
    std::mt19937_64 rng(seed);
    LineField L(n, {}, "piecewise-random");
    L.seed = seed;
    const std::size_t per = n / pieces;
    for (std::size_t p = 0; p < pieces; ++p) {
        const Line l = random_line(rng, f0, f1);
        for (std::size_t i = p * per; i < (p + 1) * per; ++i)
            L.set(i, l);
    }
    return L;
}

/// Every fiber follows the instantaneous frequency 2 b0 x (+ c0) of the chirp e^{i b0 x^2}.
inline LineField chirp_matched_field(std::size_t n, double b0, double c0 = 0.0)
{
    LineField L(n, {c0, b0}, "chirp-matched");
    return L;
}

// Cells whose bit-reversed index falls below count: exactly count * 2^-s of
// them in every dyadic block of 2^s cells with count * 2^-s integral.
inline std::vector<std::size_t> van_der_corput_cells(std::size_t n, std::size_t count)
{
    const int bits = log2_exact(n);
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t r = 0;
        for (int t = 0; t < bits; ++t)
            if (i & (std::size_t{1} << t))
                r |= std::size_t{1} << (bits - 1 - t);
        if (r < count)
            out.push_back(i);
    }
    return out;
}

/// Adversarial field planting a tree: inside I0 a fraction `dens` of the cells
/// (spread evenly over every dyadic block) carry l0; every other cell carries
/// `away`, a line far from the planted corridor.
inline LineField planted_field(std::size_t n, const DyadicInterval& I0, const Line& l0, double dens,
                               const Line& away)
{
    LineField L(n, away, "adversarial");
    const auto [i0, i1] = L.cells(I0);
    const std::size_t m = i1 - i0;
    const auto count = static_cast<std::size_t>(std::llround(dens * static_cast<double>(m)));
    for (std::size_t r : van_der_corput_cells(m, count))
        L.set(i0 + r, l0);
    return L;
}

// ---- mass -------------------------------------------------------------------

struct MassConfig {
    int N = 10;
    double tol = 1e-6;

    // Candidates with Delta above this radius contribute less than tol.
    double radius() const { return std::pow(tol, -1.0 / N) - 1.0; }
};

/// Mass A(P). The supremum runs over the tiles P' above P that some fiber
/// passes through (all others have |E(P')| = 0); per dyadic ancestor these are
/// tabulated once with their densities.
class MassEngine {
public:
    MassEngine(const LineField& L, MassConfig cfg, int max_scale) : L_(&L), cfg_(cfg), max_scale_(max_scale)
    {
        if (max_scale > log2_exact(L.n))
            throw std::invalid_argument("MassEngine: scale finer than the line field");
        for (int k = 0; k <= max_scale; ++k) {
            for (const auto& I : scale_partition(k)) {
                std::map<Tile, std::size_t> counts;
                const auto [i0, i1] = L.cells(I);
                for (std::size_t i = i0; i < i1; ++i)
                    ++counts[tile_of_line(L.line(i), I)];
                auto& v = table_[key(I)];
                for (const auto& [t, cnt] : counts)
                    v.push_back({t, cnt * L.h() / I.length()});
                std::stable_sort(v.begin(), v.end(),
                                 [](const Entry& x, const Entry& y) { return x.density > y.density; });
            }
        }
    }

    const MassConfig& config() const { return cfg_; }

    double density_of(const Tile& P) const
    {
        for (const auto& e : entries(P.time))
            if (e.tile.alpha == P.alpha && e.tile.omega == P.omega)
                return e.density;
        return 0.0;
    }

    // scale_ok restricts the supremum to a subfamily of scales (sparse families).
    template <class ScaleOk>
    double mass(const Tile& P, ScaleOk&& scale_ok) const
    {
        if (P.scale() > max_scale_)
            throw std::invalid_argument("mass: tile finer than the tabulated scales");
        const Tile P2 = P.undilated().dilated(2.0);
        const double floor = cfg_.tol;
        double best = 0.0;
        for (int s = P.scale(); s >= 0; --s) {
            if (!scale_ok(s))
                continue;
            for (const auto& e : entries(P.time.ancestor(s))) {
                if (e.density <= best)
                    break;
                const double w = std::pow(bracket(delta_value(P2, e.tile.dilated(2.0))), cfg_.N);
                if (w < floor)
                    continue;
                best = std::max(best, e.density * w);
            }
        }
        return best;
    }

    double mass(const Tile& P) const
    {
        return mass(P, [](int) { return true; });
    }

    struct Entry {
        Tile tile;
        double density;
    };

    const std::vector<Entry>& entries(const DyadicInterval& I) const
    {
        static const std::vector<Entry> none;
        auto it = table_.find(key(I));
        return it == table_.end() ? none : it->second;
    }

private:
    static std::pair<int, std::int64_t> key(const DyadicInterval& I) { return {I.scale, I.index}; }

    const LineField* L_;
    MassConfig cfg_;
    int max_scale_;
    std::map<std::pair<int, std::int64_t>, std::vector<Entry>> table_;
};

inline double mass(const Tile& P, const LineField& L, const MassConfig& cfg = {})
{
    return MassEngine(L, cfg, P.scale()).mass(P);
}

}  // namespace qc
