#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "dyadic.hpp"
#include "geometry.hpp"
#include "linefield.hpp"
#include "tile.hpp"

namespace qc {

// ---- universe ---------------------------------------------------------------

using IntervalKey = std::pair<int, std::int64_t>;

inline IntervalKey key_of(const DyadicInterval& I) { return {I.scale, I.index}; }

/// Every undilated tile over [0,1) at scales 0..k_max whose alpha and omega rows
/// meet the frequency window [f0, f1).
struct Universe {
    int k_max = 0;
    double f0 = 0.0, f1 = 0.0;
    std::vector<Tile> tiles;

    bool contains(const Tile& P) const
    {
        if (P.a != 1.0 || P.scale() < 0 || P.scale() > k_max || !P.time.in_unit())
            return false;
        auto meets = [&](const DyadicInterval& r) { return r.left() < f1 && r.right() > f0; };
        return meets(P.alpha) && meets(P.omega);
    }
};

inline Universe make_universe(int k_max, double f0, double f1)
{
    if (k_max < 0 || !(f1 > f0))
        throw std::invalid_argument("make_universe: need k_max >= 0 and f1 > f0");
    Universe U{k_max, f0, f1, {}};
    for (int k = 0; k <= k_max; ++k) {
        const double w = std::ldexp(1.0, k);
        const auto r0 = static_cast<std::int64_t>(std::floor(f0 / w));
        const auto r1 = static_cast<std::int64_t>(std::ceil(f1 / w));
        for (std::int64_t j = 0; j < (std::int64_t{1} << k); ++j)
            for (std::int64_t p = r0; p < r1; ++p)
                for (std::int64_t q = r0; q < r1; ++q)
                    U.tiles.push_back(Tile::at(k, j, p, q));
    }
    std::sort(U.tiles.begin(), U.tiles.end());
    return U;
}

/// Tiles grouped by time interval, for walks up the dyadic tree.
class TileIndex {
public:
    TileIndex() = default;
    explicit TileIndex(const std::vector<Tile>& tiles)
    {
        for (const auto& t : tiles)
            by_[key_of(t.time)].push_back(t);
    }

    const std::vector<Tile>& at(const DyadicInterval& I) const
    {
        static const std::vector<Tile> none;
        auto it = by_.find(key_of(I));
        return it == by_.end() ? none : it->second;
    }

    // Tiles over I itself and every strict ancestor.
    template <class F>
    void for_each_over(const DyadicInterval& I, bool include_self, F&& f) const
    {
        for (int s = include_self ? I.scale : I.scale - 1; s >= 0; --s)
            for (const auto& t : at(I.ancestor(s)))
                f(t);
    }

private:
    std::map<IntervalKey, std::vector<Tile>> by_;
};

inline std::vector<Tile> sorted_unique(std::vector<Tile> v)
{
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

inline bool contains_tile(const std::vector<Tile>& sorted, const Tile& P)
{
    return std::binary_search(sorted.begin(), sorted.end(), P);
}

/// Maximal elements of `set` under leq applied to f-dilates, with the
/// convention: P is maximal iff every P' with P <= P' also has P' <= P.
inline std::vector<Tile> maximal_elements(const std::vector<Tile>& set, double f = 1.0)
{
    const TileIndex idx(set);
    std::vector<Tile> out;
    for (const auto& P : set) {
        const Tile Pf = P.dilated(f);
        bool maximal = true;
        idx.for_each_over(P.time, true, [&](const Tile& Q) {
            if (!maximal || Q == P)
                return;
            const Tile Qf = Q.dilated(f);
            if (leq(Pf, Qf) && !leq(Qf, Pf))
                maximal = false;
        });
        if (maximal)
            out.push_back(P);
    }
    return sorted_unique(out);
}

/// Longest strictly ascending chain P < P1 < ... < Pm inside `set`; returns m
/// per tile (0 when nothing in the set lies strictly above).
inline std::map<Tile, int> chain_above(const std::vector<Tile>& set)
{
    std::vector<Tile> order = set;
    std::stable_sort(order.begin(), order.end(),
                     [](const Tile& x, const Tile& y) { return x.scale() < y.scale(); });
    const TileIndex idx(set);
    std::map<Tile, int> up;
    for (const auto& P : order) {
        int best = 0;
        idx.for_each_over(P.time, false, [&](const Tile& Q) {
            if (lneq(P, Q))
                best = std::max(best, up.at(Q) + 1);
        });
        up[P] = best;
    }
    return up;
}

/// Longest strictly descending chain below each tile inside `set`.
inline std::map<Tile, int> chain_below(const std::vector<Tile>& set)
{
    std::vector<Tile> order = set;
    std::stable_sort(order.begin(), order.end(),
                     [](const Tile& x, const Tile& y) { return x.scale() > y.scale(); });
    const TileIndex idx(set);
    std::map<Tile, int> down;
    for (const auto& P : set)
        down[P] = 0;
    for (const auto& Q : order)
        idx.for_each_over(Q.time, false, [&](const Tile& P) {
            if (lneq(Q, P))
                down[P] = std::max(down[P], down.at(Q) + 1);
        });
    return down;
}

/// Layer tiles by a chain-length map; no two comparable tiles share a layer.
inline std::vector<std::vector<Tile>> layers_by(const std::vector<Tile>& set, const std::map<Tile, int>& len)
{
    std::vector<std::vector<Tile>> layers;
    for (const auto& P : set) {
        const auto l = static_cast<std::size_t>(len.at(P));
        if (layers.size() <= l)
            layers.resize(l + 1);
        layers[l].push_back(P);
    }
    for (auto& l : layers)
        l = sorted_unique(l);
    return layers;
}

inline std::vector<std::vector<Tile>> antichain_layers(const std::vector<Tile>& set)
{
    return layers_by(set, chain_above(set));
}

/// Pairs (P, Q) inside one set with P <= Q and P != Q.
inline std::size_t comparable_pairs(const std::vector<Tile>& set)
{
    const TileIndex idx(set);
    std::size_t count = 0;
    for (const auto& P : set)
        idx.for_each_over(P.time, true, [&](const Tile& Q) {
            if (!(Q == P) && leq(P, Q))
                ++count;
        });
    return count;
}

// ---- strata -----------------------------------------------------------------

inline constexpr int null_stratum = std::numeric_limits<int>::max();

/// n with 2^{-n-1} < A <= 2^{-n}; null_stratum for A = 0.
inline int stratum_of(double A)
{
    if (!(A > 0))
        return null_stratum;
    if (A > 1)
        throw std::invalid_argument("stratum_of: mass above one");
    int e = 0;
    const double f = std::frexp(A, &e);
    return f == 0.5 ? 1 - e : -e;
}

struct Stratum {
    int n = 0;
    std::vector<Tile> tiles;
};

inline std::vector<Stratum> stratify(const std::vector<Tile>& tiles, const MassEngine& engine)
{
    std::map<int, std::vector<Tile>> by;
    for (const auto& P : tiles)
        by[stratum_of(engine.mass(P))].push_back(P);
    std::vector<Stratum> out;
    for (auto& [n, v] : by)
        out.push_back({n, sorted_unique(std::move(v))});
    return out;
}

inline std::vector<Tile> maximal_tiles(int n, const MassEngine& engine, const Universe& U,
                                       const std::function<bool(int)>& scale_ok = {})
{
    const double thr = std::ldexp(1.0, -n - 1);
    std::vector<Tile> cand;
    for (int k = 0; k <= U.k_max; ++k) {
        if (scale_ok && !scale_ok(k))
            continue;
        for (const auto& I : scale_partition(k))
            for (const auto& e : engine.entries(I)) {
                if (e.density < thr)
                    break;
                if (U.contains(e.tile))
                    cand.push_back(e.tile);
            }
    }
    return maximal_elements(sorted_unique(cand));
}

// ---- chain pruning ----------------------------------------------------------

struct ChainPrune {
    std::vector<Tile> kept;                  // P_n^0
    std::vector<std::vector<Tile>> layers;   // D_n by ascending chain length
    std::size_t outside_C = 0;               // |P_n \ C_n|
    std::size_t claim_violations = 0;        // P_n \ C_n not inside P_n^0
    std::size_t layer_bound_violations = 0;  // layers beyond n
};

inline ChainPrune chain_prune(const Stratum& S, const std::vector<Tile>& maximal)
{
    ChainPrune r;
    const TileIndex mx(maximal);
    const auto up = chain_above(S.tiles);
    std::vector<Tile> D;
    for (const auto& P : S.tiles) {
        const Tile P4 = P.dilated(4);
        bool in0 = false;
        mx.for_each_over(P.time, true, [&](const Tile& Q) { in0 = in0 || trianglelefteq(P4, Q); });
        const bool outside = up.at(P) >= S.n;
        r.outside_C += outside;
        if (in0)
            r.kept.push_back(P);
        else {
            D.push_back(P);
            r.claim_violations += outside;
        }
    }
    r.layers = antichain_layers(D);
    if (r.layers.size() > static_cast<std::size_t>(S.n))
        r.layer_bound_violations = r.layers.size() - static_cast<std::size_t>(S.n);
    return r;
}

// ---- counting function and exceptional set ----------------------------------

struct Counting {
    int grid_scale = 0;
    std::vector<int> N;  // per cell of the scale-grid_scale grid
    std::vector<bool> G;
    double threshold = 0.0;
    double N_l1 = 0.0;
    double sum_lengths = 0.0;
    double G_measure = 0.0;
    double C = 0.0;  // |G_n| 2^n K

    bool interval_in_G(const DyadicInterval& I) const
    {
        const int s = grid_scale - I.scale;
        const std::int64_t lo = I.index << s, hi = (I.index + 1) << s;
        for (std::int64_t c = lo; c < hi; ++c)
            if (!G[static_cast<std::size_t>(c)])
                return false;
        return true;
    }

    IntervalSet G_set() const
    {
        std::vector<RealInterval> parts;
        const double h = std::ldexp(1.0, -grid_scale);
        for (std::size_t c = 0; c < G.size(); ++c)
            if (G[c])
                parts.push_back({c * h, (c + 1) * h});
        return IntervalSet(parts);
    }
};

inline Counting counting_exceptional(const std::vector<Tile>& maximal, int n, double K, int grid_scale)
{
    if (!(K > 0))
        throw std::invalid_argument("counting_exceptional: K must be positive");
    Counting c;
    c.grid_scale = grid_scale;
    const std::size_t cells = std::size_t{1} << grid_scale;
    c.N.assign(cells, 0);
    for (const auto& P : maximal) {
        if (P.scale() > grid_scale)
            throw std::invalid_argument("counting_exceptional: tile finer than the grid");
        const int s = grid_scale - P.scale();
        for (std::int64_t i = P.time.index << s; i < (P.time.index + 1) << s; ++i)
            ++c.N[static_cast<std::size_t>(i)];
        c.sum_lengths += P.time.length();
    }
    c.threshold = std::ldexp(K, 2 * n);
    const double h = std::ldexp(1.0, -grid_scale);
    c.G.assign(cells, false);
    for (std::size_t i = 0; i < cells; ++i) {
        c.N_l1 += c.N[i] * h;
        if (c.N[i] > c.threshold) {
            c.G[i] = true;
            c.G_measure += h;
        }
    }
    c.C = c.G_measure * std::ldexp(K, n);
    return c;
}

// ---- trees, forests, rows ---------------------------------------------------

struct Tree {
    Top top;
    std::vector<Tile> members;  // sorted; excludes the top tiles
};

struct TreeCheck {
    bool ok = true;
    std::vector<std::string> failures;

    void fail(std::string s)
    {
        ok = false;
        if (failures.size() < 8)
            failures.push_back(std::move(s));
    }
};

inline std::string tile_str(const Tile& P)
{
    return "[k=" + std::to_string(P.scale()) + " j=" + std::to_string(P.time.index) +
           " p=" + std::to_string(P.alpha.index) + " q=" + std::to_string(P.omega.index) + "]";
}

/// Def. 4: (1) (3/2)P <= top, (2) brother closure, (3) convexity. (2) and (3)
/// range over the ambient universe; top tiles may be left out of the members.
inline TreeCheck validate_tree(const Tree& T, const Universe& U, const std::function<bool(int)>& scale_ok = {})
{
    auto ambient = [&](const Tile& P) { return U.contains(P) && (!scale_ok || scale_ok(P.scale())); };
    TreeCheck c;
    if (auto tc = check_top(T.top.tiles); !tc.ok)
        c.fail("top: " + tc.reason);
    if (!std::is_sorted(T.members.begin(), T.members.end()))
        c.fail("members not sorted");
    auto in_tree = [&](const Tile& P) { return contains_tile(T.members, P); };
    auto in_top = [&](const Tile& P) {
        return std::find(T.top.tiles.begin(), T.top.tiles.end(), P) != T.top.tiles.end();
    };
    for (const auto& P : T.members) {
        if (!top_leq(P.dilated(1.5), T.top))
            c.fail("(1) " + tile_str(P) + " not below the top");
        const auto br = brothers(P);
        for (const Tile& B : {br.upper, br.lower}) {
            if (!ambient(B) || in_tree(B) || in_top(B))
                continue;
            if (top_leq(B.dilated(1.5), T.top))
                c.fail("(2) brother " + tile_str(B) + " of " + tile_str(P) + " missing");
        }
    }
    // convexity: a universe tile above some member and below another
    const TileIndex idx(T.members);
    std::set<IntervalKey> seen;
    for (const auto& P1 : T.members)
        for (int s = P1.scale() - 1; s >= 0; --s) {
            const DyadicInterval J = P1.time.ancestor(s);
            if (scale_ok && !scale_ok(s))
                continue;
            if (!seen.insert(key_of(J)).second)
                continue;
            const double w = std::ldexp(1.0, J.scale);
            for (std::int64_t p = static_cast<std::int64_t>(std::floor(U.f0 / w));
                 p < static_cast<std::int64_t>(std::ceil(U.f1 / w)); ++p)
                for (std::int64_t q = static_cast<std::int64_t>(std::floor(U.f0 / w));
                     q < static_cast<std::int64_t>(std::ceil(U.f1 / w)); ++q) {
                    const Tile P = Tile::at(J.scale, J.index, p, q);
                    if (in_tree(P) || in_top(P))
                        continue;
                    bool below = false, above = false;
                    idx.for_each_over(P.time, false, [&](const Tile& Q) { above = above || leq(P, Q); });
                    if (!above)
                        continue;
                    for (const auto& Q : T.members)
                        if (Q.time.subset_of(P.time) && Q.scale() > P.scale() && leq(Q, P)) {
                            below = true;
                            break;
                        }
                    if (below)
                        c.fail("(3) " + tile_str(P) + " between members");
                }
        }
    return c;
}

struct Forest {
    std::vector<Tree> trees;
    double delta = 1.0;
    double K = 1.0;
};

/// Prop. 2 hypotheses: (1) mass <= delta, (2) 2P not below 2top_k across trees,
/// (3) no point in more than K delta^-2 top intervals.
inline TreeCheck validate_forest(const Forest& F, const std::function<double(const Tile&)>& mass_of)
{
    TreeCheck c;
    for (std::size_t j = 0; j < F.trees.size(); ++j)
        for (const auto& P : F.trees[j].members)
            if (mass_of(P) > F.delta)
                c.fail("(1) mass of " + tile_str(P) + " exceeds delta");
    std::vector<Top> tops2;
    for (const auto& T : F.trees) {
        Top t2 = T.top;
        for (auto& x : t2.tiles)
            x = x.dilated(2);
        tops2.push_back(std::move(t2));
    }
    for (std::size_t j = 0; j < F.trees.size(); ++j)
        for (const auto& P : F.trees[j].members) {
            const Tile P2 = P.dilated(2);
            for (std::size_t k = 0; k < F.trees.size(); ++k)
                if (k != j && P.time.subset_of(tops2[k].rep().time) && top_leq(P2, tops2[k]))
                    c.fail("(2) " + tile_str(P) + " of tree " + std::to_string(j) + " under top " +
                           std::to_string(k));
        }
    std::map<IntervalKey, int> cover;
    int finest = 0;
    for (const auto& T : F.trees)
        finest = std::max(finest, T.top.rep().scale());
    std::vector<int> hits(std::size_t{1} << finest, 0);
    for (const auto& T : F.trees) {
        const auto& I = T.top.rep().time;
        const int s = finest - I.scale;
        for (std::int64_t i = I.index << s; i < (I.index + 1) << s; ++i)
            ++hits[static_cast<std::size_t>(i)];
    }
    const double bound = F.K / (F.delta * F.delta);
    for (int h : hits)
        if (h > bound) {
            c.fail("(3) a point lies in " + std::to_string(h) + " top intervals");
            break;
        }
    return c;
}

/// Def. 5.
inline bool validate_separation(const Tree& T1, const Tree& T2, double delta)
{
    const Tile& P1 = T1.top.rep();
    const Tile& P2 = T2.top.rep();
    if (P1.time.disjoint_from(P2.time))
        return true;
    auto side = [&](const Tree& A, const Tile& B) {
        for (const auto& P : A.members)
            if (P.time.subset_of(B.time) && !(bracket(delta_value(P, B)) < delta))
                return false;
        return true;
    };
    return side(T1, P2) && side(T2, P1);
}

/// Def. 6 for one member against the top interval I0.
inline bool is_normal_tile(const Tile& P, const DyadicInterval& I0, double delta, double K)
{
    const double r = std::pow(delta, 100) / K * I0.length();
    const double d = std::min(P.xl() - I0.left(), I0.right() - P.xr());
    return P.time.length() <= r && d > 20 * r;
}

inline TreeCheck validate_row(const std::vector<Tree>& row, double delta, double K)
{
    TreeCheck c;
    for (std::size_t i = 0; i < row.size(); ++i) {
        for (const auto& P : row[i].members)
            if (!is_normal_tile(P, row[i].top.rep().time, delta, K))
                c.fail("Def. 6: " + tile_str(P) + " not normal");
        for (std::size_t j = i + 1; j < row.size(); ++j)
            if (!row[i].top.rep().time.disjoint_from(row[j].top.rep().time))
                c.fail("Def. 7: tops " + std::to_string(i) + " and " + std::to_string(j) + " overlap");
    }
    return c;
}

struct RowsResult {
    long M = 0;                                 // chain length log2(K^100 delta^-100)
    std::vector<std::vector<Tile>> plus_layers;   // P+ by chain length above
    std::vector<std::vector<Tile>> minus_layers;  // P- by chain length below
    std::vector<Tile> boundary;                 // P^C: I inside F_j
    std::vector<Tree> normal;                   // per input tree, P^N
    std::vector<std::vector<std::size_t>> rows;  // indices into `normal`
    IntervalSet F;
    double F_measure = 0.0;
    double F_constant = 0.0;  // |F| K / delta^50
    std::size_t normality_violations = 0;
    std::size_t peel_bound_violations = 0;
};

/// Removes P+ and P-, trims each tree to its normal part, and peels the top
/// intervals into rows (one copy of each maximal interval per round).
inline RowsResult rows_and_normalize(const Forest& forest, std::optional<long> M_override = std::nullopt)
{
    const double delta = forest.delta, K = forest.K;
    RowsResult r;
    r.M = M_override ? *M_override
                     : static_cast<long>(std::ceil(100 * std::log2(K) - 100 * std::log2(delta)));

    std::vector<Tile> all;
    for (const auto& T : forest.trees)
        all.insert(all.end(), T.members.begin(), T.members.end());
    all = sorted_unique(all);
    const auto up = chain_above(all), down = chain_below(all);
    std::vector<Tile> plus, minus;
    for (const auto& P : all) {
        if (up.at(P) < r.M)
            plus.push_back(P);
        else if (down.at(P) < r.M)
            minus.push_back(P);
    }
    r.plus_layers = layers_by(plus, up);
    r.minus_layers = layers_by(minus, down);

    const double band = 100 * std::pow(delta, 100) / (K * K);
    std::vector<RealInterval> fparts;
    for (const auto& T : forest.trees) {
        const auto& I = T.top.rep().time;
        const double w = std::min(band * I.length(), 0.5 * I.length());
        fparts.push_back({I.left(), I.left() + w});
        fparts.push_back({I.right() - w, I.right()});
    }
    r.F = IntervalSet(fparts);
    r.F_measure = r.F.measure();
    r.F_constant = r.F_measure * K / std::pow(delta, 50);

    for (const auto& T : forest.trees) {
        Tree N{T.top, {}};
        const auto& I0 = T.top.rep().time;
        const double w = std::min(band * I0.length(), 0.5 * I0.length());
        for (const auto& P : T.members) {
            if (contains_tile(plus, P) || contains_tile(minus, P))
                continue;
            const bool in_F = P.xr() <= I0.left() + w || P.xl() >= I0.right() - w;
            if (in_F) {
                r.boundary.push_back(P);
                continue;
            }
            N.members.push_back(P);
            r.normality_violations += !is_normal_tile(P, I0, delta, K);
        }
        r.normal.push_back(std::move(N));
    }
    r.boundary = sorted_unique(r.boundary);

    std::vector<std::size_t> pending(forest.trees.size());
    std::iota(pending.begin(), pending.end(), 0);
    while (!pending.empty()) {
        std::vector<std::size_t> row, rest;
        for (std::size_t t : pending) {
            const auto& I = forest.trees[t].top.rep().time;
            bool taken = false;
            for (std::size_t u : pending)
                if (u != t && forest.trees[u].top.rep().time.scale < I.scale &&
                    I.subset_of(forest.trees[u].top.rep().time))
                    taken = true;
            for (std::size_t u : row)
                if (forest.trees[u].top.rep().time == I)
                    taken = true;
            (taken ? rest : row).push_back(t);
        }
        r.rows.push_back(std::move(row));
        pending = std::move(rest);
    }
    const double rounds = std::ceil(K / (delta * delta));
    if (static_cast<double>(r.rows.size()) > rounds)
        r.peel_bound_violations = r.rows.size();
    return r;
}

// ---- forest splitting and tree assembly -------------------------------------

struct TreeAssembly {
    std::vector<Tile> maximal;                 // P^r of 4P_nj
    std::vector<Tile> empty_S;                 // P^k with S_k empty (one antichain)
    std::vector<Tile> tops;                    // deleted top tiles
    std::vector<Tile> minimal;                 // deleted S^min parts
    std::vector<Tree> trees;
    std::size_t max_orbit = 0;
    std::size_t orbit_violations = 0;          // orbits above 4
    std::size_t step3_violations = 0;
};

struct BucketReport {
    int j = 0;
    std::vector<Tile> tiles;  // P_nj
    std::vector<Tile> A1, A2, B;
    std::vector<std::vector<Tile>> A1_layers, A2_layers;
    std::size_t A_chain_pairs = 0;  // comparable pairs inside one layer (must be 0)
    TreeAssembly assembly;
};

struct ForestSplit {
    long M = 0;  // 2n log2 K
    double B_cap = 0.0;  // 2^{2n} K, the bound N(x) gives off G_n
    std::map<Tile, int> B;  // B(P)
    std::vector<BucketReport> buckets;
    std::size_t B_bound_violations = 0;
};

/// Steps 1-5: maximal P^r in 4P_nj, then S_k, closure of ∝, tops, S^min.
inline TreeAssembly tree_assembly(const std::vector<Tile>& B_nj, const std::vector<Tile>& maximal)
{
    TreeAssembly a;
    a.maximal = maximal;
    const std::size_t s = maximal.size();
    std::vector<std::vector<Tile>> S(s);
    const TileIndex mx(maximal);
    for (const auto& P : B_nj) {
        const Tile P32 = P.dilated(1.5);
        for (std::size_t k = 0; k < s; ++k)
            if (lneq(P32, maximal[k]))
                S[k].push_back(P);
    }
    std::vector<std::size_t> live;
    for (std::size_t k = 0; k < s; ++k) {
        if (S[k].empty())
            a.empty_S.push_back(maximal[k]);
        else
            live.push_back(k);
    }
    // union-find over the live k
    std::vector<std::size_t> parent(s);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
        return parent[x] == x ? x : parent[x] = find(parent[x]);
    };
    auto unite = [&](std::size_t x, std::size_t y) {
        x = find(x);
        y = find(y);
        if (x != y)
            parent[std::max(x, y)] = std::min(x, y);
    };
    std::map<Tile, std::vector<std::size_t>> owners;  // tile -> k with tile in S̄_k
    for (std::size_t k : live) {
        for (const auto& P : S[k])
            owners[P].push_back(k);
        owners[maximal[k]].push_back(k);
    }
    std::vector<Tile> members;
    for (const auto& [P, ks] : owners) {
        members.push_back(P);
        for (std::size_t k : ks)
            unite(ks.front(), k);
    }
    const TileIndex midx(members);
    for (const auto& P1 : members) {
        const Tile P2x = P1.dilated(2);
        midx.for_each_over(P1.time, true, [&](const Tile& Q) {
            if (Q == P1 || !leq(P2x, Q.dilated(2)))
                return;
            unite(owners.at(P1).front(), owners.at(Q).front());
        });
    }
    std::map<std::size_t, std::vector<std::size_t>> orbits;
    for (std::size_t k : live)
        orbits[find(k)].push_back(k);
    for (const auto& [root, ks] : orbits) {
        a.max_orbit = std::max(a.max_orbit, ks.size());
        a.orbit_violations += ks.size() > 4;
        std::vector<Tile> top_tiles, hat;
        for (std::size_t k : ks) {
            top_tiles.push_back(maximal[k]);
            hat.insert(hat.end(), S[k].begin(), S[k].end());
        }
        top_tiles = sorted_unique(top_tiles);
        hat = sorted_unique(hat);
        std::vector<Tile> body;
        for (const auto& P : hat)
            if (!contains_tile(top_tiles, P))
                body.push_back(P);
        // S^min: intervals finest among the overlapping ones
        std::vector<Tile> kept, mins;
        for (const auto& P : body) {
            bool minimal = true;
            for (const auto& Q : body)
                if (!Q.time.disjoint_from(P.time) && !P.time.subset_of(Q.time)) {
                    minimal = false;
                    break;
                }
            (minimal ? mins : kept).push_back(P);
        }
        a.tops.insert(a.tops.end(), top_tiles.begin(), top_tiles.end());
        a.minimal.insert(a.minimal.end(), mins.begin(), mins.end());
        if (kept.empty())
            continue;
        Tree T;
        T.top.tiles = top_tiles;
        T.top.representative = pick_representative(top_tiles);
        T.members = std::move(kept);
        a.trees.push_back(std::move(T));
    }
    a.empty_S = sorted_unique(a.empty_S);
    a.tops = sorted_unique(a.tops);
    a.minimal = sorted_unique(a.minimal);
    return a;
}

inline ForestSplit forest_split(const std::vector<Tile>& P_nG, const std::vector<Tile>& maximal, int n, double K)
{
    ForestSplit fs;
    fs.M = static_cast<long>(std::ceil(2.0 * n * std::log2(K)));
    fs.B_cap = std::ldexp(K, 2 * n);
    const TileIndex mx(maximal);
    std::map<int, std::vector<Tile>> by;
    for (const auto& P : P_nG) {
        const Tile P4 = P.dilated(4);
        int b = 0;
        mx.for_each_over(P.time, true, [&](const Tile& Q) { b += trianglelefteq(P4, Q); });
        fs.B[P] = b;
        if (b < 1 || b > fs.B_cap)
            ++fs.B_bound_violations;
        by[b < 1 ? -1 : static_cast<int>(std::floor(std::log2(b)))].push_back(P);
    }
    for (auto& [j, tiles] : by) {
        BucketReport br;
        br.j = j;
        br.tiles = sorted_unique(tiles);
        const auto top = maximal_elements(br.tiles, 4.0);
        // step 3 claim
        for (const auto& P : br.tiles) {
            const Tile P4 = P.dilated(4);
            std::vector<Tile> hits;
            for (const auto& Q : top)
                if (trianglelefteq(P4, Q.dilated(4)))
                    hits.push_back(Q.dilated(4));
            for (std::size_t x = 0; x < hits.size(); ++x)
                for (std::size_t y = x + 1; y < hits.size(); ++y)
                    if (!(leq(hits[x], hits[y]) && leq(hits[y], hits[x])))
                        ++br.assembly.step3_violations;
        }
        for (const auto& P : br.tiles) {
            const Tile P32 = P.dilated(1.5);
            bool any = false, a2 = false;
            for (const auto& Q : top)
                if (leq(P32, Q)) {
                    any = true;
                    a2 = a2 || P.time.length() == Q.time.length();
                }
            const bool is_top = contains_tile(top, P);
            if (!any)
                br.A1.push_back(P);
            else if (a2 && !is_top)
                br.A2.push_back(P);
            else
                br.B.push_back(P);
        }
        br.A1_layers = antichain_layers(br.A1);
        br.A2_layers = antichain_layers(br.A2);
        for (const auto* layers : {&br.A1_layers, &br.A2_layers})
            for (const auto& l : *layers)
                br.A_chain_pairs += comparable_pairs(l);
        const std::size_t step3 = br.assembly.step3_violations;
        br.assembly = tree_assembly(br.B, top);
        br.assembly.step3_violations = step3;
        fs.buckets.push_back(std::move(br));
    }
    return fs;
}

// ---- pipeline ---------------------------------------------------------------

struct DecomposeConfig {
    int k_max = 8;
    double f0 = 0.0, f1 = 64.0;
    double K = 16.0;
    MassConfig mass{};
    int scale_spacing = 10;  // families of scales congruent mod spacing
    std::optional<long> row_chain_override;  // replaces M = log2(K^100 delta^-100)
};

struct StratumReport {
    int family = 0;
    int n = 0;
    std::vector<Tile> tiles;
    std::vector<Tile> maximal;
    double sum_E_maximal = 0.0;
    ChainPrune prune;
    Counting counting;
    std::vector<Tile> exceptional;  // P_n^0 with I inside G_n
    std::vector<Tile> maximal_kept;
    ForestSplit split;
    Forest forest;  // all trees of the stratum, bucket by bucket
    std::vector<std::size_t> forest_bucket;  // bucket j of each tree
    std::vector<TreeCheck> tree_checks;
    TreeCheck forest_check;
    RowsResult rows;
    std::vector<TreeCheck> row_checks;
};

struct DecompositionReport {
    Universe universe;
    DecomposeConfig config;
    std::size_t n_x = 0;
    std::string generator;
    std::uint64_t seed = 0;
    std::vector<StratumReport> strata;
    std::vector<Tile> null_tiles;              // mass 0 within their family
    std::map<std::string, std::size_t> buckets;  // terminal bucket -> size
    std::size_t assigned = 0;
    std::size_t duplicates = 0;
    bool conserved = false;

    bool all_valid() const
    {
        for (const auto& s : strata) {
            for (const auto& c : s.tree_checks)
                if (!c.ok)
                    return false;
            if (!s.forest_check.ok)
                return false;
            for (const auto& c : s.row_checks)
                if (!c.ok)
                    return false;
            if (s.rows.peel_bound_violations)
                return false;
            if (s.counting.C > 2.0 || s.sum_E_maximal > 1.0 + 1e-12)
                return false;
        }
        return conserved;
    }
};

inline DecompositionReport decompose(const LineField& L, const DecomposeConfig& cfg)
{
    DecompositionReport R;
    R.universe = make_universe(cfg.k_max, cfg.f0, cfg.f1);
    R.config = cfg;
    R.n_x = L.n;
    R.generator = L.generator;
    R.seed = L.seed;
    const MassEngine engine(L, cfg.mass, cfg.k_max);
    if (cfg.scale_spacing < 1)
        throw std::invalid_argument("decompose: scale spacing must be positive");

    std::map<Tile, std::string> where;
    auto assign = [&](const std::vector<Tile>& v, const std::string& label) {
        for (const auto& P : v) {
            if (!where.emplace(P, label).second)
                ++R.duplicates;
            ++R.buckets[label];
        }
    };

    for (int fam = 0; fam < std::min(cfg.scale_spacing, cfg.k_max + 1); ++fam) {
        const auto scale_ok = [&](int k) { return k % cfg.scale_spacing == fam; };
        std::map<Tile, double> masses;
        std::map<int, std::vector<Tile>> by;
        for (const auto& P : R.universe.tiles)
            if (scale_ok(P.scale())) {
                masses[P] = engine.mass(P, scale_ok);
                by[stratum_of(masses[P])].push_back(P);
            }
        auto mass_of = [&](const Tile& P) { return masses.at(P); };
        const std::string ftag = "f" + std::to_string(fam);

        for (auto& [n, tiles] : by) {
            if (n == null_stratum) {
                R.null_tiles.insert(R.null_tiles.end(), tiles.begin(), tiles.end());
                assign(tiles, ftag + "/null");
                continue;
            }
            StratumReport S;
            S.family = fam;
            S.n = n;
            S.tiles = tiles;
            const std::string tag = ftag + "/n" + std::to_string(n);
            S.maximal = maximal_tiles(n, engine, R.universe, scale_ok);
            for (const auto& P : S.maximal)
                S.sum_E_maximal += engine.density_of(P) * P.time.length();
            S.prune = chain_prune({n, tiles}, S.maximal);
            for (std::size_t l = 0; l < S.prune.layers.size(); ++l)
                assign(S.prune.layers[l], tag + "/D/layer" + std::to_string(l));

            S.counting = counting_exceptional(S.maximal, n, cfg.K, cfg.k_max);
            std::vector<Tile> PG;
            for (const auto& P : S.prune.kept)
                (S.counting.interval_in_G(P.time) ? S.exceptional : PG).push_back(P);
            assign(S.exceptional, tag + "/G");
            for (const auto& P : S.maximal)
                if (!S.counting.interval_in_G(P.time))
                    S.maximal_kept.push_back(P);

            S.split = forest_split(PG, S.maximal_kept, n, cfg.K);
            S.forest.delta = std::ldexp(1.0, -n);
            S.forest.K = cfg.K;
            for (std::size_t b = 0; b < S.split.buckets.size(); ++b) {
                const auto& br = S.split.buckets[b];
                const std::string bt = tag + "/j" + std::to_string(br.j);
                for (std::size_t l = 0; l < br.A1_layers.size(); ++l)
                    assign(br.A1_layers[l], bt + "/A1/layer" + std::to_string(l));
                for (std::size_t l = 0; l < br.A2_layers.size(); ++l)
                    assign(br.A2_layers[l], bt + "/A2/layer" + std::to_string(l));
                assign(br.assembly.empty_S, bt + "/emptyS");
                assign(br.assembly.tops, bt + "/top");
                assign(br.assembly.minimal, bt + "/min");
                for (const auto& T : br.assembly.trees) {
                    S.forest.trees.push_back(T);
                    S.forest_bucket.push_back(b);
                    S.tree_checks.push_back(validate_tree(T, R.universe, scale_ok));
                }
            }
            S.forest_check = validate_forest(S.forest, mass_of);
            S.rows = rows_and_normalize(S.forest, cfg.row_chain_override);
            for (std::size_t l = 0; l < S.rows.plus_layers.size(); ++l)
                assign(S.rows.plus_layers[l], tag + "/plus/layer" + std::to_string(l));
            for (std::size_t l = 0; l < S.rows.minus_layers.size(); ++l)
                assign(S.rows.minus_layers[l], tag + "/minus/layer" + std::to_string(l));
            assign(S.rows.boundary, tag + "/boundary");
            for (std::size_t r = 0; r < S.rows.rows.size(); ++r) {
                std::vector<Tree> row;
                for (std::size_t t : S.rows.rows[r]) {
                    row.push_back(S.rows.normal[t]);
                    assign(S.rows.normal[t].members,
                           tag + "/row" + std::to_string(r) + "/tree" + std::to_string(t));
                }
                S.row_checks.push_back(validate_row(row, S.forest.delta, S.forest.K));
            }
            R.strata.push_back(std::move(S));
        }
    }
    R.null_tiles = sorted_unique(R.null_tiles);
    R.assigned = where.size();
    R.conserved = R.duplicates == 0 && R.assigned == R.universe.tiles.size();
    return R;
}

}  // namespace qc
