#include <gtest/gtest.h>

#include <random>

#include "qcarleson/decompose.hpp"

using namespace qc;

namespace {

// Universe tiles at scales [k0, k1] over I0 with (3/2)P strictly below top.
std::vector<Tile> brute_tree(const Universe& U, const Tile& top, int k0, int k1)
{
    std::vector<Tile> out;
    for (const auto& P : U.tiles)
        if (P.scale() >= k0 && P.scale() <= k1 && P.time.subset_of(top.time) && lneq(P.dilated(1.5), top))
            out.push_back(P);
    return out;
}

Tree planted_tree(const Universe& U, const Tile& top)
{
    auto a = tree_assembly(sorted_unique([&] {
                               auto v = brute_tree(U, top, top.scale() + 1, top.scale() + 4);
                               v.push_back(top);
                               return v;
                           }()),
                           {top});
    return a.trees.at(0);
}

Tree bare_tree(const Tile& top) { return {make_top({top}), {}}; }

DecomposeConfig window(int k_max, double f1)
{
    DecomposeConfig c;
    c.k_max = k_max;
    c.f1 = f1;
    return c;
}

}  // namespace

TEST(Decompose, Universe)
{
    const auto U = make_universe(8, 0, 64);
    std::size_t expect = 0;
    for (int k = 0; k <= 8; ++k) {
        const std::size_t rows = (64 + (std::size_t{1} << k) - 1) >> k;
        expect += (std::size_t{1} << k) * rows * rows;
    }
    EXPECT_EQ(U.tiles.size(), expect);
    EXPECT_TRUE(std::is_sorted(U.tiles.begin(), U.tiles.end()));
    EXPECT_TRUE(U.contains(Tile::at(0, 0, 63, 0)));
    EXPECT_FALSE(U.contains(Tile::at(0, 0, 64, 0)));
    EXPECT_FALSE(U.contains(Tile::at(9, 0, 0, 0)));
    EXPECT_FALSE(U.contains(Tile::at(0, 0, 0, 0, 2.0)));
}

TEST(Decompose, StratumBands)
{
    EXPECT_EQ(stratum_of(1.0), 0);
    EXPECT_EQ(stratum_of(0.75), 0);
    EXPECT_EQ(stratum_of(0.5), 1);
    EXPECT_EQ(stratum_of(0.5000001), 0);
    EXPECT_EQ(stratum_of(std::ldexp(1.0, -7)), 7);
    EXPECT_EQ(stratum_of(0.0), null_stratum);
    EXPECT_THROW(stratum_of(1.5), std::invalid_argument);
    for (double A = 1.0; A > 1e-6; A *= 0.77) {
        const int n = stratum_of(A);
        EXPECT_TRUE(std::ldexp(1.0, -n - 1) < A && A <= std::ldexp(1.0, -n)) << A;
    }
}

TEST(Decompose, StratifyExamples)
{
    const Line l{20.3, 3.1};
    const auto L = constant_field(256, l);
    const MassEngine E(L, {}, 6);
    std::vector<Tile> full;
    for (int k = 0; k <= 6; ++k)
        for (const auto& I : scale_partition(k))
            full.push_back(tile_of_line(l, I));
    const auto S = stratify(full, E);
    ASSERT_EQ(S.size(), 1u);
    EXPECT_EQ(S[0].n, 0);
    EXPECT_EQ(S[0].tiles.size(), full.size());

    const auto far = constant_field(256, {1e6, 0});
    const MassEngine F(far, {}, 6);
    const auto U = make_universe(4, 0, 16);
    const auto S2 = stratify(U.tiles, F);
    ASSERT_EQ(S2.size(), 1u);
    EXPECT_EQ(S2[0].n, null_stratum);

    const auto R = decompose(far, window(4, 16));
    EXPECT_TRUE(R.strata.empty());
    EXPECT_EQ(R.null_tiles.size(), R.universe.tiles.size());
    EXPECT_TRUE(R.conserved);
}

TEST(Decompose, MaximalTiles)
{
    const auto U = make_universe(3, 0, 16);
    const Line l{5.5, 0.0};
    const auto L = constant_field(64, l);
    const MassEngine E(L, {}, 3);
    const auto only0 = [](int k) { return k == 0; };
    const auto m0 = maximal_tiles(0, E, U, only0);
    ASSERT_EQ(m0.size(), 1u);
    EXPECT_EQ(m0[0], tile_of_line(l, DyadicInterval(0, 0)));
    // a chain of qualifying tiles keeps only the top one
    const auto m = maximal_tiles(0, E, U);
    ASSERT_EQ(m.size(), 1u);
    EXPECT_EQ(m[0].scale(), 0);

    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto Lr = piecewise_random_field(256, 16, 0, 16, seed);
        const MassEngine Er(Lr, {}, 3);
        for (int n = 0; n < 6; ++n) {
            const auto mx = maximal_tiles(n, Er, U);
            std::vector<int> hit(Lr.n, 0);
            double sum = 0;
            for (const auto& P : mx) {
                EXPECT_GE(density(P, Lr), std::ldexp(1.0, -n - 1));
                for (auto i : E_cells(P, Lr))
                    ++hit[i];
                sum += measure_E(P, Lr);
            }
            EXPECT_LE(*std::max_element(hit.begin(), hit.end()), 1) << "E(Pbar) overlap";
            EXPECT_LE(sum, 1.0 + 1e-12);
        }
    }
}

TEST(Decompose, ChainLayers)
{
    const std::vector<Tile> anti{Tile::at(2, 0, 0, 0), Tile::at(2, 1, 0, 0), Tile::at(2, 0, 3, 3)};
    EXPECT_EQ(antichain_layers(anti).size(), 1u);

    // chain of length 3 above the bottom tile
    const Line l{4.5, 0.0};
    std::vector<Tile> chain;
    for (int k = 0; k <= 3; ++k)
        chain.push_back(tile_of_line(l, DyadicInterval(k, 0)));
    const auto up = chain_above(chain), down = chain_below(chain);
    EXPECT_EQ(up.at(chain[3]), 3);
    EXPECT_EQ(up.at(chain[0]), 0);
    EXPECT_EQ(down.at(chain[0]), 3);
    const Stratum S{3, sorted_unique(chain)};
    const auto cp = chain_prune(S, {chain[0]});
    EXPECT_EQ(cp.outside_C, 1u);  // only the bottom has a chain of length 3 above
}

TEST(Decompose, ChainPruneOnInstances)
{
    const auto U = make_universe(8, 0, 64);
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const auto L = piecewise_random_field(1024, 32, 0, 64, 500 + seed);
        const MassEngine E(L, {}, 8);
        for (int spacing : {1, 10}) {
            const auto ok = [&](int k) { return k % spacing == 0; };
            std::vector<Tile> fam;
            for (const auto& P : U.tiles)
                if (ok(P.scale()))
                    fam.push_back(P);
            std::map<int, std::vector<Tile>> by;
            for (const auto& P : fam)
                by[stratum_of(E.mass(P, ok))].push_back(P);
            for (const auto& [n, tiles] : by) {
                if (n == null_stratum)
                    continue;
                const auto mx = maximal_tiles(n, E, U, ok);
                const auto cp = chain_prune({n, tiles}, mx);
                for (const auto& layer : cp.layers)
                    EXPECT_EQ(comparable_pairs(layer), 0u);
                if (n >= 1) {
                    EXPECT_EQ(cp.claim_violations, 0u) << "n=" << n;
                    EXPECT_LE(cp.layers.size(), static_cast<std::size_t>(n));
                }
            }
        }
    }
}

// With n = 0 the chain condition is vacuous and a tile two rows below a full
// tile has mass 1 (their doubles touch) without 4P ⊴ Pbar.
TEST(Decompose, ChainClaimLevelZeroWitness)
{
    const auto U = make_universe(4, 0, 64);
    const auto L = piecewise_random_field(1024, 32, 0, 64, 1000);
    const MassEngine E(L, {}, 8);
    const auto only4 = [](int k) { return k == 4; };
    const Tile P = Tile::at(4, 7, 0, 0);
    EXPECT_EQ(stratum_of(E.mass(P, only4)), 0);
    const auto mx = maximal_tiles(0, E, U, only4);
    bool in0 = false;
    for (const auto& Q : mx)
        in0 = in0 || (P.time.subset_of(Q.time) && trianglelefteq(P.dilated(4), Q));
    EXPECT_FALSE(in0);
}

TEST(Decompose, Counting)
{
    const std::vector<Tile> disjoint{Tile::at(2, 0, 0, 0), Tile::at(2, 2, 0, 0), Tile::at(3, 7, 1, 1)};
    const auto c = counting_exceptional(disjoint, 0, 1.0, 4);
    EXPECT_EQ(*std::max_element(c.N.begin(), c.N.end()), 1);
    EXPECT_EQ(c.G_measure, 0.0);
    EXPECT_DOUBLE_EQ(c.N_l1, 0.25 + 0.25 + 0.125);
    EXPECT_DOUBLE_EQ(c.N_l1, c.sum_lengths);

    const Tile T = Tile::at(2, 1, 0, 0);
    const auto g = counting_exceptional({T, T.dilated(1.0), Tile::at(2, 1, 3, 3)}, 0, 2.0, 4);
    EXPECT_DOUBLE_EQ(g.G_measure, 0.25);
    EXPECT_TRUE(g.interval_in_G(T.time));
    EXPECT_FALSE(g.interval_in_G(DyadicInterval(1, 0)));
    EXPECT_DOUBLE_EQ(g.G_set().measure(), 0.25);
    const auto below = counting_exceptional({T, T}, 0, 2.0, 4);
    EXPECT_EQ(below.G_measure, 0.0);

    EXPECT_THROW(counting_exceptional({}, 0, 0.0, 4), std::invalid_argument);
    EXPECT_THROW(counting_exceptional({Tile::at(5, 0, 0, 0)}, 0, 1.0, 4), std::invalid_argument);
}

TEST(Decompose, ForestSplitSingleAncestor)
{
    const auto U = make_universe(4, 0, 16);
    const Tile top = Tile::at(0, 0, 8, 8);
    std::vector<Tile> P;
    for (const auto& Q : U.tiles)
        if (trianglelefteq(Q.dilated(4), top))
            P.push_back(Q);
    ASSERT_FALSE(P.empty());
    const auto fs = forest_split(P, {top}, 1, 16.0);
    ASSERT_EQ(fs.buckets.size(), 1u);
    EXPECT_EQ(fs.buckets[0].j, 0);
    EXPECT_EQ(fs.buckets[0].tiles.size(), P.size());
    EXPECT_EQ(fs.B_bound_violations, 0u);
    const auto& b = fs.buckets[0];
    EXPECT_EQ(b.A1.size() + b.A2.size() + b.B.size(), b.tiles.size());
    EXPECT_EQ(b.A_chain_pairs, 0u);
    EXPECT_EQ(b.assembly.step3_violations, 0u);
}

TEST(Decompose, PlantedTreeRecovered)
{
    const auto U = make_universe(5, 0, 32);
    const Tile top = tile_of_line({12.5, 0.0}, DyadicInterval(0, 0));
    auto body = brute_tree(U, top, 1, 4);
    auto all = body;
    all.push_back(top);
    const auto a = tree_assembly(sorted_unique(all), {top});
    ASSERT_EQ(a.trees.size(), 1u);
    EXPECT_EQ(a.max_orbit, 1u);
    EXPECT_EQ(a.tops, std::vector<Tile>{top});
    // the finest layer goes to S^min; the rest is the tree
    std::vector<Tile> expect, mins;
    for (const auto& P : body)
        (P.scale() == 4 ? mins : expect).push_back(P);
    EXPECT_EQ(a.trees[0].members, sorted_unique(expect));
    EXPECT_EQ(a.minimal, sorted_unique(mins));
    const auto chk = validate_tree(a.trees[0], U);
    EXPECT_TRUE(chk.ok) << (chk.failures.empty() ? "" : chk.failures[0]);
}

TEST(Decompose, IncomparableGivesNoTrees)
{
    const std::vector<Tile> flat{Tile::at(3, 0, 0, 0), Tile::at(3, 1, 0, 0), Tile::at(3, 2, 5, 5)};
    const auto fs = forest_split(flat, flat, 2, 16.0);
    for (const auto& b : fs.buckets)
        EXPECT_TRUE(b.assembly.trees.empty());
}

TEST(Decompose, TreeValidatorCatchesDefects)
{
    const auto U = make_universe(5, 0, 32);
    const Tile top = tile_of_line({12.5, 0.0}, DyadicInterval(0, 0));
    const Tree T = planted_tree(U, top);
    ASSERT_TRUE(validate_tree(T, U).ok);

    Tree far = T;
    far.members.push_back(Tile::at(1, 0, 0, 0));
    far.members = sorted_unique(far.members);
    EXPECT_FALSE(validate_tree(far, U).ok);

    // drop one tile whose brother stays
    bool tested = false;
    for (std::size_t i = 0; i < T.members.size() && !tested; ++i) {
        const auto br = brothers(T.members[i]);
        if (contains_tile(T.members, br.upper) || contains_tile(T.members, br.lower)) {
            Tree gap = T;
            gap.members.erase(gap.members.begin() + static_cast<std::ptrdiff_t>(i));
            EXPECT_FALSE(validate_tree(gap, U).ok);
            tested = true;
        }
    }
    EXPECT_TRUE(tested);

    // a middle-scale hole breaks convexity
    Tree hole = T;
    std::erase_if(hole.members, [](const Tile& P) { return P.scale() == 2; });
    const auto c = validate_tree(hole, U);
    EXPECT_FALSE(c.ok);
}

TEST(Decompose, OrbitSweepSparse)
{
    std::size_t instances = 0, worst = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const auto L = piecewise_random_field(64, 8, 0, 16, seed);
        const auto R = decompose(L, window(4, 16));
        ASSERT_TRUE(R.conserved);
        for (const auto& S : R.strata)
            for (const auto& b : S.split.buckets)
                worst = std::max(worst, b.assembly.max_orbit);
        ++instances;
    }
    EXPECT_EQ(instances, 1000u);
    EXPECT_LE(worst, 4u);
}

TEST(Decompose, RowsPeeling)
{
    Forest disjoint{{bare_tree(Tile::at(2, 0, 0, 0)), bare_tree(Tile::at(2, 1, 0, 0)),
                     bare_tree(Tile::at(1, 1, 0, 0))},
                    1.0,
                    16.0};
    const auto r1 = rows_and_normalize(disjoint);
    EXPECT_EQ(r1.rows.size(), 1u);

    for (int d = 1; d <= 5; ++d) {
        Forest nested{{}, 1.0, 16.0};
        for (int k = 0; k < d; ++k)
            nested.trees.push_back(bare_tree(Tile::at(k, 0, 0, 0)));
        const auto r = rows_and_normalize(nested);
        EXPECT_EQ(r.rows.size(), static_cast<std::size_t>(d));
        for (const auto& row : r.rows)
            EXPECT_EQ(row.size(), 1u);
    }

    Forest twice{{bare_tree(Tile::at(1, 0, 0, 0)), bare_tree(Tile::at(1, 0, 3, 3))}, 1.0, 16.0};
    const auto r2 = rows_and_normalize(twice);
    EXPECT_EQ(r2.rows.size(), 2u);
}

TEST(Decompose, Normality)
{
    const DyadicInterval I0(0, 0);
    // delta = 1, K = 64: |I| <= 1/64 and dist > 20/64
    for (std::int64_t j = 0; j < 64; ++j)
        EXPECT_EQ(is_normal_tile(Tile::at(6, j, 0, 0), I0, 1.0, 64.0), j >= 21 && j <= 42) << j;
    EXPECT_FALSE(is_normal_tile(Tile::at(5, 15, 0, 0), I0, 1.0, 64.0));
    EXPECT_TRUE(is_normal_tile(Tile::at(7, 60, 0, 0), I0, 1.0, 64.0));
}

TEST(Decompose, RowsRemovalLayers)
{
    const auto U = make_universe(5, 0, 32);
    const Tile top = tile_of_line({12.5, 0.0}, DyadicInterval(0, 0));
    Forest F{{planted_tree(U, top)}, 0.5, 16.0};
    const auto faithful = rows_and_normalize(F);
    EXPECT_EQ(faithful.M, 500);
    std::size_t removed = 0;
    for (const auto& l : faithful.plus_layers)
        removed += l.size();
    EXPECT_EQ(removed, F.trees[0].members.size());  // every chain is shorter than M

    const auto small = rows_and_normalize(F, 1);
    for (const auto& l : small.plus_layers)
        EXPECT_EQ(comparable_pairs(l), 0u);
    for (const auto& l : small.minus_layers)
        EXPECT_EQ(comparable_pairs(l), 0u);
    std::size_t total = small.boundary.size();
    for (const auto& l : small.plus_layers)
        total += l.size();
    for (const auto& l : small.minus_layers)
        total += l.size();
    for (const auto& t : small.normal)
        total += t.members.size();
    EXPECT_EQ(total, F.trees[0].members.size());
    EXPECT_LE(faithful.F_constant, 200.0 + 1e-9);
}

TEST(Decompose, Separation)
{
    const Tile P1 = Tile::at(3, 2, 10, 10);
    const Tree T1{make_top({P1}), {P1}};
    EXPECT_FALSE(validate_separation(T1, T1, 1.0));
    EXPECT_FALSE(validate_separation(T1, T1, 0.5));

    const Tile Far = Tile::at(3, 5, 10, 10);
    EXPECT_TRUE(validate_separation(T1, {make_top({Far}), {Far}}, 0.01));

    // horizontal tiles m rows apart: the gap is (m - 1) rows, so Delta = m - 1
    for (int m = 1; m <= 8; ++m) {
        const Tile P2 = Tile::at(3, 2, 10 + m, 10 + m);
        const Tree T2{make_top({P2}), {P2}};
        const double D = m - 1.0;
        for (double delta : {0.1, 0.2, 0.3, 0.6}) {
            EXPECT_EQ(validate_separation(T1, T2, delta), 1.0 / (1.0 + D) < delta) << m << " " << delta;
        }
    }
}

TEST(Decompose, PipelineInvariants)
{
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto L = piecewise_random_field(1024, 32, 0, 64, 77 + seed);
        const DecomposeConfig cfg;
        const auto R = decompose(L, cfg);
        EXPECT_TRUE(R.conserved);
        EXPECT_EQ(R.duplicates, 0u);
        EXPECT_TRUE(R.all_valid());
        std::size_t total = 0;
        for (const auto& [label, count] : R.buckets)
            total += count;
        EXPECT_EQ(total, R.universe.tiles.size());
        for (const auto& S : R.strata) {
            EXPECT_LE(S.sum_E_maximal, 1.0 + 1e-12);
            EXPECT_LE(S.counting.C, 2.0);
            EXPECT_EQ(S.split.B_bound_violations, 0u);
            for (const auto& b : S.split.buckets) {
                EXPECT_EQ(b.assembly.step3_violations, 0u);
                EXPECT_EQ(b.A_chain_pairs, 0u);
            }
        }
        const auto R2 = decompose(L, cfg);
        EXPECT_EQ(R.buckets, R2.buckets);
    }
}

// Without the sparse split the 2^10 scale gaps are missing; the pipeline
// still conserves tiles, and the validators report what breaks.
TEST(Decompose, NonSparseDiagnostics)
{
    const auto L = piecewise_random_field(1024, 32, 0, 64, 1000);
    DecomposeConfig cfg;
    cfg.scale_spacing = 1;
    const auto R = decompose(L, cfg);
    EXPECT_TRUE(R.conserved);
    std::size_t trees = 0;
    for (const auto& S : R.strata)
        trees += S.forest.trees.size();
    EXPECT_GT(trees, 0u);
}
