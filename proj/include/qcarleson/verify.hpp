#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "decompose.hpp"
#include "dyadic.hpp"
#include "geometry.hpp"
#include "kernel.hpp"
#include "linefield.hpp"
#include "operator.hpp"
#include "tile.hpp"

namespace qc {

// ---- reports ----------------------------------------------------------------

/// Least-squares line through (log x, log y).
struct Fit {
    double slope = 0.0;
    double intercept = 0.0;
    double stderr_slope = 0.0;
    std::size_t points = 0;
};

inline Fit loglog_fit(const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() != y.size())
        throw std::invalid_argument("loglog_fit: size mismatch");
    std::vector<double> u, v;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] > 0 && y[i] > 0 && std::isfinite(x[i]) && std::isfinite(y[i])) {
            u.push_back(std::log(x[i]));
            v.push_back(std::log(y[i]));
        }
    if (u.size() < 2)
        throw std::invalid_argument("loglog_fit: need two positive points");
    const double n = static_cast<double>(u.size());
    double mu = 0.0, mv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        mu += u[i];
        mv += v[i];
    }
    mu /= n;
    mv /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        sxx += (u[i] - mu) * (u[i] - mu);
        sxy += (u[i] - mu) * (v[i] - mv);
    }
    if (sxx == 0.0)
        throw std::invalid_argument("loglog_fit: all x equal");
    Fit f;
    f.points = u.size();
    f.slope = sxy / sxx;
    f.intercept = mv - f.slope * mu;
    if (u.size() > 2) {
        double rss = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) {
            const double r = v[i] - (f.intercept + f.slope * u[i]);
            rss += r * r;
        }
        f.stderr_slope = std::sqrt(rss / (n - 2.0) / sxx);
    }
    return f;
}

/// Same quantities at n and 2n samples; the largest relative change.
struct QuadratureGate {
    std::size_t n_coarse = 0, n_fine = 0;
    double threshold = 0.05;
    double worst_change = 0.0;
    std::size_t worst_index = 0;
    bool passed = false;
};

inline QuadratureGate quadrature_gate(const std::vector<double>& coarse, const std::vector<double>& fine,
                                      std::size_t n_coarse, double threshold = 0.05)
{
    if (coarse.size() != fine.size())
        throw std::invalid_argument("quadrature_gate: size mismatch");
    QuadratureGate g{n_coarse, 2 * n_coarse, threshold, 0.0, 0, false};
    for (std::size_t i = 0; i < coarse.size(); ++i) {
        if (coarse[i] == 0.0 && fine[i] == 0.0)
            continue;
        const double c = std::abs(coarse[i] - fine[i]) / std::max(std::abs(fine[i]), std::abs(coarse[i]));
        if (c > g.worst_change) {
            g.worst_change = c;
            g.worst_index = i;
        }
    }
    g.passed = g.worst_change < threshold;
    return g;
}

struct Instance {
    std::string label;
    double x = 0.0;  // sweep parameter (delta, bracket of Delta, ...)
    double lhs = 0.0, rhs = 0.0, ratio = 0.0;
};

struct EstimateReport {
    std::string id;
    std::string ensemble;
    std::vector<Instance> instances;
    double worst_ratio = 0.0;
    double ceiling = std::numeric_limits<double>::infinity();
    std::optional<Fit> fit;
    double slope_min = -std::numeric_limits<double>::infinity();
    double slope_max = std::numeric_limits<double>::infinity();
    std::optional<QuadratureGate> gate;
    std::map<std::string, double> values;  // reported constants
    std::vector<std::string> failures;
    bool passed = false;

    void add(std::string label, double x, double lhs, double rhs)
    {
        double r = 0.0;
        if (rhs > 0)
            r = lhs / rhs;
        else if (lhs != 0.0)
            r = std::numeric_limits<double>::infinity();
        instances.push_back({std::move(label), x, lhs, rhs, r});
    }

    void require(bool ok, const std::string& what)
    {
        if (!ok)
            failures.push_back(what);
    }

    // Fits log y against log x; the slope is judged in finish().
    void fit_slope(const std::vector<double>& x, const std::vector<double>& y, double lo, double hi)
    {
        fit = loglog_fit(x, y);
        slope_min = lo;
        slope_max = hi;
    }

    void finish()
    {
        worst_ratio = 0.0;
        for (const auto& in : instances) {
            if (!(in.ratio >= 0.0) || !std::isfinite(in.ratio))
                failures.push_back("ratio not finite at " + in.label);
            else
                worst_ratio = std::max(worst_ratio, in.ratio);
        }
        if (worst_ratio > ceiling)
            failures.push_back("worst ratio " + std::to_string(worst_ratio) + " above ceiling " +
                               std::to_string(ceiling));
        bool gate_ok = true;
        if (gate && !gate->passed) {
            gate_ok = false;
            failures.push_back("quadrature gate: change " + std::to_string(gate->worst_change) +
                               " at instance " + std::to_string(gate->worst_index) + "; slope not trusted");
        }
        if (fit && gate_ok) {
            if (fit->points < 8)
                failures.push_back("fit has " + std::to_string(fit->points) + " points, need 8");
            if (fit->slope < slope_min || fit->slope > slope_max)
                failures.push_back("slope " + std::to_string(fit->slope) + " outside [" +
                                   std::to_string(slope_min) + ", " + std::to_string(slope_max) + "]");
        }
        passed = failures.empty();
    }
};

// ---- configuration ----------------------------------------------------------

struct VerifyConfig {
    std::size_t n_x = 512;
    double eps0 = 0.05;
    double eps = 1e-3;
    double n_exp = 2.0;
    std::vector<double> deltas{0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625};
    int lemma0_scale = 3;
    int tree_scales = 2;
    double A = 128.0;
    int a_count = 17;
    double B = 64.0;
    int b_count = 9;
    int weak_k_max = 4;
    int mdelta_instances = 100;
    std::uint64_t seed = 1;
    double gate_threshold = 0.05;
    MassConfig mass{};
};

// ---- matrix helpers ---------------------------------------------------------

inline std::vector<std::size_t> nonzero_rows(const OperatorMatrix& A)
{
    std::vector<std::size_t> r;
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        if (A.row(i).cwiseAbs().maxCoeff() != 0.0)
            r.push_back(static_cast<std::size_t>(i));
    return r;
}

inline OperatorMatrix select_rows(const OperatorMatrix& A, const std::vector<std::size_t>& rows)
{
    OperatorMatrix S(static_cast<Eigen::Index>(rows.size()), A.cols());
    for (std::size_t r = 0; r < rows.size(); ++r)
        S.row(static_cast<Eigen::Index>(r)) = A.row(static_cast<Eigen::Index>(rows[r]));
    return S;
}

// Zero rows do not change the norm; dropping them and working with the
// smaller Gram matrix keeps the eigenproblem small.
inline double norm_of(const OperatorMatrix& A)
{
    const auto rows = nonzero_rows(A);
    if (rows.empty())
        return 0.0;
    const OperatorMatrix S = select_rows(A, rows);
    const OperatorMatrix G = S.rows() <= S.cols() ? OperatorMatrix(S * S.adjoint()) : OperatorMatrix(S.adjoint() * S);
    Eigen::SelfAdjointEigenSolver<OperatorMatrix> es(G, Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

inline double tiles_norm(const std::vector<Tile>& tiles, const LineField& L, const OperatorPlan& plan)
{
    return norm_of(assemble(tiles, L, plan));
}

// e^{i(c x + b x^2)}: the modulation whose instantaneous frequency is l.
inline SampledFunction matched_modulation(std::size_t n, const Line& l)
{
    return SampledFunction::from(n, [&](double x) { return std::polar(1.0, l.c * x + l.b * x * x); });
}

inline double periodic_distance(double x, const IntervalSet& S)
{
    double d = std::numeric_limits<double>::infinity();
    for (const auto& p : S.parts())
        for (double s : {-1.0, 0.0, 1.0})
            d = std::min(d, dist_to(x + s, p));
    return d;
}

// ---- Lemma 0 ----------------------------------------------------------------

struct Lemma0Options {
    double n_exp = 2.0;
    double eps0 = 0.05;
    bool with_v17 = true;
};

struct Lemma0Terms {
    double delta = 0.0, bracket = 1.0;
    double critical_measure = 0.0;
    double norm = 0.0;  // int_E1 |f| int_E2 |g| / max(|I1|, |I2|)
    double lhs15 = 0.0, rhs15 = 0.0;
    double lhs16 = 0.0, rhs16 = 0.0;
    double lhs17 = 0.0, rhs17 = 0.0;
};

/// Both sides of the three pair estimates for one pair. The smooth cutoff is
/// 1 - bump, the bump equal to 1 on I_{1,2} and vanishing gamma/2 away.
inline Lemma0Terms lemma0_terms(const Tile& P1, const Tile& P2, const LineField& L, const SampledFunction& f,
                                const SampledFunction& g, const OperatorPlan& plan, const Lemma0Options& opt = {})
{
    Lemma0Terms t;
    const PairGeometry G = delta_pair(P1, P2, opt.eps0);
    t.delta = G.delta;
    t.bracket = G.bracket;
    t.critical_measure = G.critical.measure();
    const auto E1 = plan.E_samples(P1, L), E2 = plan.E_samples(P2, L);
    const double h = 1.0 / static_cast<double>(plan.n());
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t i : E1)
        s1 += std::abs(f[i]) * h;
    for (std::size_t i : E2)
        s2 += std::abs(g[i]) * h;
    t.norm = s1 * s2 / std::max(P1.time.length(), P2.time.length());
    t.rhs15 = std::pow(t.bracket, opt.n_exp) * t.norm;
    t.rhs16 = std::pow(t.bracket, 0.5 - opt.eps0) * t.norm;
    if (E1.empty() || E2.empty())
        return t;

    const auto T1 = T_P_adjoint(f, P1, L, plan), T2 = T_P_adjoint(g, P2, L, plan);
    const double tau = 0.5 * G.gamma;
    cplx outside = 0.0, inside = 0.0;
    for (std::size_t i = 0; i < plan.n(); ++i) {
        const cplx v = T1[i] * std::conj(T2[i]) * h;
        if (v == cplx{})
            continue;
        if (G.critical.empty()) {
            outside += v;
            continue;
        }
        const double d = periodic_distance(static_cast<double>(i) * h, G.critical);
        if (d == 0.0)
            inside += v;
        outside += bump::smooth_step(d / tau) * v;
    }
    t.lhs15 = std::abs(outside);
    t.lhs16 = std::abs(inside);
    if (opt.with_v17) {
        const OperatorMatrix M = assemble({P1}, L, plan) * assemble({P2}, L, plan).adjoint();
        const double nm = norm_of(M);
        t.lhs17 = nm * nm;
        const double L1 = P1.time.length(), L2 = P2.time.length();
        const double A1 = static_cast<double>(E1.size()) * h / L1, A2 = static_cast<double>(E2.size()) * h / L2;
        t.rhs17 = std::min(L2 / L1, L1 / L2) * t.bracket * A1 * A2;
    }
    return t;
}

struct Lemma0Instance {
    std::string label;
    Tile P1, P2;
    LineField L;
    SampledFunction f, g;
};

// The field carries each tile's central line over its own interval.
inline Lemma0Instance lemma0_instance(std::string label, const Tile& P1, const Tile& P2, std::size_t n)
{
    Lemma0Instance in{std::move(label), P1, P2, LineField(n / 2, central_line(P1), "lemma0-pair"), {}, {}};
    const auto [a, b] = in.L.cells(P2.time);
    for (std::size_t i = a; i < b; ++i)
        in.L.set(i, central_line(P2));
    in.f = matched_modulation(n, central_line(P1));
    in.g = matched_modulation(n, central_line(P2));
    return in;
}

/// Horizontal tiles on neighbouring intervals with rows D+1 apart: Delta = D.
inline std::vector<Lemma0Instance> lemma0_parallel_family(std::size_t n, int k)
{
    const std::int64_t j = (std::int64_t{1} << k) / 2 - 1;
    std::vector<Lemma0Instance> v;
    for (int D : {1, 2, 3, 4, 6, 8, 12, 16, 24, 32, 48, 64})
        v.push_back(lemma0_instance("parallel/D" + std::to_string(D), Tile::at(k, j, 0, 0),
                                    Tile::at(k, j + 1, D + 1, D + 1), n));
    return v;
}

/// P2 climbs m rows across its interval; its central line meets the
/// horizontal central line of P1 at the middle of the left star overlap, 4.5|I|
/// left of I2. That point is a row centre only for even m, so odd climbs are
/// skipped (an off-centre crossing gets clipped by the overlap).
inline std::vector<Lemma0Instance> lemma0_crossing_family(std::size_t n, int k)
{
    const std::int64_t j = (std::int64_t{1} << k) / 2 - 1;
    std::vector<Lemma0Instance> v;
    for (int m = 2; m <= 16; m += 2) {
        const std::int64_t p = std::lround(4.5 * m);
        v.push_back(lemma0_instance("crossing/m" + std::to_string(m), Tile::at(k, j, 0, 0),
                                    Tile::at(k, j + 1, p, p + m), n));
    }
    return v;
}

struct Lemma0Report {
    EstimateReport v15, v16, v17;
    std::vector<Lemma0Terms> terms;
};

/// Ratios of all three estimates over the given pairs (no fits).
inline Lemma0Report check_lemma0(const std::vector<Lemma0Instance>& pairs, const OperatorPlan& plan,
                                 const Lemma0Options& opt = {})
{
    Lemma0Report r;
    r.v15.id = "lemma0-v15";
    r.v16.id = "lemma0-v16";
    r.v17.id = "lemma0-v17";
    for (const auto& in : pairs) {
        const auto t = lemma0_terms(in.P1, in.P2, in.L, in.f, in.g, plan, opt);
        r.terms.push_back(t);
        r.v15.add(in.label, t.bracket, t.lhs15, t.rhs15);
        r.v16.add(in.label, t.bracket, t.lhs16, t.rhs16);
        if (opt.with_v17)
            r.v17.add(in.label, t.bracket, t.lhs17, t.rhs17);
    }
    r.v15.finish();
    r.v16.finish();
    r.v17.finish();
    return r;
}

/// Decay fits: (v15) on the parallel family against n_exp - 1/2, (v16) on the
/// crossing family against 1/2 - eps0 - 0.2; both gated at n and 2n.
inline std::vector<EstimateReport> lemma0_decay_suite(const VerifyConfig& cfg)
{
    const Lemma0Options opt{cfg.n_exp, cfg.eps0, true};
    const int k = cfg.lemma0_scale;
    const OperatorPlan coarse(cfg.n_x, k), fine(2 * cfg.n_x, k);

    auto run = [&](const std::vector<Lemma0Instance>& a, const std::vector<Lemma0Instance>& b) {
        return std::pair{check_lemma0(a, coarse, opt), check_lemma0(b, fine, opt)};
    };
    const auto [par, par2] = run(lemma0_parallel_family(cfg.n_x, k), lemma0_parallel_family(2 * cfg.n_x, k));
    const auto [crs, crs2] = run(lemma0_crossing_family(cfg.n_x, k), lemma0_crossing_family(2 * cfg.n_x, k));

    auto series = [](const std::vector<Lemma0Terms>& t, double Lemma0Terms::*m, bool normalized) {
        std::vector<double> v;
        for (const auto& x : t)
            v.push_back(normalized ? x.*m / x.norm : x.*m);
        return v;
    };
    auto brackets = [](const std::vector<Lemma0Terms>& t) {
        std::vector<double> v;
        for (const auto& x : t)
            v.push_back(x.bracket);
        return v;
    };

    EstimateReport v15 = par.v15;
    v15.ensemble = "lemma0-parallel/k" + std::to_string(k);
    v15.failures.clear();
    v15.gate = quadrature_gate(series(par.terms, &Lemma0Terms::lhs15, false),
                               series(par2.terms, &Lemma0Terms::lhs15, false), cfg.n_x, cfg.gate_threshold);
    v15.fit_slope(brackets(par.terms), series(par.terms, &Lemma0Terms::lhs15, true), cfg.n_exp - 0.5,
                  std::numeric_limits<double>::infinity());
    v15.values["crossing_worst_ratio"] = crs.v15.worst_ratio;
    v15.finish();

    EstimateReport v16 = crs.v16;
    v16.ensemble = "lemma0-crossing/k" + std::to_string(k);
    v16.failures.clear();
    v16.gate = quadrature_gate(series(crs.terms, &Lemma0Terms::lhs16, false),
                               series(crs2.terms, &Lemma0Terms::lhs16, false), cfg.n_x, cfg.gate_threshold);
    v16.fit_slope(brackets(crs.terms), series(crs.terms, &Lemma0Terms::lhs16, true), 0.5 - cfg.eps0 - 0.2,
                  std::numeric_limits<double>::infinity());
    for (const auto& t : crs.terms)
        v16.require(t.critical_measure > 0.0, "crossing pair with empty critical interval");
    v16.finish();

    EstimateReport v17;
    v17.id = "lemma0-v17";
    v17.ensemble = "lemma0-parallel+crossing/k" + std::to_string(k);
    for (const auto* r : {&par.v17, &crs.v17})
        for (const auto& in : r->instances)
            v17.add(in.label, in.x, in.lhs, in.rhs);
    v17.finish();
    v17.values["constant"] = v17.worst_ratio;
    return {v15, v16, v17};
}

// ---- Lemma 1: single trees --------------------------------------------------

/// Every universe tile strictly below the top's interval with (3/2)P < top.
inline std::vector<Tile> tree_below(const Universe& U, const Tile& top, int k1)
{
    std::vector<Tile> out;
    for (const auto& P : U.tiles)
        if (P.scale() > top.scale() && P.scale() <= k1 && P.time.subset_of(top.time) &&
            lneq(P.dilated(1.5), top))
            out.push_back(P);
    return sorted_unique(out);
}

struct TreeInstance {
    Tree tree;
    std::vector<Tile> tiles;  // members and top
    LineField L;
    double delta = 1.0;
    double max_mass = 0.0;
    TreeCheck check;
};

inline Tile default_tree_top() { return Tile::at(0, 0, 5, 7); }

/// Tree under the default top on a planted field of density delta: the top's
/// central line on an evenly spread delta-fraction of [0,1), a far line elsewhere.
inline TreeInstance planted_tree_instance(double delta, int k_tree, std::size_t n_field, const MassConfig& mc = {})
{
    const Tile top = default_tree_top();
    const Universe U = make_universe(k_tree, 0.0, 16.0);
    TreeInstance t;
    t.delta = delta;
    t.tree = {make_top({top}), tree_below(U, top, k_tree)};
    t.tiles = t.tree.members;
    t.tiles.push_back(top);
    t.L = planted_field(n_field, top.time, central_line(top), delta, Line{400.0, 0.0});
    t.check = validate_tree(t.tree, U);
    const MassEngine E(t.L, mc, k_tree);
    for (const auto& P : t.tiles)
        t.max_mass = std::max(t.max_mass, E.mass(P));
    return t;
}

inline bool nonincreasing(const std::vector<double>& v)
{
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[i - 1])
            return false;
    return true;
}

inline EstimateReport check_tree_bound(const VerifyConfig& cfg)
{
    EstimateReport r;
    r.id = "lemma1-tree";
    r.ensemble = "planted-tree/top[0,0,5,7]/k" + std::to_string(cfg.tree_scales);
    // mass <= delta at the finest members needs 2^k / delta cells per unit
    const double dmin = *std::min_element(cfg.deltas.begin(), cfg.deltas.end());
    const auto n_field = std::max<std::size_t>(
        256, std::size_t{1} << static_cast<int>(std::ceil(cfg.tree_scales - std::log2(dmin))));
    const std::size_t n = std::max(cfg.n_x, n_field);
    const OperatorPlan coarse(n, cfg.tree_scales), fine(2 * n, cfg.tree_scales);
    std::vector<double> xs, norms, norms2;
    for (double d : cfg.deltas) {
        const auto t = planted_tree_instance(d, cfg.tree_scales, n_field, cfg.mass);
        r.require(t.check.ok, "tree at delta " + std::to_string(d) + " fails Def. 4");
        r.require(t.max_mass <= d * (1.0 + 1e-9), "tree mass " + std::to_string(t.max_mass) + " above delta " +
                                                      std::to_string(d));
        const double a = tiles_norm(t.tiles, t.L, coarse), b = tiles_norm(t.tiles, t.L, fine);
        r.add("delta=" + std::to_string(d), d, a, std::sqrt(d));
        xs.push_back(d);
        norms.push_back(a);
        norms2.push_back(b);
    }
    r.require(nonincreasing(norms), "tree norm not monotone in delta");
    r.gate = quadrature_gate(norms, norms2, n, cfg.gate_threshold);
    r.fit_slope(xs, norms, 0.4, 0.7);
    r.finish();
    r.values["constant"] = r.worst_ratio;
    r.values["n_x"] = static_cast<double>(n);
    return r;
}

// ---- Prop. 1: antichains ----------------------------------------------------

struct AntichainInstance {
    std::vector<Tile> tiles;
    LineField L;
    double delta = 1.0;
    double max_mass = 0.0;
    std::size_t comparable = 0;
};

/// Two sheared scale-1 tiles and one scale-0 tile far above them in frequency;
/// each takes an evenly spread delta-fraction of the cells of its interval.
inline AntichainInstance antichain_instance(double delta, std::size_t n_field, const MassConfig& mc = {})
{
    if (!(delta > 0 && delta <= 0.5))
        throw std::invalid_argument("antichain_instance: delta must lie in (0, 1/2]");
    AntichainInstance a;
    a.delta = delta;
    const Tile R = Tile::at(0, 0, 40, 44);
    const Tile Q0 = Tile::at(1, 0, 2, 4), Q1 = Tile::at(1, 1, 3, 5);
    a.tiles = {R, Q0, Q1};
    a.L = LineField(n_field, Line{400.0, 0.0}, "antichain");
    for (const Tile& Q : {Q0, Q1}) {
        const auto [i0, i1] = a.L.cells(Q.time);
        const std::size_t m = i1 - i0;
        const auto count = static_cast<std::size_t>(std::llround(delta * static_cast<double>(m)));
        const auto order = van_der_corput_cells(m, 2 * count);
        const auto first = van_der_corput_cells(m, count);
        for (std::size_t c : order)
            a.L.set(i0 + c, std::binary_search(first.begin(), first.end(), c) ? central_line(Q) : central_line(R));
    }
    a.tiles = sorted_unique(a.tiles);
    a.comparable = comparable_pairs(a.tiles);
    const MassEngine E(a.L, mc, 1);
    for (const auto& P : a.tiles)
        a.max_mass = std::max(a.max_mass, E.mass(P));
    return a;
}

inline EstimateReport check_antichain_bound(const VerifyConfig& cfg)
{
    EstimateReport r;
    r.id = "prop1-antichain";
    r.ensemble = "antichain/R[0,0,40,44]+Q[1,*]";
    const std::size_t n_field = cfg.n_x;
    const OperatorPlan coarse(cfg.n_x, 1), fine(2 * cfg.n_x, 1);
    std::vector<double> xs, norms, norms2;
    for (double d : cfg.deltas) {
        const auto a = antichain_instance(d, n_field, cfg.mass);
        r.require(a.comparable == 0, "antichain has comparable pairs");
        r.require(a.max_mass <= d * (1.0 + 1e-9), "antichain mass above delta at " + std::to_string(d));
        const double x = tiles_norm(a.tiles, a.L, coarse);
        r.add("delta=" + std::to_string(d), d, x, std::sqrt(d));
        xs.push_back(d);
        norms.push_back(x);
        norms2.push_back(tiles_norm(a.tiles, a.L, fine));
    }
    r.require(nonincreasing(norms), "antichain norm not monotone in delta");
    r.gate = quadrature_gate(norms, norms2, cfg.n_x, cfg.gate_threshold);
    r.fit_slope(xs, norms, 0.05, std::numeric_limits<double>::infinity());
    r.finish();
    if (r.fit)
        r.values["eta"] = r.fit->slope;
    return r;
}

// ---- Carleson-measure estimate ---------------------------------------------

inline bool stars_meet(const DyadicInterval& I, const DyadicInterval& J)
{
    return wrap_unit(star_intervals(I).both()).intersect(wrap_unit(star_intervals(J).both())).measure() > 0.0;
}

/// sum over a(P') of |E(P)|: tiles no longer than P', stars meeting, and
/// Delta(P, P') <= delta^{-2 eps}.
inline double carleson_sum(const Tile& Pp, const std::vector<Tile>& family, const LineField& L, double delta,
                           double eps)
{
    const double lim = std::pow(delta, -2.0 * eps);
    double s = 0.0;
    for (const auto& P : family)
        if (P.time.length() <= Pp.time.length() && stars_meet(P.time, Pp.time) && delta_value(P, Pp) <= lim)
            s += measure_E(P, L);
    return s;
}

inline EstimateReport check_carleson_measure(const VerifyConfig& cfg)
{
    EstimateReport r;
    r.id = "prop1-carleson-measure";
    r.ensemble = "antichain/R[0,0,40,44]+Q[1,*]";
    for (double d : {0.25, 0.125, 0.0625, 0.03125, 0.015625}) {
        const auto a = antichain_instance(d, cfg.n_x, cfg.mass);
        r.require(a.max_mass <= d * (1.0 + 1e-9), "antichain mass above delta at " + std::to_string(d));
        for (const auto& Pp : a.tiles)
            r.add("delta=" + std::to_string(d) + " " + tile_str(Pp), d, carleson_sum(Pp, a.tiles, a.L, d, cfg.eps),
                  std::pow(d, 1.0 - 100.0 * cfg.eps) * Pp.time.length());
    }
    r.finish();
    r.values["constant"] = r.worst_ratio;
    return r;
}

// ---- Lemma 4 -----------------------------------------------------------------

/// |I* cap A| on the circle.
inline double star_overlap(const DyadicInterval& I, const IntervalSet& A)
{
    return wrap_unit(star_intervals(I).both()).intersect(A).measure();
}

inline IntervalSet cell_set(std::size_t grid, const std::vector<std::size_t>& cells)
{
    std::vector<RealInterval> parts;
    const double h = 1.0 / static_cast<double>(grid);
    for (std::size_t c : cells)
        parts.push_back({c * h, (c + 1) * h});
    return IntervalSet(parts);
}

/// The given rows of the matrix of T^{P*} = sum of T_P^*, without assembling
/// the full n x n matrix.
inline OperatorMatrix adjoint_rows(const std::vector<Tile>& tiles, const LineField& L, const OperatorPlan& plan,
                                   const std::vector<std::size_t>& rows)
{
    const auto n = static_cast<std::int64_t>(plan.n());
    OperatorMatrix M = OperatorMatrix::Zero(static_cast<Eigen::Index>(rows.size()), n);
    std::vector<char> inE(plan.n());
    for (const auto& P : tiles) {
        std::fill(inE.begin(), inE.end(), 0);
        for (std::size_t j : plan.E_samples(P, L))
            inE[j] = 1;
        const int k = P.scale();
        const KernelTable& T = plan.table(k);
        for (std::size_t r = 0; r < rows.size(); ++r)
            for (std::size_t t = 0; t < T.offsets.size(); ++t) {
                const std::int64_t j = ((static_cast<std::int64_t>(rows[r]) - T.offsets[t]) % n + n) % n;
                if (inE[static_cast<std::size_t>(j)])
                    M(static_cast<Eigen::Index>(r), j) -= plan.weight_adjoint(L, static_cast<std::size_t>(j), k, t);
            }
    }
    return M;
}

/// ||chi_A T^{P*}||. Throws on the first member tile with |I* cap A| > delta |I|.
inline double cutoff_norm(const std::vector<Tile>& tiles, const IntervalSet& A, double delta, const LineField& L,
                          const OperatorPlan& plan)
{
    for (const auto& P : tiles)
        if (star_overlap(P.time, A) > delta * P.time.length() * (1.0 + 1e-12))
            throw std::invalid_argument("Lemma 4 hypothesis fails at " + tile_str(P));
    std::vector<std::size_t> rows;
    const double h = 1.0 / static_cast<double>(plan.n());
    for (std::size_t i = 0; i < plan.n(); ++i)
        if (A.contains(static_cast<double>(i) * h))
            rows.push_back(i);
    if (rows.empty())
        return 0.0;
    return norm_of(adjoint_rows(tiles, L, plan, rows));
}

/// Largest van der Corput cell set on `grid` cells meeting the hypothesis for
/// every tile. The sets grow with the count, so the admissible counts form a prefix.
inline IntervalSet lemma4_set(const std::vector<Tile>& tiles, double delta, std::size_t grid)
{
    auto ok = [&](std::size_t count) {
        const IntervalSet A = cell_set(grid, van_der_corput_cells(grid, count));
        for (const auto& P : tiles)
            if (star_overlap(P.time, A) > delta * P.time.length() * (1.0 + 1e-12))
                return false;
        return true;
    };
    std::size_t lo = 0, hi = grid;  // ok(lo), and hi is the first candidate not yet known good
    while (hi - lo > 1) {
        const std::size_t mid = lo + (hi - lo) / 2;
        (ok(mid) ? lo : hi) = mid;
    }
    if (ok(hi))
        lo = hi;
    return lo ? cell_set(grid, van_der_corput_cells(grid, lo)) : IntervalSet{};
}

inline EstimateReport check_cutoff_lemma4(const VerifyConfig& cfg)
{
    EstimateReport r;
    r.id = "lemma4-cutoff";
    r.ensemble = "full-density-tree/top[0,0,5,7]/k2+vdC-A/4096";
    const int k_tree = 2;
    const std::size_t grid = 4096;
    const Tile top = default_tree_top();
    const Universe U = make_universe(k_tree, 0.0, 16.0);
    auto tiles = tree_below(U, top, k_tree);
    tiles.push_back(top);
    const LineField L = constant_field(256, central_line(top));
    const std::size_t n = std::max(cfg.n_x, grid);
    const OperatorPlan coarse(n, k_tree), fine(2 * n, k_tree);
    std::vector<double> xs, norms, norms2;
    for (double d : cfg.deltas) {
        const IntervalSet A = lemma4_set(tiles, d, grid);
        r.require(!A.empty(), "no admissible set at delta " + std::to_string(d));
        const double a = cutoff_norm(tiles, A, d, L, coarse);
        r.add("delta=" + std::to_string(d) + " |A|=" + std::to_string(A.measure()), d, a, std::sqrt(d));
        xs.push_back(d);
        norms.push_back(a);
        norms2.push_back(cutoff_norm(tiles, A, d, L, fine));
    }
    r.require(nonincreasing(norms), "cutoff norm not monotone in delta");
    r.gate = quadrature_gate(norms, norms2, n, cfg.gate_threshold);
    r.fit_slope(xs, norms, 0.4, 0.7);
    r.finish();
    r.values["constant"] = r.worst_ratio;
    return r;
}

// ---- M_delta -----------------------------------------------------------------

struct MdeltaInstance {
    double delta = 1.0;
    SampledFunction f;
    std::vector<RestrictedPair> pairs;
};

/// Random dyadic partition of [0,1) at scales 2..6, each I_j with a random
/// sample subset E_j of relative size delta.
inline MdeltaInstance random_mdelta_instance(std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    MdeltaInstance m;
    m.delta = std::ldexp(1.0, -std::uniform_int_distribution<int>(1, 6)(rng));
    m.f = random_function(n, rng());
    std::vector<DyadicInterval> stack{{2, 0}, {2, 1}, {2, 2}, {2, 3}}, leaves;
    std::bernoulli_distribution split(0.5);
    while (!stack.empty()) {
        const DyadicInterval I = stack.back();
        stack.pop_back();
        if (I.scale < 6 && split(rng)) {
            stack.push_back(I.left_child());
            stack.push_back(I.right_child());
        } else {
            leaves.push_back(I);
        }
    }
    std::sort(leaves.begin(), leaves.end());
    for (const auto& I : leaves) {
        const std::size_t per = n >> I.scale;
        std::vector<std::size_t> idx(per);
        for (std::size_t i = 0; i < per; ++i)
            idx[i] = static_cast<std::size_t>(I.index) * per + i;
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(static_cast<std::size_t>(std::floor(m.delta * static_cast<double>(per))));
        std::sort(idx.begin(), idx.end());
        m.pairs.push_back({I, idx});
    }
    return m;
}

inline double mdelta_ratio(const MdeltaInstance& m)
{
    const auto v = maximal_restricted(m.f, m.pairs);
    double s = 0.0;
    for (double x : v)
        s += x * x * m.f.h();
    const double nf = norm2(m.f);
    return s / (m.delta * nf * nf);
}

/// The constant over the first and second halves of the instances must agree
/// within 10%.
inline EstimateReport check_mdelta(const VerifyConfig& cfg)
{
    EstimateReport r;
    r.id = "v8-mdelta";
    r.ensemble = "mdelta/seed" + std::to_string(cfg.seed);
    const std::size_t N = static_cast<std::size_t>(cfg.mdelta_instances);
    double c1 = 0.0, c2 = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        const auto m = random_mdelta_instance(1024, cfg.seed * 1000003ULL + i);
        const double q = mdelta_ratio(m);
        r.add("instance " + std::to_string(i), m.delta, q, 1.0);
        (2 * i < N ? c1 : c2) = std::max(2 * i < N ? c1 : c2, q);
    }
    r.values["constant_first_half"] = c1;
    r.values["constant_second_half"] = c2;
    const double spread = std::abs(c1 - c2) / std::max(c1, c2);
    r.values["spread"] = spread;
    r.require(spread < 0.10, "M_delta constant moves by " + std::to_string(spread) + " between halves");
    r.finish();
    r.values["constant"] = r.worst_ratio;
    return r;
}

// ---- weak (2,2) -------------------------------------------------------------

/// sup over lambda of lambda^2 |{|v| > lambda}| for sample values v.
inline double weak_sup(std::vector<double> v, double h)
{
    std::sort(v.begin(), v.end(), std::greater<>());
    double best = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i)
        best = std::max(best, v[i] * v[i] * static_cast<double>(i + 1) * h);
    return best;
}

/// (lambda, |{v > lambda}|) at every distinct sample value.
inline std::vector<std::pair<double, double>> distribution_function(std::vector<double> v, double h)
{
    std::sort(v.begin(), v.end(), std::greater<>());
    std::vector<std::pair<double, double>> out;
    for (std::size_t i = 0; i < v.size(); ++i)
        if (i == 0 || v[i - 1] != v[i])
            out.push_back({v[i], static_cast<double>(i) * h});
    return out;
}

struct WeakMember {
    std::string label;
    std::function<SampledFunction(std::size_t)> make;
};

inline std::vector<WeakMember> weak_ensemble(const VerifyConfig& cfg)
{
    std::vector<WeakMember> e;
    auto indicator = [](double a, double b) {
        return [a, b](std::size_t n) {
            return SampledFunction::from(n, [&](double x) { return cplx(x >= a && x < b ? 1.0 : 0.0); });
        };
    };
    e.push_back({"chi[0,1/2)", indicator(0.0, 0.5)});
    e.push_back({"chi[1/4,3/8)", indicator(0.25, 0.375)});
    const auto bg = uniform_grid(cfg.B, cfg.b_count);
    for (double b0 : {bg.back(), bg[bg.size() * 3 / 4], bg.front()})
        e.push_back({"chirp b0=" + std::to_string(b0), [b0](std::size_t n) {
                         return SampledFunction::from(n, [&](double x) { return std::polar(1.0, b0 * x * x); });
                     }});
    for (std::uint64_t s : {cfg.seed, cfg.seed + 1})
        e.push_back({"signs/64 seed " + std::to_string(s), [s](std::size_t n) {
                         std::mt19937_64 rng(s);
                         std::vector<double> sg(64);
                         for (auto& x : sg)
                             x = std::bernoulli_distribution(0.5)(rng) ? 1.0 : -1.0;
                         return SampledFunction::from(
                             n, [&](double x) { return cplx(sg[static_cast<std::size_t>(x * 64.0)]); });
                     }});
    return e;
}

struct WeakResult {
    EstimateReport report;
    std::vector<std::vector<std::pair<double, double>>> distributions;  // per member at n_x
};

/// sup over the ensemble of lambda^2 |{Tf > lambda}| / ||f||^2 at n_x and 2 n_x.
inline WeakResult check_weak_l2(const VerifyConfig& cfg)
{
    WeakResult w;
    EstimateReport& r = w.report;
    r.id = "weak-l2";
    r.ensemble = "weak/indicators+chirps+signs";
    const auto ag = uniform_grid(cfg.A, cfg.a_count), bg = uniform_grid(cfg.B, cfg.b_count);
    double sup1 = 0.0, sup2 = 0.0;
    std::vector<double> c1, c2;
    for (const auto& m : weak_ensemble(cfg)) {
        double s[2];
        for (int t = 0; t < 2; ++t) {
            const std::size_t n = cfg.n_x << t;
            const auto f = m.make(n);
            const auto v = quad_carleson_direct(f, ag, bg, cfg.weak_k_max);
            const double nf = norm2(f);
            s[t] = weak_sup(v, f.h()) / (nf * nf);
            if (t == 0) {
                w.distributions.push_back(distribution_function(v, f.h()));
                r.add(m.label, 0.0, weak_sup(v, f.h()), nf * nf);
            }
        }
        c1.push_back(s[0]);
        c2.push_back(s[1]);
        sup1 = std::max(sup1, s[0]);
        sup2 = std::max(sup2, s[1]);
    }
    const double change = std::abs(sup1 - sup2) / std::max(sup1, sup2);
    r.values["sup_n"] = sup1;
    r.values["sup_2n"] = sup2;
    r.values["change"] = change;
    r.gate = quadrature_gate(c1, c2, cfg.n_x, 0.10);
    r.require(change < 0.10, "weak constant moves by " + std::to_string(change) + " on doubling");
    r.finish();
    r.values["constant"] = r.worst_ratio;
    return w;
}

// ---- Prop. 2 end to end ---------------------------------------------------

/// Decompose at K in {2^4, 2^6, 2^8}, take E as the union of the G_n and F
/// sets, and compare ||T f||_{L2(E^c)} over the whole universe with the sum of
/// the per-stratum norms.
inline EstimateReport check_prop2(const VerifyConfig& cfg)
{
    EstimateReport r;
    r.id = "prop2-end-to-end";
    r.ensemble = "piecewise-random/256x16/k4/[0,16)/seed" + std::to_string(cfg.seed);
    const int k_max = 4;
    const LineField L = piecewise_random_field(256, 16, 0.0, 16.0, cfg.seed);
    const OperatorPlan plan(cfg.n_x, k_max);
    std::vector<double> direct;
    double worst_CE = 0.0;
    for (double K : {16.0, 64.0, 256.0}) {
        DecomposeConfig dc;
        dc.k_max = k_max;
        dc.f1 = 16.0;
        dc.K = K;
        dc.mass = cfg.mass;
        const auto R = decompose(L, dc);
        IntervalSet E;
        for (const auto& s : R.strata) {
            for (const auto& p : s.counting.G_set().parts())
                E.add(p);
            for (const auto& p : s.rows.F.parts())
                E.add(p);
        }
        const double h = 1.0 / static_cast<double>(plan.n());
        std::vector<std::size_t> keep;
        for (std::size_t i = 0; i < plan.n(); ++i)
            if (!E.contains(static_cast<double>(i) * h))
                keep.push_back(i);
        auto restricted = [&](const std::vector<Tile>& tiles) {
            const auto A = assemble(tiles, L, plan);
            return norm_of(select_rows(A, keep));
        };
        const double all = restricted(R.universe.tiles);
        double summed = 0.0;
        for (const auto& s : R.strata)
            summed += restricted(s.tiles);
        const double CE = E.measure() * K / std::log2(K);
        worst_CE = std::max(worst_CE, CE);
        r.add("K=" + std::to_string(static_cast<int>(K)), K, all, summed);
        r.values["E_measure/K" + std::to_string(static_cast<int>(K))] = E.measure();
        r.require(all <= summed * (1.0 + 1e-9) + 1e-12, "aggregate above the stratum sum at K=" + std::to_string(K));
        direct.push_back(all);
    }
    const auto [lo, hi] = std::minmax_element(direct.begin(), direct.end());
    r.values["aggregate_spread"] = *lo > 0 ? *hi / *lo : 0.0;
    r.values["C_E"] = worst_CE;
    r.require(*lo == 0.0 || *hi / *lo < 2.0, "aggregate norm not bounded across K");
    r.finish();
    return r;
}

// ---- suites -----------------------------------------------------------------

inline const std::vector<std::string>& suite_names()
{
    static const std::vector<std::string> s{"lemma0", "tree", "antichain", "carleson", "lemma4",
                                            "mdelta", "weak-l2", "prop2", "all"};
    return s;
}

inline std::vector<EstimateReport> run_suite(const std::string& name, const VerifyConfig& cfg)
{
    std::vector<EstimateReport> out;
    const bool all = name == "all";
    if (std::find(suite_names().begin(), suite_names().end(), name) == suite_names().end()) {
        std::string msg = "unknown suite '" + name + "'; available:";
        for (const auto& s : suite_names())
            msg += " " + s;
        throw std::invalid_argument(msg);
    }
    if (all || name == "lemma0")
        for (auto& r : lemma0_decay_suite(cfg))
            out.push_back(std::move(r));
    if (all || name == "tree")
        out.push_back(check_tree_bound(cfg));
    if (all || name == "antichain")
        out.push_back(check_antichain_bound(cfg));
    if (all || name == "carleson")
        out.push_back(check_carleson_measure(cfg));
    if (all || name == "lemma4")
        out.push_back(check_cutoff_lemma4(cfg));
    if (all || name == "mdelta")
        out.push_back(check_mdelta(cfg));
    if (all || name == "weak-l2")
        out.push_back(check_weak_l2(cfg).report);
    if (all || name == "prop2")
        out.push_back(check_prop2(cfg));
    return out;
}

}  // namespace qc
