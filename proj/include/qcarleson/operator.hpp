#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "dyadic.hpp"
#include "kernel.hpp"
#include "linefield.hpp"
#include "tile.hpp"

namespace qc {

using cplx = std::complex<double>;

/// Samples f(i h), i = 0..n-1, h = 1/n, extended 1-periodically.
struct SampledFunction {
    std::vector<cplx> values;

    SampledFunction() = default;
    explicit SampledFunction(std::size_t n, cplx fill = 0.0) : values(n, fill)
    {
        if (!is_pow2(n))
            throw std::invalid_argument("sample count must be a power of two");
    }
    template <class F>
    static SampledFunction from(std::size_t n, const F& f)
    {
        SampledFunction s(n);
        for (std::size_t i = 0; i < n; ++i)
            s.values[i] = f(static_cast<double>(i) / static_cast<double>(n));
        return s;
    }

    std::size_t size() const { return values.size(); }
    double h() const { return 1.0 / static_cast<double>(values.size()); }
    cplx& operator[](std::size_t i) { return values[i]; }
    const cplx& operator[](std::size_t i) const { return values[i]; }
    cplx at_periodic(std::int64_t i) const
    {
        const auto n = static_cast<std::int64_t>(values.size());
        return values[static_cast<std::size_t>(((i % n) + n) % n)];
    }
};

inline cplx inner(const SampledFunction& f, const SampledFunction& g)
{
    cplx s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i)
        s += f[i] * std::conj(g[i]);
    return s * f.h();
}

inline double norm_r(const SampledFunction& f, double r = 2.0)
{
    double s = 0.0;
    for (const auto& v : f.values)
        s += std::pow(std::abs(v), r);
    return std::pow(s * f.h(), 1.0 / r);
}

inline double norm2(const SampledFunction& f) { return norm_r(f, 2.0); }

inline SampledFunction random_function(std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N(0.0, 1.0);
    SampledFunction f(n);
    for (auto& v : f.values)
        v = {N(rng), N(rng)};
    return f;
}

/// Grid weights h * psi_k(m h) of one kernel piece at one scale.
struct KernelTable {
    std::vector<std::int64_t> offsets;
    std::vector<double> weights;

    static KernelTable make(const KernelPiece& p, std::size_t n)
    {
        KernelTable t;
        const double h = 1.0 / static_cast<double>(n);
        const RealInterval s = p.support();
        const auto lo = static_cast<std::int64_t>(std::floor(s.left / h));
        const auto hi = static_cast<std::int64_t>(std::ceil(s.right / h));
        for (std::int64_t m = -hi; m <= hi; ++m) {
            if (std::abs(m) < lo)
                continue;
            const double w = h * p(m * h);
            if (w != 0.0) {
                t.offsets.push_back(m);
                t.weights.push_back(w);
            }
        }
        return t;
    }
};

/// Discretization of the tile operators on n samples: trapezoid rule on the
/// sampling grid with the given kernel piece at scales 0..k_max.
class OperatorPlan {
public:
    OperatorPlan(std::size_t n, int k_max, int piece = narrow_piece) : n_(n), k_max_(k_max), piece_(piece)
    {
        if (!is_pow2(n))
            throw std::invalid_argument("sample count must be a power of two");
        if (k_max < 0)
            throw std::invalid_argument("k_max must be >= 0");
        if (static_cast<double>(n) <= std::ldexp(1.0, k_max + 4))
            throw std::invalid_argument("n_x must exceed 2^(k_max+4)");
        for (int k = 0; k <= k_max; ++k)
            tables_.push_back(KernelTable::make(psi_k({piece, 0}, k), n));
    }

    std::size_t n() const { return n_; }
    int k_max() const { return k_max_; }
    int piece() const { return piece_; }
    const KernelTable& table(int k) const
    {
        if (k < 0 || k > k_max_)
            throw std::invalid_argument("tile scale exceeds k_max");
        return tables_[static_cast<std::size_t>(k)];
    }

    // Line-field cell of sample i.
    std::size_t cell(const LineField& L, std::size_t i) const
    {
        if (L.n > n_ || n_ % L.n)
            throw std::invalid_argument("line field must be at most as fine as the sampling grid");
        return i / (n_ / L.n);
    }

    // Samples x_i whose fibre lies in E(P).
    std::vector<std::size_t> E_samples(const Tile& P, const LineField& L) const
    {
        std::vector<std::size_t> out;
        const auto per = n_ >> std::min<int>(P.scale(), log2_exact(n_));
        const std::size_t i0 = static_cast<std::size_t>(P.time.index) * per;
        for (std::size_t i = i0; i < i0 + per; ++i)
            if (passes_through(P, L.line(cell(L, i))))
                out.push_back(i);
        return out;
    }

    // e^{i(l_x(x) y - b(x) y^2)} psi_k(y) h at x = x_i, y = m h.
    cplx weight(const LineField& L, std::size_t i, int k, std::size_t t) const
    {
        const KernelTable& T = tables_[static_cast<std::size_t>(k)];
        const Line l = L.line(cell(L, i));
        const double x = static_cast<double>(i) / static_cast<double>(n_);
        const double y = static_cast<double>(T.offsets[t]) / static_cast<double>(n_);
        return std::polar(T.weights[t], l(x) * y - l.b * y * y);
    }

    // Adjoint kernel: e^{i(l_z(z) y + b(z) y^2)} at z = x_j.
    cplx weight_adjoint(const LineField& L, std::size_t j, int k, std::size_t t) const
    {
        const KernelTable& T = tables_[static_cast<std::size_t>(k)];
        const Line l = L.line(cell(L, j));
        const double z = static_cast<double>(j) / static_cast<double>(n_);
        const double y = static_cast<double>(T.offsets[t]) / static_cast<double>(n_);
        return std::polar(T.weights[t], l(z) * y + l.b * y * y);
    }

private:
    std::size_t n_;
    int k_max_;
    int piece_;
    std::vector<KernelTable> tables_;
};

inline void check_size(const SampledFunction& f, const OperatorPlan& plan)
{
    if (f.size() != plan.n())
        throw std::invalid_argument("function and plan disagree on the sample count");
}

/// H f = sum_{k<=k_max} int psi_k(y) f(x-y) dy with the full kernel.
inline SampledFunction hilbert(const SampledFunction& f, int k_max)
{
    const std::size_t n = f.size();
    std::vector<KernelTable> tabs;
    for (int k = 0; k <= k_max; ++k)
        tabs.push_back(KernelTable::make(psi_k(build_psi(), k), n));
    SampledFunction out(n);
    for (std::size_t i = 0; i < n; ++i) {
        cplx s = 0.0;
        for (const auto& T : tabs)
            for (std::size_t t = 0; t < T.offsets.size(); ++t)
                s += T.weights[t] * f.at_periodic(static_cast<std::int64_t>(i) - T.offsets[t]);
        out[i] = s;
    }
    return out;
}

inline SampledFunction T_P(const SampledFunction& f, const Tile& P, const LineField& L, const OperatorPlan& plan)
{
    check_size(f, plan);
    const int k = P.scale();
    const KernelTable& T = plan.table(k);
    SampledFunction out(plan.n());
    for (std::size_t i : plan.E_samples(P, L)) {
        cplx s = 0.0;
        for (std::size_t t = 0; t < T.offsets.size(); ++t)
            s += plan.weight(L, i, k, t) * f.at_periodic(static_cast<std::int64_t>(i) - T.offsets[t]);
        out[i] = s;
    }
    return out;
}

/// T_P^* f(x) = - int e^{i(l_{x-y}(x-y) y + b(x-y) y^2)} psi_k(y) (chi_E f)(x-y) dy.
inline SampledFunction T_P_adjoint(const SampledFunction& f, const Tile& P, const LineField& L,
                                   const OperatorPlan& plan)
{
    check_size(f, plan);
    const int k = P.scale();
    const KernelTable& T = plan.table(k);
    const auto n = static_cast<std::int64_t>(plan.n());
    SampledFunction out(plan.n());
    for (std::size_t j : plan.E_samples(P, L))
        for (std::size_t t = 0; t < T.offsets.size(); ++t) {
            const std::int64_t x = ((static_cast<std::int64_t>(j) + T.offsets[t]) % n + n) % n;
            out[static_cast<std::size_t>(x)] -= plan.weight_adjoint(L, j, k, t) * f[j];
        }
    return out;
}

inline SampledFunction T_collection(const SampledFunction& f, const std::vector<Tile>& tiles, const LineField& L,
                                    const OperatorPlan& plan)
{
    SampledFunction out(plan.n());
    for (const auto& P : tiles) {
        const auto g = T_P(f, P, L, plan);
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] += g[i];
    }
    return out;
}

inline SampledFunction T_collection_adjoint(const SampledFunction& f, const std::vector<Tile>& tiles,
                                            const LineField& L, const OperatorPlan& plan)
{
    SampledFunction out(plan.n());
    for (const auto& P : tiles) {
        const auto g = T_P_adjoint(f, P, L, plan);
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] += g[i];
    }
    return out;
}

/// T_k f: every fibre contributes at scale k (no tiles involved).
inline SampledFunction T_k(const SampledFunction& f, int k, const LineField& L, const OperatorPlan& plan)
{
    check_size(f, plan);
    const KernelTable& T = plan.table(k);
    SampledFunction out(plan.n());
    for (std::size_t i = 0; i < plan.n(); ++i) {
        cplx s = 0.0;
        for (std::size_t t = 0; t < T.offsets.size(); ++t)
            s += plan.weight(L, i, k, t) * f.at_periodic(static_cast<std::int64_t>(i) - T.offsets[t]);
        out[i] = s;
    }
    return out;
}

/// Nonzero h * sum_{k<=k_max} psi_k(m h), tabulated from the kernel function
/// itself rather than the per-scale tables.
struct LinearizedKernel {
    std::vector<std::int64_t> offsets;
    std::vector<double> weights;

    explicit LinearizedKernel(const OperatorPlan& plan)
    {
        const double h = 1.0 / static_cast<double>(plan.n());
        const auto M = static_cast<std::int64_t>(std::ceil(8.0 / h));
        for (std::int64_t m = -M; m <= M; ++m) {
            double K = 0.0;
            for (int k = 0; k <= plan.k_max(); ++k)
                K += psi_k({plan.piece(), 0}, k)(m * h);
            if (K != 0.0) {
                offsets.push_back(m);
                weights.push_back(h * K);
            }
        }
    }
};

/// int e^{i(l_x(x) y - b(x) y^2)} sum_{k<=k_max} psi_k(y) f(x-y) dy at x = x_i.
inline cplx T_linearized_at(const SampledFunction& f, const LineField& L, const OperatorPlan& plan,
                            const LinearizedKernel& K, std::size_t i)
{
    const double h = 1.0 / static_cast<double>(plan.n());
    const Line l = L.line(plan.cell(L, i));
    const double x = static_cast<double>(i) * h;
    cplx s = 0.0;
    for (std::size_t t = 0; t < K.offsets.size(); ++t) {
        const double y = K.offsets[t] * h;
        s += std::polar(K.weights[t], l(x) * y - l.b * y * y) * f.at_periodic(static_cast<std::int64_t>(i) - K.offsets[t]);
    }
    return s;
}

/// The linearized operator evaluated point by point.
inline SampledFunction T_linearized(const SampledFunction& f, const LineField& L, const OperatorPlan& plan)
{
    check_size(f, plan);
    const LinearizedKernel K(plan);
    SampledFunction out(plan.n());
    for (std::size_t i = 0; i < plan.n(); ++i)
        out[i] = T_linearized_at(f, L, plan, K, i);
    return out;
}

// ---- matrices and norms -----------------------------------------------------

using OperatorMatrix = Eigen::MatrixXcd;

inline OperatorMatrix assemble(const std::vector<Tile>& tiles, const LineField& L, const OperatorPlan& plan)
{
    const auto n = static_cast<std::int64_t>(plan.n());
    OperatorMatrix A = OperatorMatrix::Zero(n, n);
    for (const auto& P : tiles) {
        const int k = P.scale();
        const KernelTable& T = plan.table(k);
        for (std::size_t i : plan.E_samples(P, L))
            for (std::size_t t = 0; t < T.offsets.size(); ++t) {
                const std::int64_t col = ((static_cast<std::int64_t>(i) - T.offsets[t]) % n + n) % n;
                A(static_cast<Eigen::Index>(i), col) += plan.weight(L, i, k, t);
            }
    }
    return A;
}

inline OperatorMatrix to_matrix(const SampledFunction& f)
{
    OperatorMatrix v(static_cast<Eigen::Index>(f.size()), 1);
    for (std::size_t i = 0; i < f.size(); ++i)
        v(static_cast<Eigen::Index>(i), 0) = f[i];
    return v;
}

inline SampledFunction apply_matrix(const OperatorMatrix& A, const SampledFunction& f)
{
    const OperatorMatrix y = A * to_matrix(f);
    SampledFunction out(f.size());
    for (std::size_t i = 0; i < f.size(); ++i)
        out[i] = y(static_cast<Eigen::Index>(i), 0);
    return out;
}

enum class NormMode { matrix_svd, power_iteration };

struct NormResult {
    double value = 0.0;
    double residual = 0.0;
    int iterations = 0;
    bool converged = true;
};

// The matrix acts on samples; the L2 weights h cancel in the operator norm.
inline NormResult spectral_norm(const OperatorMatrix& A, NormMode mode, int max_iter = 5000, double tol = 1e-12,
                                std::uint64_t seed = 1)
{
    NormResult r;
    if (A.size() == 0 || A.cwiseAbs().maxCoeff() == 0.0)
        return r;
    if (mode == NormMode::matrix_svd) {
        Eigen::BDCSVD<OperatorMatrix> svd(A);
        r.value = svd.singularValues()(0);
        return r;
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N(0.0, 1.0);
    Eigen::VectorXcd v(A.cols());
    for (Eigen::Index i = 0; i < v.size(); ++i)
        v(i) = {N(rng), N(rng)};
    v.normalize();
    double lambda = 0.0;
    r.converged = false;
    for (r.iterations = 1; r.iterations <= max_iter; ++r.iterations) {
        Eigen::VectorXcd w = A.adjoint() * (A * v);
        const double next = w.norm();
        if (next == 0.0) {
            lambda = 0.0;
            r.converged = true;
            break;
        }
        Eigen::VectorXcd u = w / next;
        r.residual = (w - next * v).norm() / next;
        v = u;
        const bool done = std::abs(next - lambda) <= tol * next;
        lambda = next;
        if (done) {
            r.converged = true;
            break;
        }
    }
    r.value = std::sqrt(lambda);
    return r;
}

inline NormResult operator_norm(const std::vector<Tile>& tiles, const LineField& L, const OperatorPlan& plan,
                                NormMode mode)
{
    return spectral_norm(assemble(tiles, L, plan), mode);
}

// ---- Carleson-type supremum -------------------------------------------------

inline std::vector<double> uniform_grid(double A, int count)
{
    if (count < 1)
        throw std::invalid_argument("grid needs at least one point");
    std::vector<double> g;
    if (count == 1)
        return {0.0};
    for (int i = 0; i < count; ++i)
        g.push_back(-A + 2.0 * A * i / (count - 1));
    return g;
}

/// max over (a, b) in the grids of |int e^{i(a y + b y^2)} K(y) f(x-y) dy|,
/// K = sum_{k<=k_max} psi_k (full kernel).
inline std::vector<double> quad_carleson_direct(const SampledFunction& f, const std::vector<double>& a_grid,
                                                const std::vector<double>& b_grid, int k_max)
{
    const std::size_t n = f.size();
    const double h = f.h();
    std::vector<KernelTable> tabs;
    for (int k = 0; k <= k_max; ++k)
        tabs.push_back(KernelTable::make(psi_k(build_psi(), k), n));
    std::vector<double> best(n, 0.0);
    std::vector<cplx> folded(n);
    for (double a : a_grid)
        for (double b : b_grid) {
            std::fill(folded.begin(), folded.end(), cplx{});
            for (const auto& T : tabs)
                for (std::size_t t = 0; t < T.offsets.size(); ++t) {
                    const double y = T.offsets[t] * h;
                    const auto r = static_cast<std::size_t>(
                        ((T.offsets[t] % static_cast<std::int64_t>(n)) + static_cast<std::int64_t>(n)) %
                        static_cast<std::int64_t>(n));
                    folded[r] += std::polar(T.weights[t], a * y + b * y * y);
                }
            std::vector<std::size_t> support;
            for (std::size_t r = 0; r < n; ++r)
                if (folded[r] != cplx{})
                    support.push_back(r);
            for (std::size_t i = 0; i < n; ++i) {
                cplx s = 0.0;
                for (std::size_t r : support)
                    s += folded[r] * f[(i + n - r) % n];
                best[i] = std::max(best[i], std::abs(s));
            }
        }
    return best;
}

// ---- maximal functions ------------------------------------------------------

// Averages of |f|^r over every dyadic interval, indexed [scale][index].
inline std::vector<std::vector<double>> dyadic_averages(const SampledFunction& f, double r = 1.0)
{
    const int K = log2_exact(f.size());
    std::vector<std::vector<double>> avg(static_cast<std::size_t>(K) + 1);
    avg[static_cast<std::size_t>(K)].resize(f.size());
    for (std::size_t i = 0; i < f.size(); ++i)
        avg[static_cast<std::size_t>(K)][i] = std::pow(std::abs(f[i]), r);
    for (int s = K - 1; s >= 0; --s) {
        auto& cur = avg[static_cast<std::size_t>(s)];
        const auto& fine = avg[static_cast<std::size_t>(s) + 1];
        cur.resize(fine.size() / 2);
        for (std::size_t j = 0; j < cur.size(); ++j)
            cur[j] = 0.5 * (fine[2 * j] + fine[2 * j + 1]);
    }
    return avg;
}

/// Dyadic maximal function: sup of averages of |f| over dyadic intervals containing x.
inline std::vector<double> maximal(const SampledFunction& f)
{
    const auto avg = dyadic_averages(f);
    const int K = log2_exact(f.size());
    std::vector<double> out(f.size(), 0.0);
    for (std::size_t i = 0; i < f.size(); ++i)
        for (int s = 0; s <= K; ++s)
            out[i] = std::max(out[i], avg[static_cast<std::size_t>(s)][i >> (K - s)]);
    return out;
}

/// f*_r = (M |f|^r)^{1/r}
inline std::vector<double> maximal_r(const SampledFunction& f, double r)
{
    const auto avg = dyadic_averages(f, r);
    const int K = log2_exact(f.size());
    std::vector<double> out(f.size(), 0.0);
    for (std::size_t i = 0; i < f.size(); ++i) {
        double m = 0.0;
        for (int s = 0; s <= K; ++s)
            m = std::max(m, avg[static_cast<std::size_t>(s)][i >> (K - s)]);
        out[i] = std::pow(m, 1.0 / r);
    }
    return out;
}

struct RestrictedPair {
    DyadicInterval I;
    std::vector<std::size_t> E;  // sample indices inside I
};

/// M_delta f: on E_j the largest average of |f| over dyadic intervals
/// containing I_j, zero off the union of the E_j.
inline std::vector<double> maximal_restricted(const SampledFunction& f, const std::vector<RestrictedPair>& pairs)
{
    for (std::size_t a = 0; a < pairs.size(); ++a)
        for (std::size_t b = a + 1; b < pairs.size(); ++b)
            if (!pairs[a].I.disjoint_from(pairs[b].I))
                throw std::invalid_argument("maximal_restricted: intervals must be pairwise disjoint");
    const auto avg = dyadic_averages(f);
    std::vector<double> out(f.size(), 0.0);
    for (const auto& p : pairs) {
        double m = 0.0;
        for (int s = p.I.scale; s >= 0; --s) {
            const DyadicInterval J = p.I.ancestor(s);
            if (s < static_cast<int>(avg.size()))
                m = std::max(m, avg[static_cast<std::size_t>(s)][static_cast<std::size_t>(J.index)]);
        }
        for (std::size_t i : p.E) {
            if (!p.I.contains((static_cast<double>(i) + 0.5) * f.h()))
                throw std::invalid_argument("maximal_restricted: E_j must lie inside I_j");
            out[i] = m;
        }
    }
    return out;
}

}  // namespace qc
