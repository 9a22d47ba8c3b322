#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "decompose.hpp"
#include "geometry.hpp"
#include "kernel.hpp"
#include "linefield.hpp"
#include "operator.hpp"
#include "tile.hpp"
#include "verify.hpp"

namespace qc {

inline constexpr const char* library_version = "0.1.0";

// Insertion-ordered so that every dump of the same value is byte-identical.
using Json = nlohmann::ordered_json;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---- configuration ----------------------------------------------------------

struct Config {
    int k_max = 8;
    std::size_t n_x = 8192;
    double f0 = 0.0, f1 = 64.0;
    int N = 10;
    double tol = 1e-6;
    double eps0 = 0.05;
    double eps = 1e-3;
    double K = 16.0;
    std::vector<double> deltas{0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625};
    double A = 128.0;
    int a_count = 17;
    double B = 64.0;
    int b_count = 9;
    std::uint64_t seed = 1;
    std::string generator = "piecewise";  // piecewise | constant | chirp
    std::size_t pieces = 16;
    int scale_spacing = 10;
    int kernel_piece = narrow_piece;
    std::size_t verify_n_x = 512;
    std::string out = "out";

    void validate() const
    {
        auto bad = [](const std::string& s) { throw ConfigError("config: " + s); };
        if (k_max < 0 || k_max > 20)
            bad("k_max must lie in [0, 20]");
        // strict: the narrow kernel at scale k_max needs more than 16 samples per 2^-k_max
        if (!is_pow2(n_x) || n_x <= (std::size_t{1} << (k_max + 4)))
            bad("n_x must be a power of two > 2^(k_max+4)");
        if (!is_pow2(verify_n_x) || verify_n_x < 64)
            bad("verify_n_x must be a power of two >= 64");
        if (!(f1 > f0))
            bad("frequency window needs f1 > f0");
        if (N <= 0 || !(tol > 0) || !(eps0 > 0) || !(eps > 0) || !(K > 0))
            bad("N, tol, eps0, eps and K must be positive");
        if (deltas.empty())
            bad("delta sweep is empty");
        for (double d : deltas)
            if (!(d > 0 && d <= 1))
                bad("deltas must lie in (0, 1]");
        if (!(A > 0) || !(B > 0) || a_count < 1 || b_count < 1)
            bad("modulation grids need A, B > 0 and counts >= 1");
        if (pieces < 1 || scale_spacing < 1)
            bad("pieces and scale_spacing must be positive");
        if (kernel_piece < 0 || kernel_piece > 12)
            bad("kernel_piece must lie in [0, 12]");
        if (generator != "piecewise" && generator != "constant" && generator != "chirp")
            bad("unknown generator '" + generator + "'");
    }

    MassConfig mass() const { return {N, tol}; }

    DecomposeConfig decompose() const
    {
        DecomposeConfig d;
        d.k_max = k_max;
        d.f0 = f0;
        d.f1 = f1;
        d.K = K;
        d.mass = mass();
        d.scale_spacing = scale_spacing;
        return d;
    }

    VerifyConfig verify() const
    {
        VerifyConfig v;
        v.n_x = verify_n_x;
        v.eps0 = eps0;
        v.eps = eps;
        v.deltas = deltas;
        v.A = A;
        v.a_count = a_count;
        v.B = B;
        v.b_count = b_count;
        v.seed = seed;
        v.mass = mass();
        return v;
    }
};

inline Json to_json(const Config& c)
{
    Json j;
    j["k_max"] = c.k_max;
    j["n_x"] = c.n_x;
    j["f0"] = c.f0;
    j["f1"] = c.f1;
    j["N"] = c.N;
    j["tol"] = c.tol;
    j["eps0"] = c.eps0;
    j["eps"] = c.eps;
    j["K"] = c.K;
    j["deltas"] = c.deltas;
    j["A"] = c.A;
    j["a_count"] = c.a_count;
    j["B"] = c.B;
    j["b_count"] = c.b_count;
    j["seed"] = c.seed;
    j["generator"] = c.generator;
    j["pieces"] = c.pieces;
    j["scale_spacing"] = c.scale_spacing;
    j["kernel_piece"] = c.kernel_piece;
    j["verify_n_x"] = c.verify_n_x;
    j["out"] = c.out;
    return j;
}

/// Fields present in `j` override `base`; unknown keys and wrong types are errors.
inline Config config_from_json(const Json& j, Config base = {})
{
    if (!j.is_object())
        throw ConfigError("config: expected a JSON object");
    const Json known = to_json(base);
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.contains(it.key()))
            throw ConfigError("config: unknown key '" + it.key() + "'");
    try {
        auto get = [&](const char* k, auto& field) {
            if (j.contains(k))
                field = j.at(k).get<std::decay_t<decltype(field)>>();
        };
        get("k_max", base.k_max);
        get("n_x", base.n_x);
        get("f0", base.f0);
        get("f1", base.f1);
        get("N", base.N);
        get("tol", base.tol);
        get("eps0", base.eps0);
        get("eps", base.eps);
        get("K", base.K);
        get("deltas", base.deltas);
        get("A", base.A);
        get("a_count", base.a_count);
        get("B", base.B);
        get("b_count", base.b_count);
        get("seed", base.seed);
        get("generator", base.generator);
        get("pieces", base.pieces);
        get("scale_spacing", base.scale_spacing);
        get("kernel_piece", base.kernel_piece);
        get("verify_n_x", base.verify_n_x);
        get("out", base.out);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    base.validate();
    return base;
}

inline Json parse_json(const std::string& text, const std::string& what)
{
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(what + ": " + e.what());
    }
}

inline std::string read_text(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot read " + path);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

inline void write_text(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path);
    out << text;
}

// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s)
{
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

// Hash of every field that affects results; the output directory does not.
inline std::string config_hash(const Config& c)
{
    Json j = to_json(c);
    j.erase("out");
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
    return buf;
}

/// Provenance line written at the head of every artifact.
struct Stamp {
    std::string hash;
    std::string version = library_version;

    static Stamp of(const Config& c) { return {config_hash(c), library_version}; }
    std::string text() const { return "qcarleson " + version + " config " + hash; }
};

inline Json stamped(const Stamp& s)
{
    Json j;
    j["config_hash"] = s.hash;
    j["version"] = s.version;
    return j;
}

inline std::string csv_head(const Stamp& s) { return "# " + s.text() + "\n"; }

// ---- core types -------------------------------------------------------------

inline Json to_json(const DyadicInterval& I)
{
    Json j;
    j["scale"] = I.scale;
    j["index"] = I.index;
    j["axis"] = I.axis == Axis::time ? "time" : "freq";
    return j;
}

inline DyadicInterval interval_from_json(const Json& j)
{
    const std::string ax = j.at("axis").get<std::string>();
    if (ax != "time" && ax != "freq")
        throw ConfigError("interval axis must be time or freq");
    return {j.at("scale").get<int>(), j.at("index").get<std::int64_t>(), ax == "time" ? Axis::time : Axis::freq};
}

inline Json to_json(const Tile& P)
{
    Json j;
    j["alpha"] = to_json(P.alpha);
    j["omega"] = to_json(P.omega);
    j["time"] = to_json(P.time);
    j["a"] = P.a;
    return j;
}

inline Tile tile_from_json(const Json& j)
{
    try {
        return {interval_from_json(j.at("alpha")), interval_from_json(j.at("omega")),
                interval_from_json(j.at("time")), j.value("a", 1.0)};
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("tile: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("tile: ") + e.what());
    }
}

inline Json to_json(const std::vector<Tile>& tiles)
{
    Json a = Json::array();
    for (const auto& P : tiles)
        a.push_back(to_json(P));
    return a;
}

/// Accepts a bare array of tiles or an object with a "tiles" array.
inline std::vector<Tile> tiles_from_json(const Json& j)
{
    const Json& a = j.is_object() && j.contains("tiles") ? j.at("tiles") : j;
    if (!a.is_array())
        throw ConfigError("expected an array of tiles");
    std::vector<Tile> v;
    for (const auto& t : a)
        v.push_back(tile_from_json(t));
    return v;
}

inline Json to_json(const LineField& L)
{
    Json j;
    j["resolution"] = L.n;
    j["generator"] = L.generator;
    j["seed"] = L.seed;
    Json cells = Json::array();
    for (std::size_t i = 0; i < L.n; ++i)
        cells.push_back(Json{{"c", L.c[i]}, {"b", L.b[i]}});
    j["cells"] = std::move(cells);
    return j;
}

inline LineField linefield_from_json(const Json& j)
{
    try {
        const auto n = j.at("resolution").get<std::size_t>();
        const auto& cells = j.at("cells");
        if (cells.size() != n)
            throw ConfigError("line field: cell count differs from resolution");
        LineField L(n, {}, j.value("generator", std::string("file")));
        L.seed = j.value("seed", std::uint64_t{0});
        for (std::size_t i = 0; i < n; ++i)
            L.set(i, {cells[i].at("c").get<double>(), cells[i].at("b").get<double>()});
        return L;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("line field: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("line field: ") + e.what());
    }
}

/// The line field named by the config generator.
inline LineField make_field(const Config& c)
{
    if (c.generator == "constant")
        return constant_field(c.n_x, {0.5 * (c.f0 + c.f1), 0.0});
    if (c.generator == "chirp")
        return chirp_matched_field(c.n_x, 0.25 * (c.f1 - c.f0), c.f0);
    return piecewise_random_field(c.n_x, c.pieces, c.f0, c.f1, c.seed);
}

inline Json to_json(const SampledFunction& f)
{
    Json j;
    j["n"] = f.size();
    Json re = Json::array(), im = Json::array();
    for (const auto& v : f.values) {
        re.push_back(v.real());
        im.push_back(v.imag());
    }
    j["re"] = std::move(re);
    j["im"] = std::move(im);
    return j;
}

inline SampledFunction function_from_json(const Json& j)
{
    const auto n = j.at("n").get<std::size_t>();
    const auto& re = j.at("re");
    const auto& im = j.at("im");
    if (re.size() != n || im.size() != n)
        throw ConfigError("sampled function: length differs from n");
    SampledFunction f(n);
    for (std::size_t i = 0; i < n; ++i)
        f[i] = {re[i].get<double>(), im[i].get<double>()};
    return f;
}

inline std::string fmt(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string function_csv(const SampledFunction& f, const Stamp& s)
{
    std::string out = csv_head(s) + "index,re,im\n";
    for (std::size_t i = 0; i < f.size(); ++i)
        out += std::to_string(i) + "," + fmt(f[i].real()) + "," + fmt(f[i].imag()) + "\n";
    return out;
}

// y, psi(y), psi_k(y), R(y) on a symmetric grid covering the support of psi_k.
inline std::string kernel_csv(const KernelPiece& psi, int k, int k_max, int count, const Stamp& s)
{
    const KernelPiece pk = psi_k(psi, k);
    const AveragedKernel R = build_R(psi, k_max);
    const double ymax = std::max(psi.support().right, pk.support().right);
    std::string out = csv_head(s) + "y,psi,psi_k,R\n";
    for (int i = 0; i < count; ++i) {
        const double y = -ymax + 2.0 * ymax * (i + 0.5) / count;
        out += fmt(y) + "," + fmt(psi(y)) + "," + fmt(pk(y)) + "," + fmt(R(y)) + "\n";
    }
    return out;
}

// Pairwise Delta and its bracket for a tile collection.
inline std::string geometry_csv(const std::vector<Tile>& tiles, const Stamp& s)
{
    std::string out = csv_head(s) + "i,j,delta,bracket\n";
    for (std::size_t i = 0; i < tiles.size(); ++i)
        for (std::size_t j = 0; j < tiles.size(); ++j) {
            if (i == j)
                continue;
            const double d = delta_value(tiles[i], tiles[j]);
            out += std::to_string(i) + "," + std::to_string(j) + "," + fmt(d) + "," + fmt(bracket(d)) + "\n";
        }
    return out;
}

// ---- decomposition ----------------------------------------------------------

inline Json to_json(const TreeCheck& c)
{
    Json j;
    j["ok"] = c.ok;
    j["failures"] = c.failures;
    return j;
}

inline Json to_json(const Tree& T)
{
    Json j;
    j["top"] = to_json(T.top.tiles);
    j["representative"] = T.top.representative;
    j["members"] = to_json(T.members);
    return j;
}

inline Json to_json(const StratumReport& S)
{
    Json j;
    j["family"] = S.family;
    j["n"] = S.n;
    j["tiles"] = S.tiles.size();
    j["maximal"] = to_json(S.maximal);
    j["sum_E_maximal"] = S.sum_E_maximal;

    Json p;
    p["kept"] = S.prune.kept.size();
    Json layers = Json::array();
    for (const auto& l : S.prune.layers)
        layers.push_back(l.size());
    p["layer_sizes"] = std::move(layers);
    p["outside_C"] = S.prune.outside_C;
    p["claim_violations"] = S.prune.claim_violations;
    p["layer_bound_violations"] = S.prune.layer_bound_violations;
    j["chain_prune"] = std::move(p);

    Json c;
    c["grid_scale"] = S.counting.grid_scale;
    c["threshold"] = S.counting.threshold;
    c["N_l1"] = S.counting.N_l1;
    c["sum_lengths"] = S.counting.sum_lengths;
    c["G_measure"] = S.counting.G_measure;
    c["C"] = S.counting.C;
    j["counting"] = std::move(c);
    j["exceptional"] = to_json(S.exceptional);

    Json split;
    split["M"] = S.split.M;
    split["B_cap"] = S.split.B_cap;
    split["B_bound_violations"] = S.split.B_bound_violations;
    Json buckets = Json::array();
    for (const auto& b : S.split.buckets) {
        Json bj;
        bj["j"] = b.j;
        bj["tiles"] = b.tiles.size();
        bj["A1"] = b.A1.size();
        bj["A2"] = b.A2.size();
        bj["B"] = b.B.size();
        bj["A_chain_pairs"] = b.A_chain_pairs;
        bj["empty_S"] = b.assembly.empty_S.size();
        bj["tops"] = b.assembly.tops.size();
        bj["minimal"] = b.assembly.minimal.size();
        bj["trees"] = b.assembly.trees.size();
        bj["max_orbit"] = b.assembly.max_orbit;
        bj["orbit_violations"] = b.assembly.orbit_violations;
        bj["step3_violations"] = b.assembly.step3_violations;
        buckets.push_back(std::move(bj));
    }
    split["buckets"] = std::move(buckets);
    j["forest_split"] = std::move(split);

    Json trees = Json::array();
    for (std::size_t t = 0; t < S.forest.trees.size(); ++t) {
        Json tj = to_json(S.forest.trees[t]);
        tj["bucket"] = S.forest_bucket[t];
        tj["check"] = to_json(S.tree_checks[t]);
        trees.push_back(std::move(tj));
    }
    j["trees"] = std::move(trees);
    j["forest_check"] = to_json(S.forest_check);

    Json r;
    r["M"] = S.rows.M;
    r["plus"] = S.rows.plus_layers.size();
    r["minus"] = S.rows.minus_layers.size();
    r["boundary"] = S.rows.boundary.size();
    r["F_measure"] = S.rows.F_measure;
    r["F_constant"] = S.rows.F_constant;
    r["normality_violations"] = S.rows.normality_violations;
    r["peel_bound_violations"] = S.rows.peel_bound_violations;
    r["rows"] = S.rows.rows;
    Json rc = Json::array();
    for (const auto& c2 : S.row_checks)
        rc.push_back(to_json(c2));
    r["row_checks"] = std::move(rc);
    j["rows"] = std::move(r);
    return j;
}

inline Json to_json(const DecompositionReport& R, const Stamp& s)
{
    Json j = stamped(s);
    Json u;
    u["k_max"] = R.universe.k_max;
    u["f0"] = R.universe.f0;
    u["f1"] = R.universe.f1;
    u["tiles"] = R.universe.tiles.size();
    j["universe"] = std::move(u);
    Json c;
    c["K"] = R.config.K;
    c["N"] = R.config.mass.N;
    c["tol"] = R.config.mass.tol;
    c["scale_spacing"] = R.config.scale_spacing;
    j["decompose"] = std::move(c);
    Json f;
    f["n_x"] = R.n_x;
    f["generator"] = R.generator;
    f["seed"] = R.seed;
    j["field"] = std::move(f);
    Json strata = Json::array();
    for (const auto& S : R.strata)
        strata.push_back(to_json(S));
    j["strata"] = std::move(strata);
    j["null_tiles"] = R.null_tiles.size();
    Json b;
    for (const auto& [k, v] : R.buckets)
        b[k] = v;
    j["buckets"] = std::move(b);
    j["assigned"] = R.assigned;
    j["duplicates"] = R.duplicates;
    j["conserved"] = R.conserved;
    j["all_valid"] = R.all_valid();
    return j;
}

inline std::size_t tree_count(const DecompositionReport& R)
{
    std::size_t t = 0;
    for (const auto& S : R.strata)
        t += S.forest.trees.size();
    return t;
}

// One line per stratum: sizes at each stage.
inline std::string stages_csv(const DecompositionReport& R, const Stamp& s)
{
    std::string out = csv_head(s) + "family,n,tiles,maximal,D_layers,G_tiles,G_measure,C,trees,rows,F_measure\n";
    for (const auto& S : R.strata)
        out += std::to_string(S.family) + "," + std::to_string(S.n) + "," + std::to_string(S.tiles.size()) + "," +
               std::to_string(S.maximal.size()) + "," + std::to_string(S.prune.layers.size()) + "," +
               std::to_string(S.exceptional.size()) + "," + fmt(S.counting.G_measure) + "," +
               fmt(S.counting.C) + "," + std::to_string(S.forest.trees.size()) + "," +
               std::to_string(S.rows.rows.size()) + "," + fmt(S.rows.F_measure) + "\n";
    return out;
}

// ---- estimates --------------------------------------------------------------

// JSON has no infinity; non-finite values are written as null.
inline Json num(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

inline Json to_json(const EstimateReport& r, const Stamp& s)
{
    Json j = stamped(s);
    j["id"] = r.id;
    j["ensemble"] = r.ensemble;
    j["passed"] = r.passed;
    j["instances"] = r.instances.size();
    j["worst_ratio"] = num(r.worst_ratio);
    j["ceiling"] = num(r.ceiling);
    if (r.fit) {
        Json f;
        f["slope"] = r.fit->slope;
        f["stderr"] = r.fit->stderr_slope;
        f["intercept"] = r.fit->intercept;
        f["points"] = r.fit->points;
        f["slope_min"] = num(r.slope_min);
        f["slope_max"] = num(r.slope_max);
        j["fit"] = std::move(f);
    }
    if (r.gate) {
        Json g;
        g["n_coarse"] = r.gate->n_coarse;
        g["n_fine"] = r.gate->n_fine;
        g["threshold"] = r.gate->threshold;
        g["worst_change"] = r.gate->worst_change;
        g["worst_index"] = r.gate->worst_index;
        g["passed"] = r.gate->passed;
        j["gate"] = std::move(g);
    }
    Json v = Json::object();
    for (const auto& [k, x] : r.values)
        v[k] = num(x);
    j["values"] = std::move(v);
    j["failures"] = r.failures;
    Json rows = Json::array();
    for (const auto& in : r.instances)
        rows.push_back(Json{{"label", in.label}, {"x", num(in.x)}, {"lhs", num(in.lhs)},
                            {"rhs", num(in.rhs)}, {"ratio", num(in.ratio)}});
    j["rows"] = std::move(rows);
    return j;
}

inline std::string summary_line(const EstimateReport& r)
{
    std::string s = (r.passed ? "PASS " : "FAIL ") + r.id + "  worst ratio " + fmt(r.worst_ratio);
    if (r.fit) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "  slope %.4f +- %.4f (%zu pts)", r.fit->slope, r.fit->stderr_slope,
                      r.fit->points);
        s += buf;
    }
    if (r.gate) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "  gate %.2f%%", 100.0 * r.gate->worst_change);
        s += buf;
    }
    for (const auto& f : r.failures)
        s += "\n    " + f;
    return s;
}

// lambda, |{v > lambda}| pairs.
inline std::string distribution_csv(const std::vector<std::pair<double, double>>& d, const Stamp& s)
{
    std::string out = csv_head(s) + "lambda,measure\n";
    for (const auto& [l, m] : d)
        out += fmt(l) + "," + fmt(m) + "\n";
    return out;
}

// ---- SVG --------------------------------------------------------------------

struct SvgOptions {
    double f0 = 0.0, f1 = 64.0;  // frequency window, clipped
    int width = 800, height = 600;
    int margin = 40;
    bool central_lines = true;
};

/// Tiles as parallelograms: time on x in [0,1], frequency upward.
inline std::string render_svg(const std::vector<Tile>& tiles, const SvgOptions& o, const Stamp& s)
{
    if (!(o.f1 > o.f0) || o.width <= 2 * o.margin || o.height <= 2 * o.margin)
        throw std::invalid_argument("render_svg: empty canvas");
    const double W = o.width - 2 * o.margin, H = o.height - 2 * o.margin;
    auto X = [&](double x) { return fmt(o.margin + x * W); };
    auto Y = [&](double f) { return fmt(o.margin + (o.f1 - f) / (o.f1 - o.f0) * H); };

    std::string out = "<!-- " + s.text() + " -->\n";
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(o.width) + "\" height=\"" +
           std::to_string(o.height) + "\" viewBox=\"0 0 " + std::to_string(o.width) + " " +
           std::to_string(o.height) + "\">\n";
    out += "<defs><clipPath id=\"window\"><rect x=\"" + X(0) + "\" y=\"" + Y(o.f1) + "\" width=\"" + fmt(W) +
           "\" height=\"" + fmt(H) + "\"/></clipPath></defs>\n";
    out += "<rect x=\"" + X(0) + "\" y=\"" + Y(o.f1) + "\" width=\"" + fmt(W) + "\" height=\"" + fmt(H) +
           "\" fill=\"none\" stroke=\"black\"/>\n";
    out += "<text x=\"" + X(0.5) + "\" y=\"" + fmt(o.height - 0.3 * o.margin) +
           "\" text-anchor=\"middle\" font-size=\"12\">x</text>\n";
    out += "<text x=\"" + fmt(0.4 * o.margin) + "\" y=\"" + Y(0.5 * (o.f0 + o.f1)) +
           "\" font-size=\"12\">y</text>\n";
    out += "<g clip-path=\"url(#window)\" fill=\"steelblue\" fill-opacity=\"0.15\" stroke=\"steelblue\" "
           "stroke-width=\"0.8\">\n";
    for (const auto& P : tiles) {
        const RealInterval al = P.alpha_edge(), om = P.omega_edge();
        out += "<polygon points=\"" + X(P.xl()) + "," + Y(al.left) + " " + X(P.xr()) + "," + Y(om.left) + " " +
               X(P.xr()) + "," + Y(om.right) + " " + X(P.xl()) + "," + Y(al.right) + "\"/>\n";
    }
    out += "</g>\n";
    if (o.central_lines && !tiles.empty()) {
        out += "<g clip-path=\"url(#window)\" stroke=\"firebrick\" stroke-width=\"0.6\">\n";
        for (const auto& P : tiles)
            out += "<line x1=\"" + X(P.xl()) + "\" y1=\"" + Y(P.alpha.center()) + "\" x2=\"" + X(P.xr()) +
                   "\" y2=\"" + Y(P.omega.center()) + "\"/>\n";
        out += "</g>\n";
    }
    out += "</svg>\n";
    return out;
}

}  // namespace qc
