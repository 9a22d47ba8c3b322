#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "io.hpp"

namespace qc {

inline constexpr int exit_ok = 0;
inline constexpr int exit_fail = 1;
inline constexpr int exit_usage = 2;

struct CmdResult {
    int status = exit_ok;
    std::vector<std::string> files;  // written, in order
    std::vector<std::string> lines;  // human-readable summary
};

namespace detail {

inline std::string out_path(const Config& cfg, const std::string& name)
{
    std::filesystem::create_directories(cfg.out);
    return (std::filesystem::path(cfg.out) / name).string();
}

inline void emit(CmdResult& r, const Config& cfg, const std::string& name, const std::string& text)
{
    const std::string p = out_path(cfg, name);
    write_text(p, text);
    r.files.push_back(p);
}

inline std::string slug(std::string s)
{
    for (auto& ch : s)
        if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '.')
            ch = '_';
    return s;
}

inline std::string sci(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", x);
    return buf;
}

}  // namespace detail

/// Telescoping identity sum_k psi_k(y) = 1/y on 8 2^-k_max < |y| < 1.
inline CmdResult cmd_kernel_check(const Config& cfg)
{
    CmdResult r;
    const Stamp s = Stamp::of(cfg);
    const double lo = 8.0 * std::ldexp(1.0, -cfg.k_max);
    Json j = stamped(s);
    j["k_max"] = cfg.k_max;
    j["points"] = 10000;
    if (lo >= 1.0) {
        r.lines.push_back("warning: partial coverage; scales 0.." + std::to_string(cfg.k_max) +
                          " leave no y with 8 2^-k_max < |y| < 1, nothing checked");
        j["covered"] = false;
        j["max_error"] = nullptr;
    } else {
        const double err = telescoping_error(cfg.k_max, 10000);
        j["covered"] = true;
        j["range"] = Json::array({lo, 1.0});
        j["max_error"] = err;
        j["passed"] = err < 1e-8;
        r.lines.push_back(std::string(err < 1e-8 ? "PASS" : "FAIL") + " telescoping error " + detail::sci(err) +
                          " on " + fmt(lo) + " < |y| < 1");
        if (cfg.k_max < 10)
            r.lines.push_back("note: identity holds only where scales 0.." + std::to_string(cfg.k_max) + " cover");
        if (!(err < 1e-8))
            r.status = exit_fail;
    }
    detail::emit(r, cfg, "kernel.csv", kernel_csv(build_psi(), 1, 10, 2001, s));
    detail::emit(r, cfg, "kernel_check.json", j.dump(2) + "\n");
    return r;
}

inline LineField field_for(const Config& cfg, const std::optional<std::string>& file)
{
    if (file)
        return linefield_from_json(parse_json(read_text(*file), *file));
    return make_field(cfg);
}

/// Tiles of each reported stage, for rendering.
inline std::vector<Tile> stage_tiles(const DecompositionReport& R, const std::string& stage)
{
    std::vector<Tile> v;
    for (const auto& S : R.strata) {
        if (stage == "maximal")
            v.insert(v.end(), S.maximal.begin(), S.maximal.end());
        else if (stage == "exceptional")
            v.insert(v.end(), S.exceptional.begin(), S.exceptional.end());
        else if (stage == "trees")
            for (const auto& T : S.forest.trees) {
                v.insert(v.end(), T.top.tiles.begin(), T.top.tiles.end());
                v.insert(v.end(), T.members.begin(), T.members.end());
            }
    }
    return sorted_unique(v);
}

inline CmdResult cmd_decompose(const Config& cfg, const std::optional<std::string>& field_file = std::nullopt)
{
    CmdResult r;
    const Stamp s = Stamp::of(cfg);
    const LineField L = field_for(cfg, field_file);
    if (L.n < (std::size_t{1} << cfg.k_max))
        throw ConfigError("line field resolution is coarser than scale k_max");
    const auto R = decompose(L, cfg.decompose());
    detail::emit(r, cfg, "decomposition.json", to_json(R, s).dump(2) + "\n");
    detail::emit(r, cfg, "stages.csv", stages_csv(R, s));
    SvgOptions o;
    o.f0 = cfg.f0;
    o.f1 = cfg.f1;
    for (const char* st : {"maximal", "exceptional", "trees"})
        detail::emit(r, cfg, std::string("stage_") + st + ".svg", render_svg(stage_tiles(R, st), o, s));
    r.lines.push_back("universe " + std::to_string(R.universe.tiles.size()) + " tiles, " +
                      std::to_string(R.strata.size()) + " strata, " + std::to_string(tree_count(R)) + " trees");
    r.lines.push_back(std::string("conservation ") + (R.conserved ? "ok" : "FAILED") + ", validators " +
                      (R.all_valid() ? "ok" : "FAILED"));
    if (!R.all_valid())
        r.status = exit_fail;
    return r;
}

/// T f as the sum of scale operators, checked against the linearized
/// integral evaluated point by point.
inline CmdResult cmd_evaluate(const Config& cfg, const std::optional<std::string>& field_file = std::nullopt,
                              const std::optional<std::string>& function_file = std::nullopt)
{
    CmdResult r;
    const Stamp s = Stamp::of(cfg);
    const LineField L = field_for(cfg, field_file);
    const OperatorPlan plan(cfg.n_x, cfg.k_max, cfg.kernel_piece);
    const SampledFunction f = function_file ? function_from_json(parse_json(read_text(*function_file), *function_file))
                                            : random_function(cfg.n_x, cfg.seed);
    if (f.size() != cfg.n_x)
        throw ConfigError("function length differs from n_x");
    SampledFunction Tf(cfg.n_x);
    for (int k = 0; k <= cfg.k_max; ++k) {
        const auto t = T_k(f, k, L, plan);
        for (std::size_t i = 0; i < cfg.n_x; ++i)
            Tf[i] += t[i];
    }
    const SampledFunction direct = T_linearized(f, L, plan);
    double worst = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < cfg.n_x; ++i) {
        worst = std::max(worst, std::abs(direct[i] - Tf[i]));
        scale = std::max(scale, std::abs(direct[i]));
    }
    const double nf = norm2(f), nt = norm2(Tf);
    Json j = stamped(s);
    j["n_x"] = cfg.n_x;
    j["k_max"] = cfg.k_max;
    j["kernel_piece"] = cfg.kernel_piece;
    j["norm_f"] = nf;
    j["norm_Tf"] = nt;
    j["ratio"] = nf > 0 ? nt / nf : 0.0;
    j["checked_points"] = cfg.n_x;
    j["max_residual"] = worst;
    j["passed"] = worst <= 1e-6 * std::max(1.0, scale);
    detail::emit(r, cfg, "evaluate.json", j.dump(2) + "\n");
    detail::emit(r, cfg, "Tf.csv", function_csv(Tf, s));
    r.lines.push_back("||Tf|| / ||f|| = " + fmt(nf > 0 ? nt / nf : 0.0) + ", residual against the integral " +
                      detail::sci(worst) + " on " + std::to_string(cfg.n_x) + " points");
    if (!j["passed"].get<bool>())
        r.status = exit_fail;
    return r;
}

/// |E(P)|, density and mass A(P) for every tile of the universe.
inline CmdResult cmd_mass(const Config& cfg, const std::optional<std::string>& field_file = std::nullopt)
{
    CmdResult r;
    const Stamp s = Stamp::of(cfg);
    const LineField L = field_for(cfg, field_file);
    const Universe U = make_universe(cfg.k_max, cfg.f0, cfg.f1);
    const MassEngine engine(L, cfg.mass(), cfg.k_max);
    std::string csv = csv_head(s) + "k,j,p,q,E,density,mass,stratum\n";
    std::map<int, std::size_t> strata;
    for (const auto& P : U.tiles) {
        const double A = engine.mass(P);
        const int n = stratum_of(A);
        ++strata[n];
        csv += std::to_string(P.scale()) + "," + std::to_string(P.time.index) + "," +
               std::to_string(P.alpha.index) + "," + std::to_string(P.omega.index) + "," +
               fmt(measure_E(P, L)) + "," + fmt(engine.density_of(P)) + "," + fmt(A) + "," +
               (n == null_stratum ? std::string("null") : std::to_string(n)) + "\n";
    }
    detail::emit(r, cfg, "mass.csv", csv);
    std::string line = "tiles " + std::to_string(U.tiles.size()) + "; strata:";
    for (const auto& [n, c] : strata)
        line += " " + (n == null_stratum ? std::string("null") : "n" + std::to_string(n)) + "=" + std::to_string(c);
    r.lines.push_back(line);
    return r;
}

inline CmdResult cmd_verify(const Config& cfg, const std::string& suite)
{
    if (std::find(suite_names().begin(), suite_names().end(), suite) == suite_names().end()) {
        std::string msg = "unknown suite '" + suite + "'; available:";
        for (const auto& n : suite_names())
            msg += " " + n;
        throw ConfigError(msg);
    }
    CmdResult r;
    const Stamp s = Stamp::of(cfg);
    const VerifyConfig vc = cfg.verify();
    std::vector<std::string> names{suite};
    if (suite == "all")
        names.assign(suite_names().begin(), suite_names().end() - 1);
    std::vector<EstimateReport> reports;
    for (const auto& name : names) {
        if (name != "weak-l2") {
            for (auto& rep : run_suite(name, vc))
                reports.push_back(std::move(rep));
            continue;
        }
        const auto w = check_weak_l2(vc);
        const auto members = weak_ensemble(vc);
        for (std::size_t m = 0; m < members.size(); ++m)
            detail::emit(r, cfg, "weak-l2_distribution_" + detail::slug(members[m].label) + ".csv",
                         distribution_csv(w.distributions[m], s));
        reports.push_back(w.report);
    }
    std::string summary = "# " + s.text() + "\n";
    for (const auto& rep : reports) {
        detail::emit(r, cfg, detail::slug(rep.id) + ".json", to_json(rep, s).dump(2) + "\n");
        summary += summary_line(rep) + "\n";
        r.lines.push_back(summary_line(rep));
        if (!rep.passed)
            r.status = exit_fail;
    }
    detail::emit(r, cfg, "summary.txt", summary);
    return r;
}

/// Tiles from a tile list or every tree of a decomposition report.
inline std::vector<Tile> tiles_for_render(const Json& j)
{
    if (j.is_object() && j.contains("strata")) {
        std::vector<Tile> v;
        for (const auto& S : j.at("strata"))
            for (const auto& T : S.at("trees")) {
                for (const auto& t : T.at("top"))
                    v.push_back(tile_from_json(t));
                for (const auto& t : T.at("members"))
                    v.push_back(tile_from_json(t));
            }
        return sorted_unique(v);
    }
    return tiles_from_json(j);
}

inline CmdResult cmd_render(const Config& cfg, const std::string& file)
{
    CmdResult r;
    const auto tiles = tiles_for_render(parse_json(read_text(file), file));
    SvgOptions o;
    o.f0 = cfg.f0;
    o.f1 = cfg.f1;
    detail::emit(r, cfg, "render.svg", render_svg(tiles, o, Stamp::of(cfg)));
    r.lines.push_back("rendered " + std::to_string(tiles.size()) + " tiles");
    return r;
}

}  // namespace qc
