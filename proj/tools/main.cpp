// qcarleson: command-line front end.
//
// Precedence: built-in defaults < --config file < flags (--seed, --out).

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "qcarleson/cli.hpp"

int main(int argc, char** argv)
{
    CLI::App app{"time-frequency tiles, decomposition and estimate checks for the quadratic Carleson operator"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", std::string(qc::library_version));

    std::string config_file;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    app.add_option("--config", config_file, "JSON config document")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "overrides config seed");
    app.add_option("--out", out, "output directory (overrides config out)");

    std::optional<std::string> field_file, function_file;
    std::string suite = "all";
    std::string render_file;

    auto* kc = app.add_subcommand("kernel-check", "telescoping identity sum psi_k = 1/y; kernel CSV");
    auto* dec = app.add_subcommand("decompose", "organize the tile universe into strata, forests and rows");
    dec->add_option("field", field_file, "line field JSON (default: generated from config)")
        ->check(CLI::ExistingFile);
    auto* ev = app.add_subcommand("evaluate", "T f by scale sums, checked against the linearized integral");
    ev->add_option("field", field_file, "line field JSON")->check(CLI::ExistingFile);
    ev->add_option("--function", function_file, "sampled function JSON")->check(CLI::ExistingFile);
    auto* ms = app.add_subcommand("mass", "|E(P)|, density and mass of every tile");
    ms->add_option("field", field_file, "line field JSON")->check(CLI::ExistingFile);
    auto* vf = app.add_subcommand("verify", "run an estimate suite and write one report per estimate");
    vf->add_option("--suite", suite, "suite name (lemma0 tree antichain carleson lemma4 mdelta weak-l2 prop2 all)");
    auto* rd = app.add_subcommand("render", "SVG of a tile list or of the trees in a decomposition report");
    rd->add_option("file", render_file, "tiles or report JSON")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? qc::exit_ok : qc::exit_usage;
    }

    try {
        qc::Json raw = qc::Json::object();
        if (!config_file.empty())
            raw = qc::parse_json(qc::read_text(config_file), config_file);
        if (seed)
            raw["seed"] = *seed;
        if (out)
            raw["out"] = *out;
        const qc::Config cfg = qc::config_from_json(raw);

        qc::CmdResult r;
        if (*kc)
            r = qc::cmd_kernel_check(cfg);
        else if (*dec)
            r = qc::cmd_decompose(cfg, field_file);
        else if (*ev)
            r = qc::cmd_evaluate(cfg, field_file, function_file);
        else if (*ms)
            r = qc::cmd_mass(cfg, field_file);
        else if (*vf)
            r = qc::cmd_verify(cfg, suite);
        else
            r = qc::cmd_render(cfg, render_file);

        for (const auto& l : r.lines)
            std::cout << l << "\n";
        for (const auto& f : r.files)
            std::cout << "wrote " << f << "\n";
        return r.status;
    } catch (const qc::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return qc::exit_usage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return qc::exit_fail;
    }
}
