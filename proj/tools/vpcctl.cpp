#include <CLI11.hpp>

#include <iostream>

#include "vpc/cli_io.hpp"

int main(int argc, char** argv) {
    CLI::App app{"vpcctl: Vlasov-Poisson magnetic control solver"};
    app.require_subcommand(1, 1);

    vpc::Command cmd;
    std::uint64_t seed = 0;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", cmd.config_path, "key=value run configuration")->required();
        sub->add_option("--out", cmd.out_dir, "output directory (created if absent)");
        sub->add_option("--seed", seed, "overrides the config seed");
        sub->add_option("--format", cmd.format, "field output format")->check(CLI::IsMember({"csv", "bin"}));
    };
    auto* fwd = app.add_subcommand("forward", "nonlinear solve: trajectory and diagnostics CSV");
    auto* opt = app.add_subcommand("optimize", "twin optimization: trace, field, residual report");
    auto* grad = app.add_subcommand("gradcheck", "Frechet and tangent/adjoint duality probes");
    auto* ver = app.add_subcommand("verify", "full probe suite");
    auto* exp = app.add_subcommand("export-plot", "x1-x2 slices of density and |B| per time node");
    for (auto* s : {fwd, opt, grad, ver, exp}) common(s);
    for (auto* s : {fwd, exp, grad}) s->add_option("--field", cmd.field_path, "control field (.csv or .bin)");
    opt->add_option("--field", cmd.field_path, "control generating the twin target (.csv or .bin)");
    ver->add_flag("--full", cmd.full, "include twin optimization and uniqueness starts");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    cmd.name = app.get_subcommands().front()->get_name();
    if (app.get_subcommands().front()->count("--seed")) cmd.seed = seed;
    return vpc::run_command(cmd, std::cout, std::cerr);
}
