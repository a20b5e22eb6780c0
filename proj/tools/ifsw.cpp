// Command-line front-end: ifsw <command> <config.json> [options]

#include <iostream>

#include <CLI11.hpp>

#include "ifsw/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Thermodynamic formalism for iterated function systems with weights"};
    std::string command;
    std::string config;
    std::optional<std::string> out;
    ifsw::cli::Overrides ov;
    app.add_option("command", command, "validate | pressure | eigen | normalize | equilibrium | entropy | chaos-game | verify | probe")
        ->required()
        ->check(CLI::IsMember(ifsw::cli::commands()));
    app.add_option("config", config, "JSON system description")->required();
    app.add_option("-o,--out", out, "output directory (default: $IFSW_OUTPUT_DIR or ./ifsw-out)");
    app.add_option("--grid", ov.grid, "grid points per axis");
    app.add_option("--tol", ov.tol, "solver tolerance");
    app.add_option("--N-max", ov.N_max, "largest N for the a_N sequence");
    app.add_option("--particles", ov.particles, "chaos-game steps");
    app.add_option("--seed", ov.seed, "random seed");
    app.add_option("--threads", ov.threads, "worker cap (0: hardware concurrency)");
    app.add_option("--method", ov.method, "pressure method: power | discounted | limit | all");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : ifsw::cli::config_error;
    }
    return ifsw::cli::run(command, config, ov, ifsw::cli::output_dir(out), std::cerr);
}
