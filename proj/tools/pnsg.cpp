// pnsg: command line front end for the Galerkin solver.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pnsg/cli.hpp"

namespace {

pnsg::SolverConfig config_or_defaults(const std::string& path) {
    pnsg::SolverConfig c = path.empty() ? pnsg::SolverConfig{} : pnsg::load_config(path);
    pnsg::validate(c);
    return c;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Galerkin solver for the incompressible p-Navier-Stokes system on the unit square"};
    app.require_subcommand(0, 1);

    bool print_defaults = false;
    int threads = 0;
    app.add_flag("--print-defaults", print_defaults, "Print the default configuration as JSON and exit");
    app.add_option("--threads", threads, "Assembly threads (overrides the config)")->check(CLI::PositiveNumber);

    std::string config_path;
    auto* sim = app.add_subcommand("simulate", "Integrate one configuration");
    sim->add_option("--config", config_path, "JSON configuration file")->required();

    std::string kind = "spectral", out;
    int n = 16, pool = 0;
    auto* basis = app.add_subcommand("basis", "Build and write a basis");
    basis->add_option("--kind", kind, "stream or spectral")->check(CLI::IsMember({"stream", "spectral"}));
    basis->add_option("--n", n, "Number of basis functions")->required();
    basis->add_option("--pool", pool, "Polynomial degrees per axis in the pool (0 = automatic)");
    basis->add_option("--out", out, "Output file")->required();

    std::string suite = "all";
    auto* check = app.add_subcommand("check", "Run a verification suite");
    check->add_option("--suite", suite, "inequalities, energy, weakform or all")
        ->check(CLI::IsMember({"inequalities", "energy", "weakform", "all"}));
    check->add_option("--config", config_path, "JSON configuration file");

    std::string n_list = "4,9,16";
    auto* sweep = app.add_subcommand("sweep", "Run a basis-size convergence sweep");
    sweep->add_option("--config", config_path, "JSON configuration file")->required();
    sweep->add_option("--n-list", n_list, "Comma separated ascending basis sizes");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(pnsg::ExitCode::validation);
    }

    try {
        if (print_defaults) {
            std::cout << pnsg::to_json(pnsg::SolverConfig{}).dump(2) << '\n';
            return 0;
        }
        auto with_threads = [&](pnsg::SolverConfig c) {
            if (threads > 0) c.threads = threads;
            return c;
        };
        if (*sim) return pnsg::run_simulate(with_threads(config_or_defaults(config_path))).exit_code;
        if (*basis) return pnsg::run_basis(kind, n, pool, out);
        if (*check) return pnsg::run_check(suite, with_threads(config_or_defaults(config_path)));
        if (*sweep) return pnsg::run_sweep(with_threads(config_or_defaults(config_path)), pnsg::parse_n_list(n_list));
        std::cout << app.help();
        return 0;
    } catch (const pnsg::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(e.exit_code());
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(pnsg::ExitCode::io);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(pnsg::ExitCode::numerical);
    }
}
