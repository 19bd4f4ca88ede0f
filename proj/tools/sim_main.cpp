#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "gmbt/errors.hpp"
#include "gmbt/sim.hpp"

// Reference executor: speaks protocol v1 on stdin/stdout, driven by a
// declarative spec. All human-readable output goes to stderr because stdout
// is the protocol channel.
int main(int argc, char** argv) {
    CLI::App app{"Deterministic simulated system under test"};

    std::string spec_path;
    std::string log_path;
    bool check_only = false;
    int stall_after = -1;

    app.add_option("--spec", spec_path, "Simulator spec JSON")->required();
    app.add_option("--log", log_path, "Append every protocol frame to this file");
    app.add_flag("--check", check_only, "Validate the spec and exit");
    app.add_option("--stall-after", stall_after,
                   "Stop responding after this many responses (timeout testing)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    gmbt::SimSpec spec;
    try {
        spec = gmbt::load_sim_spec(spec_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    bool errors = false;
    for (const gmbt::Diagnostic& diagnostic : gmbt::validate_spec(spec, spec_path)) {
        std::cerr << gmbt::format_diagnostic(diagnostic) << "\n";
        errors = errors || diagnostic.severity == gmbt::Severity::Error;
    }
    if (errors) return 1;
    if (check_only) {
        std::cerr << spec_path << ": ok\n";
        return 0;
    }

    std::ofstream log;
    if (!log_path.empty()) {
        log.open(log_path, std::ios::binary | std::ios::app);
        if (!log) {
            std::cerr << "error: cannot open log file '" << log_path << "'\n";
            return 1;
        }
    }

    gmbt::Simulator simulator(std::move(spec));
    return gmbt::run_protocol_loop(simulator, std::cin, std::cout,
                                   log.is_open() ? &log : nullptr, stall_after);
}
