// driftfb <scenario> --config <file> [--out <dir>] [--plots] [--workers N]

#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "driftfb/errors.hpp"
#include "driftfb/experiment.hpp"

using namespace driftfb;

namespace {

int run(const std::string& scenario, const std::string& config_path, std::string out, bool plots, unsigned workers) {
    ExperimentConfig config;
    try {
        config = load_experiment_config(config_path);
        if (to_string(config.scenario) != scenario) {
            throw ConfigError("config declares scenario '" + to_string(config.scenario) + "' but '" + scenario +
                              "' was requested");
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_code(RunStatus::config_error);
    }
    const std::filesystem::path dir = out.empty() ? default_output_dir() : std::filesystem::path(out);

    RunReport report;
    try {
        report = run_scenario(config, {workers, plots});
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_code(RunStatus::config_error);
    } catch (const InvalidInput& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_code(RunStatus::config_error);
    }
    try {
        write_report(report, dir, {plots});
    } catch (const std::exception& e) {
        std::cerr << "cannot write the report: " << e.what() << "\n";
        return exit_code(RunStatus::analysis_error);
    }

    for (const auto& c : report.checks) {
        std::printf("%-4s %s = %.6g (%s %.6g)%s%s\n", c.pass ? "PASS" : "FAIL", c.name.c_str(), c.value,
                    c.relation.c_str(), c.threshold, c.detail.empty() ? "" : "  ", c.detail.c_str());
    }
    for (const auto& n : report.notes) std::printf("note: %s\n", n.c_str());
    if (!report.error.empty()) std::fprintf(stderr, "error: %s\n", report.error.c_str());
    std::printf("%s: %s -> %s\n", scenario.c_str(), to_string(report.status).c_str(), dir.string().c_str());
    return exit_code(report.status);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Nonlocal obstacle problems with drift: solves, free-boundary fits and barrier checks"};
    app.require_subcommand(1);
    std::string config, out;
    bool plots = false;
    unsigned workers = 1;
    std::string chosen;
    for (const char* name : {"solve", "sweep-drift", "verify-identity", "chi", "barrier", "convergence"}) {
        auto* sub = app.add_subcommand(name, std::string("run the ") + name + " scenario");
        sub->add_option("--config", config, "scenario config file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out, "output directory (default $DRIFTFB_OUT or ./driftfb-out)");
        sub->add_flag("--plots", plots, "also write SVG plots");
        sub->add_option("--workers", workers, "concurrent workers")->check(CLI::Range(1u, 256u));
        sub->callback([&chosen, name] { chosen = name; });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_code(RunStatus::config_error);
    }
    return run(chosen, config, out, plots, workers);
}
