#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vecfl/harness/harness.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Multi-model hierarchical FL scheduling simulator"};
    app.require_subcommand(1);

    vecfl::RunOptions opts;
    int vehicles = 0;
    int tasks = 0;
    CLI::App* run = app.add_subcommand("run", "Run a seeded experiment and emit CSV metrics");
    run->add_option("--config", opts.config_path, "Config JSON path")->required();
    run->add_option("--scheduler", opts.scheduler, "heart|tsso|tspso|tsga|tsgd|all");
    run->add_option("--seed", opts.seed, "Experiment seed");
    run->add_option("--out", opts.out_dir, "Output directory");
    run->add_option("--vehicles", vehicles, "Override the fleet size");
    run->add_option("--tasks", tasks, "Task count (supported: the configured count, or 9)");
    run->add_option("--mode", opts.mode, "hybrid|full-sync");
    run->add_flag("--events", opts.emit_events, "Also dump one fully logged round per scheduler");

    std::vector<std::string> dirs;
    CLI::App* cmp = app.add_subcommand("compare", "Paired comparison of run directories");
    cmp->add_option("dirs", dirs, "Two or more run directories")->expected(-1);

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) {
        if (vehicles > 0) opts.vehicles = vehicles;
        if (tasks > 0) opts.tasks = tasks;
        return vecfl::run_experiment(opts);
    }
    if (cmp->parsed()) {
        try {
            vecfl::CompareResult res = vecfl::compare(dirs);
            std::cout << res.table;
            return 0;
        } catch (const vecfl::InstanceMismatch& e) {
            std::cerr << "compare error: " << e.what() << "\n";
            return vecfl::kExitConfigError;
        }
    }
    return 0;
}
