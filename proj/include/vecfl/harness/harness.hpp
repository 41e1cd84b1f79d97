#ifndef VECFL_HARNESS_HARNESS_HPP_
#define VECFL_HARNESS_HARNESS_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vecfl/core/types.hpp"

namespace vecfl {

class InstanceMismatch : public std::runtime_error {
public:
    explicit InstanceMismatch(const std::string& what) : std::runtime_error(what) {}
};

struct RunOptions {
    std::string config_path;
    std::string scheduler = "heart";  // kind name or "all"
    std::uint64_t seed = 1;
    std::string out_dir = "out";
    std::optional<int> vehicles;      // resize the fleet
    std::optional<int> tasks;         // 4 or 9 (task-cloning mode)
    std::string mode = "hybrid";      // hybrid | full-sync
    bool emit_events = false;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitIterationCap = 3;

// Applies the --vehicles / --tasks overrides deterministically.
SystemConfig apply_overrides(SystemConfig cfg, const RunOptions& opts);

// Runs the experiment suite and writes balance.csv, convergence.csv,
// makespan.csv, ntt.csv, hybrid_vs_sync.csv and run.json under out_dir.
// Returns a process exit code.
int run_experiment(const RunOptions& opts);

struct CompareResult {
    std::string table;  // printable summary
    bool ok = false;
};

// Paired per-seed deltas and win rates across >= 2 run directories with
// matching instance hashes. Throws InstanceMismatch otherwise.
CompareResult compare(const std::vector<std::string>& report_dirs);

}  // namespace vecfl

#endif  // VECFL_HARNESS_HARNESS_HPP_
