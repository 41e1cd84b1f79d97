#ifndef VECFL_SCHED_BASELINES_HPP_
#define VECFL_SCHED_BASELINES_HPP_

#include <cstdint>
#include <optional>
#include <string>

#include "vecfl/core/schedule.hpp"
#include "vecfl/core/types.hpp"
#include "vecfl/mobility/mobility.hpp"

namespace vecfl {

struct SchedulerOutput {
    Schedule schedule;
    SequencePlan sequences;
    // Stage-1 fitness per vehicle where the scheduler has one (HEART,
    // TSPSO, TSGA); used by paired comparisons.
    std::vector<double> vehicle_fitness;
};

// Random feasible assignments (rejection sampling with repair fallback);
// ranks from shared per-task random keys.
SchedulerOutput tsso(const SystemConfig& cfg, const MobilityModel& mobility, double round_start,
                     int g, std::uint64_t seed);

// Traditional binary PSO (constant inertia, no GA step); ranks from a
// random-key PSO per (es, iteration).
SchedulerOutput tspso(const SystemConfig& cfg, const MobilityModel& mobility, double round_start,
                      int g, std::uint64_t seed);

// Generational GA with tournament selection and elitism; ranks from a
// random-key GA per (es, iteration).
SchedulerOutput tsga(const SystemConfig& cfg, const MobilityModel& mobility, double round_start,
                     int g, std::uint64_t seed);

// Greedy assignment by weight / (1 + allocation count); ranks via the same
// greedy stage used by HEART.
SchedulerOutput tsgd(const SystemConfig& cfg, const MobilityModel& mobility, double round_start,
                     int g, std::uint64_t seed);

// HEART itself plus the dispatch used by the simulator and harness.
SchedulerOutput heart(const SystemConfig& cfg, const MobilityModel& mobility, double round_start,
                      int g, std::uint64_t seed);
SchedulerOutput run_scheduler(SchedulerKind kind, const SystemConfig& cfg,
                              const MobilityModel& mobility, double round_start, int g,
                              std::uint64_t seed);

std::optional<SchedulerKind> scheduler_from_string(const std::string& name);

}  // namespace vecfl

#endif  // VECFL_SCHED_BASELINES_HPP_
