#ifndef VECFL_SIM_SIMULATOR_HPP_
#define VECFL_SIM_SIMULATOR_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vecfl/core/schedule.hpp"
#include "vecfl/core/types.hpp"
#include "vecfl/fl/kernel.hpp"
#include "vecfl/mobility/mobility.hpp"
#include "vecfl/timeline/time_model.hpp"

namespace vecfl {

class InfeasibleSchedule : public std::runtime_error {
public:
    explicit InfeasibleSchedule(VehicleId n)
        : std::runtime_error("scheduled load of vehicle " + std::to_string(n + 1) +
                             " exceeds its dwell time") {}
};

enum class AggregationMode { kHybrid, kFullSync };

enum class EventKind {
    kTrainDone,
    kUploadDone,
    kEdgeAggregated,
    kEdgeBroadcast,
    kCloudAggregated,
    kCloudBroadcast,
};

const char* to_string(EventKind k);

struct Event {
    double t = 0;
    EventKind kind = EventKind::kTrainDone;
    EsId m = -1;
    VehicleId n = -1;
    TaskId j = -1;
    int k = 0;
    int g = 0;
};

// Learning state carried across global rounds: one synthetic problem and one
// global model per task, plus lazily generated data shards.
class FlState {
public:
    FlState(const SystemConfig& cfg, std::uint64_t seed);

    const SyntheticTask& task(TaskId j) const { return tasks_.at(j); }
    const SyntheticTask::Shard& shard(TaskId j, VehicleId n);
    ModelVector& global(TaskId j) { return global_.at(j); }
    const ModelVector& global(TaskId j) const { return global_.at(j); }
    const ModelVector& prev_global(TaskId j) const { return prev_global_.at(j); }
    void set_global(TaskId j, ModelVector m);

    // Straggler edge models parked for the next round (buffer policy only).
    std::vector<ModelVector>& buffered(TaskId j) { return buffered_.at(j); }

    // Distance of the current global model to the generating weights.
    double distance_to_truth(TaskId j) const;

private:
    const SystemConfig* cfg_;
    std::uint64_t seed_;
    std::vector<SyntheticTask> tasks_;
    std::vector<ModelVector> global_;
    std::vector<ModelVector> prev_global_;
    std::vector<std::vector<ModelVector>> buffered_;
    std::map<std::pair<TaskId, VehicleId>, SyntheticTask::Shard> shards_;
};

struct TimelineReport {
    double round_start = 0;
    int g = 0;
    AggregationMode mode = AggregationMode::kHybrid;

    std::vector<CellTiming> cells;
    std::vector<Event> events;

    std::map<std::pair<EsId, TaskId>, std::vector<double>> es_agg;
    std::map<std::pair<EsId, TaskId>, double> cs_arrival;

    // Cloud completion per task under the active mode; absolute instants.
    std::vector<std::vector<std::pair<double, EsId>>> arrivals;
    std::vector<int> participating_es;
    std::vector<bool> quorum_shortfall;
    std::vector<double> cloud_time;          // 0 when the task did not run
    std::vector<std::vector<EsId>> quorum;   // aggregated ESs, arrival order
    std::vector<int> discarded_stragglers;   // late edge models per task

    double objective = 0;      // max cloud_time - round_start over ran tasks
    double round_end = 0;      // quiescence (all activity done)

    // Non-task-training aggregates per ES over this round's cells.
    std::vector<double> antt;
    std::vector<double> lntt;

    std::vector<int> counts_per_task;
    int dwell_overruns = 0;    // vehicles whose realized work exceeded dwell
};

// Event-driven execution of one global round. `models` may be null for a
// timeline-only run; when present, local training, edge aggregation and the
// quorum cloud aggregation are executed on it. The schedule must satisfy the
// dwell constraint (checked; throws InfeasibleSchedule).
TimelineReport run_round(const SystemConfig& cfg, const MobilityModel& mobility,
                         const Schedule& schedule, const SequencePlan& plan, int g,
                         double round_start, AggregationMode mode, FlState* models,
                         std::uint64_t seed);

struct RoundRecord {
    int g = 0;
    SchedulerKind scheduler = SchedulerKind::kHeart;
    double start = 0;
    double objective = 0;
    std::vector<int> counts;
    std::vector<bool> task_active;
    std::vector<double> cloud_time;     // absolute; 0 for inactive tasks
    std::vector<bool> within_balance;   // per task, balance-bound check
    std::vector<double> antt;           // per ES
    std::vector<double> lntt;
    std::vector<double> movement;       // per task ||g - g_prev||
    std::vector<double> dist_to_truth;  // per task
};

struct ExperimentResult {
    SchedulerKind scheduler = SchedulerKind::kHeart;
    AggregationMode mode = AggregationMode::kHybrid;
    std::uint64_t seed = 0;
    std::vector<RoundRecord> rounds;
    // Per task: wall-clock instant of the convergence-criterion round, the
    // round count, and the instant the distance target was first met.
    std::vector<double> completion_time;
    std::vector<int> rounds_used;
    std::vector<bool> converged;
    std::vector<double> target_time;    // -1 when never reached
    std::vector<bool> target_reached;
    std::vector<double> final_distance;
    std::vector<bool> converged_far_from_optimum;  // criterion met, target not
    double total_makespan = 0;   // last cloud broadcast of the last task
    bool iteration_cap_hit = false;
};

// Repeats schedule -> rank -> round -> convergence checks until every task
// converges or the iteration cap is reached. Converged tasks stop being
// scheduled.
ExperimentResult run_until_convergence(const SystemConfig& cfg, SchedulerKind scheduler,
                                       std::uint64_t seed,
                                       AggregationMode mode = AggregationMode::kHybrid);

// Newline-delimited JSON records {t, kind, m, n, j, k, g}; 1-based ids.
std::string events_to_ndjson(const std::vector<Event>& events);
// Structured JSON summary of a round.
std::string report_to_json(const TimelineReport& report);

}  // namespace vecfl

#endif  // VECFL_SIM_SIMULATOR_HPP_
