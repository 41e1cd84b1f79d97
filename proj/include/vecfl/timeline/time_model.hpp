#ifndef VECFL_TIMELINE_TIME_MODEL_HPP_
#define VECFL_TIMELINE_TIME_MODEL_HPP_

#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vecfl/core/schedule.hpp"
#include "vecfl/core/types.hpp"
#include "vecfl/mobility/mobility.hpp"

namespace vecfl {

// Absolute time comparisons throughout the timeline use this tolerance.
inline constexpr double kTimeTol = 1e-9;

class ZeroRate : public std::runtime_error {
public:
    ZeroRate() : std::runtime_error("data rate must be positive") {}
};
class TaskNotAssigned : public std::runtime_error {
public:
    TaskNotAssigned() : std::runtime_error("task not assigned to this vehicle") {}
};
class EmptyAssignment : public std::runtime_error {
public:
    EmptyAssignment() : std::runtime_error("no vehicles assigned under this ES") {}
};
class WrongIterationCount : public std::runtime_error {
public:
    WrongIterationCount() : std::runtime_error("per-iteration list must have exactly K entries") {}
};

// Whether a finished task's upload and the wait for the next model are
// hidden behind the next task's training (immediate) or spent on the clock
// (delayed).
enum class ExecutionCase { kImmediate, kDelayed };

// --- elementary latency quantities -------------------------------------

// One SGD round: |B| * c / f + b.
double local_round_time(const TaskSpec& task, const VehicleSpec& vehicle);

// All H local rounds of one edge iteration.
double task_training_time(const TaskSpec& task, const VehicleSpec& vehicle);

// Model transfer to the ES at the given rate.
double v2e_upload_time(const TaskSpec& task, double rate_bps);

// Wait before a task can start: how long the fresh edge model lags behind
// the end of the previously executed task. Clamped at zero.
double inactive_time(double others_end_max, double own_prev_end);
double inactive_time(std::span<const double> others_end, double own_prev_end);

// Non-task-training time of one cell.
double ntt_time(ExecutionCase c, double upload, double inactive);

// Completion of task j within one edge iteration: prefix sum of per-task
// totals over the training sequence up to and including j.
double end_time(const TrainingSequence& seq, const std::map<TaskId, double>& totals, TaskId j);

// Synchronous edge aggregation instant: the last assigned vehicle's end.
double es_edge_iteration_time(std::span<const double> end_times);

// One full global round at an ES: backhaul upload plus the per-iteration
// durations of all K edge iterations.
double es_global_round_time(const TaskSpec& task, std::span<const double> per_iteration,
                            const EdgeServerSpec& es);

// Objective value: the slowest (task, quorum-ES) completion.
double global_objective(const std::map<std::pair<TaskId, EsId>, double>& per_task_per_es);

// --- closed-form round evaluation ---------------------------------------

// Timing of one (es, vehicle, task, edge-iteration) cell. `total` always
// equals train_time + ntt exactly (stored, not recomputed).
struct CellTiming {
    EsId m = 0;
    VehicleId n = 0;
    TaskId j = 0;
    int k = 1;  // 1-based edge iteration
    double start = 0;        // training start
    double train_time = 0;
    double upload_time = 0;  // sampled at the upload instant in either case
    double inactive = 0;
    ExecutionCase exec_case = ExecutionCase::kDelayed;
    double ntt = 0;
    double total = 0;
    double end = 0;          // when the ES holds this local model
};

// Closed-form timeline of one global round: every latency quantity plus
// aggregation instants, evaluated per ES by a layer sweep over edge
// iterations (the cross-layer upload-absorption decisions are resolved by a
// pessimistic fixed point, which matches the event simulator's causal
// order).
struct RoundTimeline {
    double round_start = 0;
    std::vector<CellTiming> cells;  // ascending (m, n, k, sequence position)

    // Aggregation instants per (es, task): entry [k-1] is absolute time.
    std::map<std::pair<EsId, TaskId>, std::vector<double>> es_agg;
    // Cloud-server arrival per (es, task): last aggregation + backhaul.
    std::map<std::pair<EsId, TaskId>, double> cs_arrival;

    // Per task: arrivals sorted by (time, es), quorum instant (Q-th arrival)
    // and full-sync instant (last arrival). Tasks nobody trains have
    // participating_es == 0 and times of 0.
    std::vector<std::vector<std::pair<double, EsId>>> arrivals;
    std::vector<int> participating_es;
    std::vector<bool> quorum_shortfall;  // fewer ESs ran the task than Q
    std::vector<double> cloud_quorum_time;
    std::vector<double> cloud_full_time;

    double objective_hybrid = 0;    // max_j quorum instant - round_start
    double objective_full_sync = 0; // max_j last instant - round_start
};

RoundTimeline evaluate_round_timeline(const SystemConfig& cfg, const MobilityModel& mobility,
                                      const Schedule& schedule, const SequencePlan& plan,
                                      double round_start);

// Flat CSV of the cells (one row per (m,n,j,k)), 1-based ids.
std::string cells_to_csv(const std::vector<CellTiming>& cells);

}  // namespace vecfl

#endif  // VECFL_TIMELINE_TIME_MODEL_HPP_
