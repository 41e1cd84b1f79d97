#ifndef VECFL_SCHED_STAGE2_HPP_
#define VECFL_SCHED_STAGE2_HPP_

#include <span>
#include <vector>

#include "vecfl/core/schedule.hpp"
#include "vecfl/core/types.hpp"
#include "vecfl/mobility/mobility.hpp"

namespace vecfl {

// Unordered pairs of covered vehicles assigned task j whose sequences would
// give j the same rank if it were appended now.
int overlap_score(const Schedule& schedule, std::span<const TrainingSequence> partial, TaskId j,
                  EsId m);

// xi6 / predicted upload time at the given position.
double upload_score(const TaskSpec& task, Point vehicle_pos, const EdgeServerSpec& es,
                    const ChannelParams& ch, double xi6);

// xi7-weighted blend of the overlap score and the summed upload scores.
double aggregate_score(int s_lap, std::span<const double> s_ups, double xi7);

// Greedy rank determination for one (es, edge iteration): repeatedly append
// the task with the highest aggregate score to the sequences of every
// vehicle that trains it. Ties keep the lowest task id. Returns sequences
// indexed by vehicle id (empty for vehicles outside this ES).
std::vector<TrainingSequence> greedy_rank(const SystemConfig& cfg, const MobilityModel& mobility,
                                          const Schedule& schedule, EsId m, int k,
                                          double round_start);

// Complete per-(vehicle, k) plan across all ESs.
SequencePlan build_sequence_plan(const SystemConfig& cfg, const MobilityModel& mobility,
                                 const Schedule& schedule, double round_start);

}  // namespace vecfl

#endif  // VECFL_SCHED_STAGE2_HPP_
