#ifndef VECFL_SCHED_STAGE1_HPP_
#define VECFL_SCHED_STAGE1_HPP_

#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "vecfl/core/rng.hpp"
#include "vecfl/core/schedule.hpp"
#include "vecfl/core/types.hpp"
#include "vecfl/mobility/mobility.hpp"

namespace vecfl {

class InvalidCrossoverPoint : public std::runtime_error {
public:
    InvalidCrossoverPoint() : std::runtime_error("crossover point must satisfy 1 < r < J") {}
};

inline constexpr double kInfeasibleFitness = -std::numeric_limits<double>::infinity();

// Scheduling-time estimate of the total on-clock training a vehicle would
// spend on each task over a full global round (all K edge iterations).
std::vector<double> scheduling_time_estimates(const SystemConfig& cfg, VehicleId n);

// Whether a per-round training load fits a dwell window. An empty load is
// always feasible.
bool fits_dwell(double total_time, double dwell);

struct FitnessContext {
    std::span<const double> est_times;  // per task, whole-round estimate
    std::span<const double> rho;        // per task weight coefficient
    std::span<const int> counts;        // assignments fixed by earlier vehicles
    double xi3 = 0;
    double chi = 0;
    double dwell = 0;
    PsiMode psi_mode = PsiMode::kRunningCount;
};

// Per-vehicle fitness: number of assigned tasks minus the balance penalty;
// the infeasible sentinel when the load does not fit the dwell window.
double fitness(std::span<const std::uint8_t> assignment, const FitnessContext& ctx);

// Linearly decaying inertia weight.
double inertia(int tau, const HyperParams& hyper);

// One particle's velocity update (component-wise pulls toward the particle
// and swarm bests), clamped to [-v_max, v_max].
std::vector<double> velocity_update(std::span<const double> velocity,
                                    std::span<const std::uint8_t> position,
                                    std::span<const std::uint8_t> local_best,
                                    std::span<const std::uint8_t> global_best, double pi_tau,
                                    double xi4, double xi5, double v_max);

// Sigmoid assignment probability.
double assignment_prob(double velocity);

// 1 iff the draw falls at or below the probability.
std::uint8_t binarize(double prob, double e1);

// Single-point crossover; offspring swap tails at r (0 < boundary semantics:
// offspring1 = a[0:r] ++ b[r:J]).
std::pair<std::vector<std::uint8_t>, std::vector<std::uint8_t>> crossover(
    std::span<const std::uint8_t> a, std::span<const std::uint8_t> b, int r);

// Adaptive mutation rate phi_max / (1 + ln(1 + tau)).
double mutation_rate(int tau, double phi_max);

// Flip when the draw is strictly below the rate.
std::uint8_t mutate(std::uint8_t bit, double e2, double phi_tau);

// Drops the assigned task with the longest estimated training time until the
// load fits the dwell window.
std::vector<std::uint8_t> repair(std::vector<std::uint8_t> assignment,
                                 std::span<const double> est_times, double dwell);

// Variants reused by the traditional-PSO baseline.
struct Stage1Options {
    bool use_ga = true;
    bool adaptive_inertia = true;
};

struct Stage1Trace {
    // One series per vehicle, in processing order: f_global after each
    // iteration.
    std::vector<VehicleId> vehicles;
    std::vector<std::vector<double>> best_fitness;
};

struct Stage1Result {
    Schedule schedule;
    // Fitness of each vehicle's emitted assignment, evaluated against the
    // counts it saw; used by the paired-oracle checks.
    std::vector<double> vehicle_fitness;
    std::vector<int> final_counts;
};

// Runs the per-vehicle swarm search in ascending vehicle id, threading the
// shared assignment counts through. Vehicles outside every ES coverage are
// skipped. RNG substreams derive from (seed, stage tag, g, vehicle).
Stage1Result run_stage1(const SystemConfig& cfg, const MobilityModel& mobility, double round_start,
                        int g, std::uint64_t seed, const Stage1Options& opts = {},
                        Stage1Trace* trace = nullptr);

}  // namespace vecfl

#endif  // VECFL_SCHED_STAGE1_HPP_
