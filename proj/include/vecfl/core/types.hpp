#ifndef VECFL_CORE_TYPES_HPP_
#define VECFL_CORE_TYPES_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace vecfl {

// Indices are 0-based internally; reports and serialized artifacts use
// 1-based ids to match the usual scheduling notation.
using TaskId = int;
using VehicleId = int;
using EsId = int;

struct Point {
    double x = 0.0;
    double y = 0.0;
};

// One ML training task. Sizes are bits, times seconds, frequencies Hz.
struct TaskSpec {
    TaskId id = 0;
    int local_iters = 1;        // SGD rounds per edge iteration
    int edge_iters = 1;         // edge iterations per global iteration
    int cloud_quorum = 1;       // edge models required before cloud aggregation
    double model_size_v2e = 0;  // local model upload size, bits
    double model_size_e2c = 0;  // edge model upload size, bits
    double cycles_per_sample = 0;
    double setup_overhead = 0;  // per-round constant (model staging), seconds
    int batch_size = 1;
    double learning_rate = 0;
    double blend_alpha = 0;     // weight of the previous global model
    double conv_threshold = 0;  // L2 movement threshold ending global iterations
    double weight_coeff = 0;    // scheduling weight; 0 = derive from training time
    // Synthetic learning problem attached to the task.
    int model_dim = 8;
    double noise_sigma = 0.05;
    double target_distance = 0; // harness time-to-target threshold; 0 = unused
};

struct VehicleSpec {
    VehicleId id = 0;
    EsId home_es = 0;
    std::vector<double> cpu_freq;      // per task, Hz
    std::vector<int> dataset_size;     // per task, samples
    Point initial_position;
    double speed = 0;                  // m/s, constant
    Point heading;                     // unit direction along the starting road
};

struct EdgeServerSpec {
    EsId id = 0;
    Point position;
    double coverage_radius = 0;  // meters
    double e2c_rate = 0;         // bits/second, time-invariant backhaul
};

struct RoadSegment {
    Point a;
    Point b;
};

// Axis-aligned road grid. Intersections are derived from segment geometry;
// listing them in the config is optional and only cross-checked.
struct RoadNetworkConfig {
    std::vector<RoadSegment> segments;
    std::vector<Point> intersections;
};

struct ChannelParams {
    double bandwidth = 0;               // Hz
    double snr_ref = 0;                 // SNR at 1 m, dimensionless
    double pathloss_exponent = 2.0;     // in [2, 4]
};

enum class CrossoverPointPolicy { kFixed, kUniformRandom };
enum class StragglerPolicy { kDiscard, kBufferNextRound };
enum class PsiMode { kRunningCount, kBinary };

// Scheduler hyperparameters. Values of 0 (or negative) for chi / xi6 /
// weight_coeff mean "derive from the instance" during finalize_defaults().
struct HyperParams {
    int xi1 = 2;                 // balance lower-bound slack, positive integer
    int xi2 = 2;                 // balance upper-bound slack, positive integer
    double xi3 = 3.5;            // balance penalty factor in the fitness
    double xi4 = 1.5;            // cognitive pull
    double xi5 = 1.5;            // social pull
    double xi6 = 0;              // upload-score scale; 0 = calibrate
    double xi7 = 0.6;            // overlap vs upload blend
    double chi = 0;              // target assignments per task; 0 = N/J rounded
    double pi_max = 0.9;
    double pi_min = 0.4;
    int particles = 30;          // p*
    int iterations = 100;        // tau*
    double phi_max = 0.3;        // initial mutation rate
    double v_max = 4.0;          // velocity clamp
    CrossoverPointPolicy crossover_policy = CrossoverPointPolicy::kFixed;
    int crossover_point = 2;     // used by the fixed policy
    PsiMode psi_mode = PsiMode::kRunningCount;
    // Baseline knobs.
    int tsso_max_attempts = 50;        // gamma
    int tournament_size = 3;
    double ga_crossover_rate = 0.8;
    int stage2_particles = 12;         // random-key optimizers (TSPSO/TSGA)
    int stage2_iterations = 30;
    // Simulator knobs.
    StragglerPolicy straggler_policy = StragglerPolicy::kDiscard;
    int iteration_cap = 60;            // max global iterations per task
};

struct SystemConfig {
    std::vector<TaskSpec> tasks;
    std::vector<VehicleSpec> vehicles;
    std::vector<EdgeServerSpec> edge_servers;
    RoadNetworkConfig roads;
    ChannelParams channel;
    HyperParams hyper;
    std::uint64_t seed = 0;

    int task_count() const { return static_cast<int>(tasks.size()); }
    int vehicle_count() const { return static_cast<int>(vehicles.size()); }
    int es_count() const { return static_cast<int>(edge_servers.size()); }
};

}  // namespace vecfl

#endif  // VECFL_CORE_TYPES_HPP_
