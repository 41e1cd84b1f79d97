#include "vecfl/core/validate.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vecfl/mobility/mobility.hpp"
#include "vecfl/timeline/time_model.hpp"

namespace vecfl {

namespace {

void add(ValidationResult& r, const std::string& code, const std::string& msg) {
    r.violations.push_back({code, msg});
}

std::string tag(const char* what, int id) {
    return std::string(what) + " " + std::to_string(id + 1);
}

}  // namespace

ValidationResult validate_config(const SystemConfig& cfg) {
    ValidationResult r;
    const int J = cfg.task_count();
    const int N = cfg.vehicle_count();
    const int M = cfg.es_count();

    if (J == 0) add(r, "EMPTY_TASKS", "at least one task is required");
    if (N == 0) add(r, "EMPTY_VEHICLES", "at least one vehicle is required");
    if (M == 0) add(r, "EMPTY_EDGE_SERVERS", "at least one edge server is required");

    for (int j = 0; j < J; ++j) {
        const TaskSpec& t = cfg.tasks[j];
        if (t.local_iters < 1) add(r, "LOCAL_ITERS_LT1", tag("task", j));
        if (t.edge_iters < 1) add(r, "EDGE_ITERS_LT1", tag("task", j));
        if (t.cloud_quorum < 1) add(r, "QUORUM_NONPOSITIVE", tag("task", j));
        if (M > 0 && t.cloud_quorum > M) add(r, "QUORUM_EXCEEDS_M", tag("task", j));
        if (t.model_size_v2e <= 0 || t.model_size_e2c <= 0)
            add(r, "MODEL_SIZE_NONPOSITIVE", tag("task", j));
        if (t.cycles_per_sample <= 0) add(r, "CYCLES_NONPOSITIVE", tag("task", j));
        if (t.setup_overhead < 0) add(r, "SETUP_NEGATIVE", tag("task", j));
        if (t.batch_size < 1) add(r, "BATCH_NONPOSITIVE", tag("task", j));
        if (t.learning_rate <= 0) add(r, "LEARNING_RATE_NONPOSITIVE", tag("task", j));
        if (t.blend_alpha < 0 || t.blend_alpha > 1) add(r, "ALPHA_OUT_OF_RANGE", tag("task", j));
        if (t.conv_threshold <= 0) add(r, "CONV_THRESHOLD_NONPOSITIVE", tag("task", j));
        if (t.weight_coeff < 0) add(r, "WEIGHT_COEFF_NEGATIVE", tag("task", j));
        if (t.model_dim < 1) add(r, "MODEL_DIM_NONPOSITIVE", tag("task", j));
        if (t.noise_sigma < 0) add(r, "NOISE_NEGATIVE", tag("task", j));
        if (t.target_distance < 0) add(r, "TARGET_NEGATIVE", tag("task", j));
    }

    for (int m = 0; m < M; ++m) {
        const EdgeServerSpec& es = cfg.edge_servers[m];
        if (es.coverage_radius <= 0) add(r, "COVERAGE_RADIUS_NONPOSITIVE", tag("es", m));
        if (es.e2c_rate <= 0) add(r, "E2C_RATE_NONPOSITIVE", tag("es", m));
    }

    if (cfg.roads.segments.empty()) {
        add(r, "EMPTY_ROADS", "road network has no segments");
    }
    for (std::size_t s = 0; s < cfg.roads.segments.size(); ++s) {
        const RoadSegment& seg = cfg.roads.segments[s];
        bool horizontal = std::abs(seg.a.y - seg.b.y) <= 1e-6;
        bool vertical = std::abs(seg.a.x - seg.b.x) <= 1e-6;
        if (horizontal == vertical)  // both (degenerate) or neither (diagonal)
            add(r, "ROAD_NOT_AXIS_ALIGNED", tag("segment", static_cast<int>(s)));
    }

    bool net_ok = !cfg.roads.segments.empty() && !r.has("ROAD_NOT_AXIS_ALIGNED");
    if (net_ok) {
        RoadNetwork net(cfg.roads);
        for (const Point& p : cfg.roads.intersections) {
            bool found = false;
            for (const Point& q : net.intersections())
                if (std::hypot(p.x - q.x, p.y - q.y) <= 1e-3) found = true;
            if (!found) add(r, "INTERSECTION_NOT_ON_ROADS", "listed intersection is not a crossing");
        }
        for (const Point& q : net.intersections()) {
            if (net.edges_at(net.locate(q, {0, 0}).node).size() < 2)
                add(r, "INTERSECTION_DEGENERATE", "crossing with fewer than 2 outgoing directions");
        }
        for (int n = 0; n < N; ++n) {
            if (!net.on_road(cfg.vehicles[n].initial_position))
                add(r, "VEHICLE_OFF_ROAD", tag("vehicle", n));
        }
    }

    for (int n = 0; n < N; ++n) {
        const VehicleSpec& v = cfg.vehicles[n];
        if (v.home_es < 0 || v.home_es >= M) add(r, "HOME_ES_INVALID", tag("vehicle", n));
        if (v.speed < 0) add(r, "SPEED_NEGATIVE", tag("vehicle", n));
        if (static_cast<int>(v.cpu_freq.size()) != J)
            add(r, "CPU_FREQ_SIZE_MISMATCH", tag("vehicle", n));
        if (static_cast<int>(v.dataset_size.size()) != J)
            add(r, "DATASET_SIZE_MISMATCH", tag("vehicle", n));
        for (std::size_t j = 0; j < v.cpu_freq.size(); ++j) {
            if (v.cpu_freq[j] < 1e9 || v.cpu_freq[j] > 1e10)
                add(r, "CPU_FREQ_OUT_OF_RANGE", tag("vehicle", n) + " task " + std::to_string(j + 1));
        }
        for (std::size_t j = 0; j < v.dataset_size.size() && j < cfg.tasks.size(); ++j) {
            if (v.dataset_size[j] < cfg.tasks[j].batch_size)
                add(r, "DATASET_SMALLER_THAN_BATCH",
                    tag("vehicle", n) + " task " + std::to_string(j + 1));
        }
    }

    const ChannelParams& ch = cfg.channel;
    if (ch.bandwidth <= 0 || ch.snr_ref <= 0) add(r, "CHANNEL_PARAM_NONPOSITIVE", "channel");
    if (ch.pathloss_exponent < 2.0 || ch.pathloss_exponent > 4.0)
        add(r, "PATHLOSS_OUT_OF_RANGE", "channel");

    const HyperParams& h = cfg.hyper;
    if (h.xi1 < 1 || h.xi2 < 1) add(r, "XI_NONPOSITIVE", "xi1/xi2 must be positive integers");
    if (h.xi3 < 0) add(r, "XI3_NEGATIVE", "hyper");
    if (h.xi7 < 0 || h.xi7 > 1) add(r, "XI7_OUT_OF_RANGE", "hyper");
    if (h.particles < 1) add(r, "PARTICLES_NONPOSITIVE", "hyper");
    if (h.iterations < 0) add(r, "ITERATIONS_NEGATIVE", "hyper");
    if (h.pi_min < 0 || h.pi_max < h.pi_min) add(r, "PI_BOUNDS_INVALID", "hyper");
    if (h.phi_max < 0 || h.phi_max > 1) add(r, "PHI_OUT_OF_RANGE", "hyper");
    if (h.v_max <= 0) add(r, "VMAX_NONPOSITIVE", "hyper");
    if (h.crossover_policy == CrossoverPointPolicy::kFixed && J >= 3 &&
        (h.crossover_point <= 1 || h.crossover_point >= J))
        add(r, "CROSSOVER_POINT_INVALID", "fixed crossover point must satisfy 1 < r < J");
    if (h.tsso_max_attempts < 1) add(r, "TSSO_ATTEMPTS_NONPOSITIVE", "hyper");
    if (h.tournament_size < 1) add(r, "TOURNAMENT_NONPOSITIVE", "hyper");
    if (h.ga_crossover_rate < 0 || h.ga_crossover_rate > 1)
        add(r, "GA_CROSSOVER_RATE_OUT_OF_RANGE", "hyper");
    if (h.stage2_particles < 1 || h.stage2_iterations < 0)
        add(r, "STAGE2_BUDGET_INVALID", "hyper");
    if (h.iteration_cap < 1) add(r, "ITERATION_CAP_NONPOSITIVE", "hyper");
    if (h.chi < 0) add(r, "CHI_NEGATIVE", "hyper");
    if (h.xi6 < 0) add(r, "XI6_NEGATIVE", "hyper");

    return r;
}

void finalize_defaults(SystemConfig& cfg) {
    const int J = cfg.task_count();
    const int N = cfg.vehicle_count();
    if (J == 0 || N == 0) return;

    if (cfg.hyper.chi <= 0) {
        cfg.hyper.chi = std::max(1.0, std::round(static_cast<double>(N) / J));
    }

    // Whole-round training-time estimate per task, averaged over vehicles.
    std::vector<double> est(J, 0.0);
    for (int j = 0; j < J; ++j) {
        double sum = 0;
        for (int n = 0; n < N; ++n)
            sum += cfg.tasks[j].edge_iters * task_training_time(cfg.tasks[j], cfg.vehicles[n]);
        est[j] = sum / N;
    }
    double mean_est = 0;
    for (double e : est) mean_est += e;
    mean_est /= J;

    for (int j = 0; j < J; ++j) {
        if (cfg.tasks[j].weight_coeff <= 0) {
            double rho = mean_est > 0 ? est[j] / mean_est : 1.0;
            cfg.tasks[j].weight_coeff = std::clamp(rho, 0.5, 2.0);
        }
    }

    if (cfg.hyper.xi6 <= 0) {
        // Scale the upload score to the level of a typical overlap score:
        // expected vehicles per (task, ES) give the pair count, and the mean
        // inverse upload time at the initial positions gives the raw scale.
        double inv_sum = 0;
        int inv_count = 0;
        for (int n = 0; n < N; ++n) {
            const VehicleSpec& v = cfg.vehicles[n];
            const EdgeServerSpec& es = cfg.edge_servers[std::clamp(v.home_es, 0, cfg.es_count() - 1)];
            for (int j = 0; j < J; ++j) {
                double rate = v2e_rate(v.initial_position, es, cfg.channel);
                if (rate > 0) {
                    inv_sum += rate / cfg.tasks[j].model_size_v2e;
                    ++inv_count;
                }
            }
        }
        double mean_inv = inv_count > 0 ? inv_sum / inv_count : 1.0;
        double per_es = std::max(1.0, std::round(cfg.hyper.chi / std::max(1, cfg.es_count())));
        double pairs = std::max(1.0, per_es * (per_es - 1.0) / 2.0);
        cfg.hyper.xi6 = mean_inv > 0 ? pairs / mean_inv : 1.0;
    }
}

}  // namespace vecfl
