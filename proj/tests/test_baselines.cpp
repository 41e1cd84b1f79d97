#include <doctest.h>

#include "support/builders.hpp"
#include "vecfl/sched/baselines.hpp"
#include "vecfl/sched/stage2.hpp"

using namespace vecfl;

namespace {

// Dwell-feasibility under independent recomputation from raw config values.
void check_feasible(const SystemConfig& cfg, const MobilityModel& mobility,
                    const Schedule& schedule) {
    for (VehicleId n = 0; n < cfg.vehicle_count(); ++n) {
        if (!schedule.attached(n)) continue;
        double load = 0;
        for (TaskId j = 0; j < cfg.task_count(); ++j) {
            if (!schedule.assigned(n, j)) continue;
            const TaskSpec& t = cfg.tasks[j];
            double round = t.batch_size * t.cycles_per_sample / cfg.vehicles[n].cpu_freq[j] +
                           t.setup_overhead;
            load += t.edge_iters * t.local_iters * round;
        }
        double dwell = mobility.dwell_time(n, cfg.edge_servers[schedule.es_of(n)], 0.0);
        CHECK((load == 0.0 || load < dwell));
    }
}

bool same_schedule(const Schedule& a, const Schedule& b, const SystemConfig& cfg) {
    for (VehicleId n = 0; n < cfg.vehicle_count(); ++n) {
        if (a.attached(n) != b.attached(n)) return false;
        for (TaskId j = 0; j < cfg.task_count(); ++j)
            if (a.assigned(n, j) != b.assigned(n, j)) return false;
    }
    return true;
}

bool same_plan(const SequencePlan& a, const SequencePlan& b, const SystemConfig& cfg) {
    if (a.max_edge_iters() != b.max_edge_iters()) return false;
    for (VehicleId n = 0; n < cfg.vehicle_count(); ++n)
        for (int k = 1; k <= a.max_edge_iters(); ++k)
            if (a.at(n, k).order != b.at(n, k).order) return false;
    return true;
}

}  // namespace

TEST_CASE("every scheduler emits feasible, deterministic output") {
    SystemConfig cfg = testing::micro_config(7, 2, 5, 3, 2);
    cfg.hyper.iterations = 30;  // keep the test quick
    cfg.hyper.stage2_iterations = 10;
    MobilityModel mobility(cfg, 7);
    for (SchedulerKind kind : {SchedulerKind::kHeart, SchedulerKind::kTsso, SchedulerKind::kTspso,
                               SchedulerKind::kTsga, SchedulerKind::kTsgd}) {
        CAPTURE(to_string(kind));
        SchedulerOutput a = run_scheduler(kind, cfg, mobility, 0.0, 1, 7);
        check_feasible(cfg, mobility, a.schedule);
        SchedulerOutput b = run_scheduler(kind, cfg, mobility, 0.0, 1, 7);
        CHECK(same_schedule(a.schedule, b.schedule, cfg));
        CHECK(same_plan(a.sequences, b.sequences, cfg));
    }
}

TEST_CASE("tsso: nothing fits a zero dwell window") {
    SystemConfig cfg = testing::micro_config(8, 1, 2, 2, 1);
    // Vehicles racing straight through the boundary: place one on the edge
    // moving outward so the dwell is ~0.
    cfg.vehicles[0].initial_position = {0, -1000};
    cfg.vehicles[0].heading = {-1, 0};
    cfg.vehicles[0].speed = 10;
    MobilityModel mobility(cfg, 8);
    SchedulerOutput out = tsso(cfg, mobility, 0.0, 1, 8);
    // Vehicle 0 sits on the coverage boundary of ES 0 (distance exactly
    // 1000 from (-1000,-1000)); everything scheduled must still fit.
    check_feasible(cfg, mobility, out.schedule);
}

TEST_CASE("tsso sequences come from shared per-task keys") {
    SystemConfig cfg = testing::micro_config(9, 1, 4, 4, 1);
    MobilityModel mobility(cfg, 9);
    SchedulerOutput out = tsso(cfg, mobility, 0.0, 1, 9);
    // All vehicles order their assigned tasks consistently with one global
    // key order: extract pairwise order relations and check consistency.
    std::vector<std::vector<int>> before(cfg.task_count(),
                                         std::vector<int>(cfg.task_count(), 0));
    for (VehicleId n = 0; n < cfg.vehicle_count(); ++n) {
        const auto& order = out.sequences.at(n, 1).order;
        for (std::size_t a = 0; a < order.size(); ++a)
            for (std::size_t b = a + 1; b < order.size(); ++b) before[order[a]][order[b]] = 1;
    }
    for (TaskId a = 0; a < cfg.task_count(); ++a)
        for (TaskId b = 0; b < cfg.task_count(); ++b)
            CHECK(!(before[a][b] && before[b][a]));  // no contradictory orders
}

TEST_CASE("tsgd stage 2 is byte-identical to the greedy ranker") {
    SystemConfig cfg = testing::micro_config(10, 2, 5, 3, 2);
    MobilityModel mobility(cfg, 10);
    SchedulerOutput out = tsgd(cfg, mobility, 0.0, 1, 10);
    SequencePlan expect = build_sequence_plan(cfg, mobility, out.schedule, 0.0);
    CHECK(same_plan(out.sequences, expect, cfg));
}

TEST_CASE("tsgd greedy scores replay exactly") {
    SystemConfig cfg = testing::micro_config(11, 2, 4, 3, 2);
    MobilityModel mobility(cfg, 11);
    SchedulerOutput out = tsgd(cfg, mobility, 0.0, 1, 11);

    // Replay: same pick rule, recomputing scores after every pick.
    std::vector<int> counts(cfg.task_count(), 0);
    for (VehicleId n = 0; n < cfg.vehicle_count(); ++n) {
        EsId m = mobility.covering_es(n, 0.0);
        if (m < 0) {
            CHECK_FALSE(out.schedule.attached(n));
            continue;
        }
        double dwell = mobility.dwell_time(n, cfg.edge_servers[m], 0.0);
        std::vector<double> est = scheduling_time_estimates(cfg, n);
        std::vector<bool> taken(cfg.task_count(), false);
        double load = 0;
        std::vector<TaskId> picks;
        for (;;) {
            TaskId best = -1;
            double best_score = -1;
            for (TaskId j = 0; j < cfg.task_count(); ++j) {
                if (taken[j]) continue;
                double total = load + est[j];
                if (!(total == 0.0 || total < dwell)) continue;
                double score = cfg.tasks[j].weight_coeff / (1.0 + counts[j]);
                if (score > best_score) {
                    best_score = score;
                    best = j;
                }
            }
            if (best < 0) break;
            taken[best] = true;
            load += est[best];
            ++counts[best];
            picks.push_back(best);
        }
        std::vector<TaskId> got = out.schedule.tasks_of(n);
        std::sort(picks.begin(), picks.end());
        CHECK(got == picks);
    }
}

TEST_CASE("single-task instances: tsgd matches heart's schedule") {
    SystemConfig cfg = testing::micro_config(12, 2, 4, 1, 2);
    MobilityModel mobility(cfg, 12);
    SchedulerOutput a = heart(cfg, mobility, 0.0, 1, 12);
    SchedulerOutput b = tsgd(cfg, mobility, 0.0, 1, 12);
    CHECK(same_schedule(a.schedule, b.schedule, cfg));
}

TEST_CASE("tspso stage-1 fitness does not beat heart on most seeds") {
    int heart_wins = 0;
    const int trials = 30;
    for (int t = 0; t < trials; ++t) {
        SystemConfig cfg = testing::micro_config(300 + t, 2, 4, 3, 2);
        cfg.hyper.iterations = 40;
        cfg.hyper.stage2_iterations = 5;
        MobilityModel mobility(cfg, 300 + t);
        SchedulerOutput h = heart(cfg, mobility, 0.0, 1, 300 + t);
        SchedulerOutput p = tspso(cfg, mobility, 0.0, 1, 300 + t);
        double hf = 0, pf = 0;
        for (VehicleId n = 0; n < cfg.vehicle_count(); ++n) {
            if (h.schedule.attached(n)) hf += h.vehicle_fitness[n];
            if (p.schedule.attached(n)) pf += p.vehicle_fitness[n];
        }
        if (pf <= hf + 1e-9) ++heart_wins;
    }
    CHECK(heart_wins >= 21);  // >= 70%
}
