#include "vecfl/sched/stage2.hpp"

#include <algorithm>
#include <limits>

#include "vecfl/timeline/time_model.hpp"

namespace vecfl {

int overlap_score(const Schedule& schedule, std::span<const TrainingSequence> partial, TaskId j,
                  EsId m) {
    // Appending j gives it rank len(lambda)+1 on each vehicle that trains
    // it; pairs with equal current length would overlap.
    std::vector<VehicleId> holders = schedule.vehicles_of(m, j);
    int pairs = 0;
    for (std::size_t a = 0; a < holders.size(); ++a)
        for (std::size_t b = a + 1; b < holders.size(); ++b)
            if (partial[holders[a]].length() == partial[holders[b]].length()) ++pairs;
    return pairs;
}

double upload_score(const TaskSpec& task, Point vehicle_pos, const EdgeServerSpec& es,
                    const ChannelParams& ch, double xi6) {
    double t = v2e_upload_time(task, v2e_rate(vehicle_pos, es, ch));
    return xi6 / t;
}

double aggregate_score(int s_lap, std::span<const double> s_ups, double xi7) {
    double sum = 0;
    for (double s : s_ups) sum += s;
    return xi7 * s_lap + (1.0 - xi7) * sum;
}

std::vector<TrainingSequence> greedy_rank(const SystemConfig& cfg, const MobilityModel& mobility,
                                          const Schedule& schedule, EsId m, int k,
                                          double round_start) {
    const int J = cfg.task_count();
    std::vector<TrainingSequence> seqs(cfg.vehicle_count());

    // Tasks still running at edge iteration k with at least one vehicle here.
    std::vector<TaskId> remaining;
    for (TaskId j = 0; j < J; ++j)
        if (cfg.tasks[j].edge_iters >= k && !schedule.vehicles_of(m, j).empty())
            remaining.push_back(j);

    // Per-vehicle one-iteration training estimates, for upload-instant
    // prediction.
    std::vector<double> full_pass(cfg.vehicle_count(), 0.0);
    std::vector<std::vector<double>> cmp(cfg.vehicle_count());
    for (VehicleId n : schedule.covered_by(m)) {
        cmp[n].resize(J, 0.0);
        for (TaskId j : schedule.tasks_of(n)) {
            cmp[n][j] = task_training_time(cfg.tasks[j], cfg.vehicles[n]);
            if (cfg.tasks[j].edge_iters >= k) full_pass[n] += cmp[n][j];
        }
    }
    std::vector<double> prefix(cfg.vehicle_count(), 0.0);  // trained-so-far estimate

    while (!remaining.empty()) {
        double best_score = -std::numeric_limits<double>::infinity();
        TaskId q = -1;
        for (TaskId j : remaining) {  // ascending ids; strict > keeps the lowest on ties
            int s_lap = overlap_score(schedule, seqs, j, m);
            std::vector<double> ups;
            for (VehicleId n : schedule.vehicles_of(m, j)) {
                // Predicted upload instant: prior iterations, the tasks
                // already ranked this iteration, then this task's training.
                double t_up = round_start + (k - 1) * full_pass[n] + prefix[n] + cmp[n][j];
                ups.push_back(upload_score(cfg.tasks[j], mobility.position_at(n, t_up),
                                           cfg.edge_servers[m], cfg.channel, cfg.hyper.xi6));
            }
            double s_all = aggregate_score(s_lap, ups, cfg.hyper.xi7);
            if (s_all > best_score) {
                best_score = s_all;
                q = j;
            }
        }
        for (VehicleId n : schedule.vehicles_of(m, q)) {
            seqs[n].order.push_back(q);
            prefix[n] += cmp[n][q];
        }
        remaining.erase(std::find(remaining.begin(), remaining.end(), q));
    }
    return seqs;
}

SequencePlan build_sequence_plan(const SystemConfig& cfg, const MobilityModel& mobility,
                                 const Schedule& schedule, double round_start) {
    int max_k = 1;
    for (const TaskSpec& t : cfg.tasks) max_k = std::max(max_k, t.edge_iters);
    SequencePlan plan(cfg.vehicle_count(), max_k);
    for (EsId m = 0; m < cfg.es_count(); ++m) {
        if (schedule.covered_by(m).empty()) continue;
        for (int k = 1; k <= max_k; ++k) {
            std::vector<TrainingSequence> seqs = greedy_rank(cfg, mobility, schedule, m, k,
                                                             round_start);
            for (VehicleId n : schedule.covered_by(m)) plan.at(n, k) = std::move(seqs[n]);
        }
    }
    return plan;
}

}  // namespace vecfl
