#include "vecfl/sim/simulator.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <queue>
#include <sstream>

#include <json.hpp>

#include "vecfl/core/validate.hpp"
#include "vecfl/sched/baselines.hpp"
#include "vecfl/sched/stage1.hpp"

namespace vecfl {

const char* to_string(EventKind k) {
    switch (k) {
        case EventKind::kTrainDone: return "train_done";
        case EventKind::kUploadDone: return "upload_done";
        case EventKind::kEdgeAggregated: return "edge_aggregated";
        case EventKind::kEdgeBroadcast: return "edge_broadcast";
        case EventKind::kCloudAggregated: return "cloud_aggregated";
        case EventKind::kCloudBroadcast: return "cloud_broadcast";
    }
    return "?";
}

FlState::FlState(const SystemConfig& cfg, std::uint64_t seed) : cfg_(&cfg), seed_(seed) {
    for (TaskId j = 0; j < cfg.task_count(); ++j) {
        tasks_.emplace_back(cfg.tasks[j].model_dim, cfg.tasks[j].noise_sigma, seed, j);
        ModelVector m;
        m.params.assign(cfg.tasks[j].model_dim, 0.0);  // unified initial global model
        m.data_weight = 1;
        global_.push_back(m);
        prev_global_.push_back(m);
    }
    buffered_.resize(cfg.task_count());
}

const SyntheticTask::Shard& FlState::shard(TaskId j, VehicleId n) {
    auto key = std::make_pair(j, n);
    auto it = shards_.find(key);
    if (it == shards_.end()) {
        int samples = cfg_->vehicles[n].dataset_size.at(j);
        it = shards_.emplace(key, tasks_[j].make_shard(n, samples)).first;
    }
    return it->second;
}

void FlState::set_global(TaskId j, ModelVector m) {
    prev_global_[j] = global_[j];
    global_[j] = std::move(m);
}

double FlState::distance_to_truth(TaskId j) const {
    return l2_distance(global_[j].params, tasks_[j].true_weights());
}

namespace {

enum Rank {
    kRankTrainDone = 0,
    kRankUploadDone = 1,
    kRankEdgeAggregated = 2,
    kRankEdgeBroadcast = 3,
    kRankCloudArrive = 4,  // internal
    kRankCloudAggregated = 5,
    kRankCloudBroadcast = 6,
};

struct QEvent {
    double t;
    int rank;
    EsId m;
    VehicleId n;
    TaskId j;
    int k;
    bool operator>(const QEvent& o) const {
        if (t != o.t) return t > o.t;
        if (rank != o.rank) return rank > o.rank;
        if (m != o.m) return m > o.m;
        if (n != o.n) return n > o.n;
        if (j != o.j) return j > o.j;
        return k > o.k;
    }
};

struct StreamCell {
    TaskId j;
    int k;
    int pos;
};

struct VehicleRun {
    std::vector<StreamCell> cells;
    std::size_t next = 0;
    double free_at = 0;
    bool waiting = false;
    // Partial timing of the in-flight cell.
    CellTiming current;
};

}  // namespace

TimelineReport run_round(const SystemConfig& cfg, const MobilityModel& mobility,
                         const Schedule& schedule, const SequencePlan& plan, int g,
                         double round_start, AggregationMode mode, FlState* models,
                         std::uint64_t seed) {
    const int J = cfg.task_count();
    const int M = cfg.es_count();

    TimelineReport rep;
    rep.round_start = round_start;
    rep.g = g;
    rep.mode = mode;
    rep.arrivals.resize(J);
    rep.participating_es.assign(J, 0);
    rep.quorum_shortfall.assign(J, false);
    rep.cloud_time.assign(J, 0.0);
    rep.quorum.resize(J);
    rep.discarded_stragglers.assign(J, 0);
    rep.counts_per_task = schedule.counts_per_task();

    // Dwell-feasibility precondition (the constraint the schedulers must
    // have honored), plus a realized-overrun counter filled at the end.
    std::vector<double> dwell(cfg.vehicle_count(), 0.0);
    for (VehicleId n = 0; n < cfg.vehicle_count(); ++n) {
        if (!schedule.attached(n)) continue;
        EsId m = schedule.es_of(n);
        dwell[n] = mobility.dwell_time(n, cfg.edge_servers[m], round_start);
        std::vector<double> est = scheduling_time_estimates(cfg, n);
        double load = 0;
        for (TaskId j : schedule.tasks_of(n)) load += est[j];
        if (!fits_dwell(load, dwell[n])) throw InfeasibleSchedule(n);
    }

    std::vector<VehicleRun> runs(cfg.vehicle_count());
    for (VehicleId n = 0; n < cfg.vehicle_count(); ++n) {
        runs[n].free_at = round_start;
        if (!schedule.attached(n)) continue;
        for (int k = 1; k <= plan.max_edge_iters(); ++k) {
            const TrainingSequence& seq = plan.at(n, k);
            for (int p = 0; p < seq.length(); ++p) runs[n].cells.push_back({seq.order[p], k, p});
        }
    }

    // Per (m, j, k): outstanding uploads and gathered end times.
    std::map<std::tuple<EsId, TaskId, int>, std::vector<double>> gathered;
    std::map<std::tuple<EsId, TaskId, int>, int> expected;
    for (EsId m = 0; m < M; ++m)
        for (TaskId j = 0; j < J; ++j) {
            int cnt = static_cast<int>(schedule.vehicles_of(m, j).size());
            if (cnt > 0)
                for (int k = 1; k <= cfg.tasks[j].edge_iters; ++k) expected[{m, j, k}] = cnt;
        }

    std::map<std::tuple<EsId, TaskId, int>, double> broadcast;  // processed broadcasts
    std::map<std::tuple<EsId, TaskId, int>, std::vector<VehicleId>> waiters;
    std::priority_queue<QEvent, std::vector<QEvent>, std::greater<QEvent>> queue;

    auto push_event = [&](double t, int rank, EsId m, VehicleId n, TaskId j, int k) {
        queue.push({t, rank, m, n, j, k});
    };

    auto try_start = [&](VehicleId n) {
        VehicleRun& vr = runs[n];
        if (vr.next >= vr.cells.size()) return;
        const StreamCell& sc = vr.cells[vr.next];
        EsId m = schedule.es_of(n);
        double arrival;
        if (sc.k == 1) {
            arrival = round_start;
        } else {
            auto it = broadcast.find({m, sc.j, sc.k - 1});
            if (it == broadcast.end()) {
                if (!vr.waiting) {
                    waiters[{m, sc.j, sc.k - 1}].push_back(n);
                    vr.waiting = true;
                }
                return;
            }
            arrival = it->second;
        }
        vr.waiting = false;
        CellTiming c;
        c.m = m;
        c.n = n;
        c.j = sc.j;
        c.k = sc.k;
        c.start = std::max(vr.free_at, arrival);
        c.inactive = sc.pos == 0 ? 0.0 : c.start - vr.free_at;
        c.train_time = task_training_time(cfg.tasks[sc.j], cfg.vehicles[n]);
        vr.current = c;
        push_event(c.start + c.train_time, kRankTrainDone, m, n, sc.j, sc.k);
    };

    for (VehicleId n = 0; n < cfg.vehicle_count(); ++n)
        if (schedule.attached(n)) try_start(n);

    // Cloud bookkeeping.
    std::vector<int> quorum_needed(J, 0);
    for (TaskId j = 0; j < J; ++j) {
        int participating = 0;
        for (EsId m = 0; m < M; ++m)
            if (!schedule.vehicles_of(m, j).empty()) ++participating;
        rep.participating_es[j] = participating;
        if (participating == 0) continue;
        int q = cfg.tasks[j].cloud_quorum;
        if (mode == AggregationMode::kFullSync) q = participating;
        if (q > participating) {
            rep.quorum_shortfall[j] = true;
            q = participating;
        }
        quorum_needed[j] = q;
    }
    std::vector<bool> quorum_met(J, false);

    double clock = round_start;
    while (!queue.empty()) {
        QEvent ev = queue.top();
        queue.pop();
        clock = ev.t;
        switch (ev.rank) {
            case kRankTrainDone: {
                VehicleRun& vr = runs[ev.n];
                CellTiming& c = vr.current;
                double td = ev.t;
                double rate = v2e_rate(mobility.position_at(ev.n, td), cfg.edge_servers[ev.m],
                                       cfg.channel);
                c.upload_time = v2e_upload_time(cfg.tasks[ev.j], rate);
                // The upload rides behind the next task's training only if
                // that task's model was broadcast strictly before now.
                bool immediate = false;
                if (vr.next + 1 < vr.cells.size()) {
                    const StreamCell& nx = vr.cells[vr.next + 1];
                    if (nx.k == 1) {
                        immediate = round_start < td;
                    } else {
                        auto it = broadcast.find({ev.m, nx.j, nx.k - 1});
                        immediate = it != broadcast.end() && it->second < td;
                    }
                }
                c.exec_case = immediate ? ExecutionCase::kImmediate : ExecutionCase::kDelayed;
                c.ntt = ntt_time(c.exec_case, c.upload_time, c.inactive);
                c.total = c.train_time + c.ntt;
                c.end = immediate ? td : td + c.upload_time;
                rep.events.push_back({td, EventKind::kTrainDone, ev.m, ev.n, ev.j, ev.k, g});
                push_event(c.end, kRankUploadDone, ev.m, ev.n, ev.j, ev.k);
                break;
            }
            case kRankUploadDone: {
                VehicleRun& vr = runs[ev.n];
                rep.events.push_back({ev.t, EventKind::kUploadDone, ev.m, ev.n, ev.j, ev.k, g});
                rep.cells.push_back(vr.current);
                vr.free_at = ev.t;
                ++vr.next;
                try_start(ev.n);
                auto key = std::make_tuple(ev.m, ev.j, ev.k);
                auto& got = gathered[key];
                got.push_back(vr.current.end);
                if (static_cast<int>(got.size()) == expected.at(key))
                    push_event(ev.t, kRankEdgeAggregated, ev.m, -1, ev.j, ev.k);
                break;
            }
            case kRankEdgeAggregated: {
                rep.events.push_back({ev.t, EventKind::kEdgeAggregated, ev.m, -1, ev.j, ev.k, g});
                rep.es_agg[{ev.m, ev.j}].push_back(ev.t);
                push_event(ev.t, kRankEdgeBroadcast, ev.m, -1, ev.j, ev.k);
                break;
            }
            case kRankEdgeBroadcast: {
                rep.events.push_back({ev.t, EventKind::kEdgeBroadcast, ev.m, -1, ev.j, ev.k, g});
                broadcast[{ev.m, ev.j, ev.k}] = ev.t;
                auto w = waiters.find({ev.m, ev.j, ev.k});
                if (w != waiters.end()) {
                    std::vector<VehicleId> list = std::move(w->second);
                    waiters.erase(w);
                    for (VehicleId n : list) {
                        runs[n].waiting = false;
                        try_start(n);
                    }
                }
                if (ev.k == cfg.tasks[ev.j].edge_iters) {
                    const TaskSpec& task = cfg.tasks[ev.j];
                    double e2c = task.model_size_e2c > 0
                                     ? task.model_size_e2c / cfg.edge_servers[ev.m].e2c_rate
                                     : 0.0;
                    push_event(ev.t + e2c, kRankCloudArrive, ev.m, -1, ev.j, 0);
                }
                break;
            }
            case kRankCloudArrive: {
                auto& arr = rep.arrivals[ev.j];
                arr.push_back({ev.t, ev.m});
                if (!quorum_met[ev.j]) {
                    if (static_cast<int>(arr.size()) == quorum_needed[ev.j]) {
                        quorum_met[ev.j] = true;
                        for (const auto& [t, m] : arr) rep.quorum[ev.j].push_back(m);
                        push_event(ev.t, kRankCloudAggregated, -1, -1, ev.j, 0);
                    }
                } else {
                    ++rep.discarded_stragglers[ev.j];
                }
                break;
            }
            case kRankCloudAggregated: {
                rep.events.push_back({ev.t, EventKind::kCloudAggregated, -1, -1, ev.j, 0, g});
                rep.cloud_time[ev.j] = ev.t;
                push_event(ev.t, kRankCloudBroadcast, -1, -1, ev.j, 0);
                break;
            }
            case kRankCloudBroadcast: {
                rep.events.push_back({ev.t, EventKind::kCloudBroadcast, -1, -1, ev.j, 0, g});
                break;
            }
        }
    }
    rep.round_end = clock;

    for (TaskId j = 0; j < J; ++j) {
        if (rep.participating_es[j] > 0)
            rep.objective = std::max(rep.objective, rep.cloud_time[j] - round_start);
    }
    for (const auto& [key, times] : rep.es_agg) {
        const auto& [m, j] = key;
        const TaskSpec& task = cfg.tasks[j];
        double e2c = task.model_size_e2c > 0 ? task.model_size_e2c / cfg.edge_servers[m].e2c_rate
                                             : 0.0;
        rep.cs_arrival[key] = times.back() + e2c;
    }

    std::stable_sort(rep.cells.begin(), rep.cells.end(),
                     [](const CellTiming& a, const CellTiming& b) {
                         if (a.m != b.m) return a.m < b.m;
                         if (a.n != b.n) return a.n < b.n;
                         if (a.k != b.k) return a.k < b.k;
                         return a.start < b.start;
                     });

    rep.antt.assign(M, 0.0);
    rep.lntt.assign(M, 0.0);
    std::vector<int> cell_count(M, 0);
    for (const CellTiming& c : rep.cells) {
        rep.antt[c.m] += c.ntt;
        rep.lntt[c.m] = std::max(rep.lntt[c.m], c.ntt);
        ++cell_count[c.m];
    }
    for (EsId m = 0; m < M; ++m)
        if (cell_count[m] > 0) rep.antt[m] /= cell_count[m];

    for (VehicleId n = 0; n < cfg.vehicle_count(); ++n) {
        if (!schedule.attached(n) || runs[n].cells.empty()) continue;
        if (runs[n].free_at - round_start > dwell[n] + kTimeTol) ++rep.dwell_overruns;
    }

    // Learning pass: the timeline does not depend on parameter values, so
    // the model math runs after the clock, honoring the quorum order.
    if (models) {
        for (TaskId j = 0; j < J; ++j) {
            if (rep.participating_es[j] == 0) continue;
            std::vector<ModelVector> per_es_final(M);
            for (EsId m = 0; m < M; ++m) {
                std::vector<VehicleId> assigned = schedule.vehicles_of(m, j);
                if (assigned.empty()) continue;
                ModelVector edge = models->global(j);
                for (int k = 1; k <= cfg.tasks[j].edge_iters; ++k) {
                    std::vector<ModelVector> locals;
                    for (VehicleId n : assigned) {
                        SeededRng rng = SeededRng::derive(
                            seed, {stream::kSgd, static_cast<std::uint64_t>(g),
                                   static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(n),
                                   static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(k)});
                        locals.push_back(local_sgd(edge, models->task(j), models->shard(j, n),
                                                   cfg.tasks[j].local_iters,
                                                   cfg.tasks[j].learning_rate,
                                                   cfg.tasks[j].batch_size, rng));
                    }
                    edge = edge_aggregate(locals);
                }
                per_es_final[m] = std::move(edge);
            }
            std::vector<ModelVector> quorum_models;
            // Buffered straggler models from earlier rounds join this
            // aggregation under the buffer policy.
            if (cfg.hyper.straggler_policy == StragglerPolicy::kBufferNextRound) {
                for (ModelVector& b : models->buffered(j)) quorum_models.push_back(std::move(b));
                models->buffered(j).clear();
            }
            for (EsId m : rep.quorum[j]) quorum_models.push_back(per_es_final[m]);
            if (!quorum_models.empty()) {
                ModelVector next = global_aggregate(models->global(j), quorum_models,
                                                    cfg.tasks[j].blend_alpha,
                                                    static_cast<int>(quorum_models.size()));
                models->set_global(j, std::move(next));
            }
            if (cfg.hyper.straggler_policy == StragglerPolicy::kBufferNextRound) {
                std::vector<bool> in_quorum(M, false);
                for (EsId m : rep.quorum[j]) in_quorum[m] = true;
                for (EsId m = 0; m < M; ++m) {
                    if (in_quorum[m] || schedule.vehicles_of(m, j).empty()) continue;
                    models->buffered(j).push_back(per_es_final[m]);
                }
            }
        }
    }
    return rep;
}

namespace {

SystemConfig subconfig_for_active(const SystemConfig& cfg, const std::vector<bool>& active,
                                  std::vector<TaskId>& mapping) {
    SystemConfig sub = cfg;
    sub.tasks.clear();
    mapping.clear();
    for (TaskId j = 0; j < cfg.task_count(); ++j) {
        if (!active[j]) continue;
        TaskSpec t = cfg.tasks[j];
        t.id = static_cast<int>(sub.tasks.size());
        sub.tasks.push_back(t);
        mapping.push_back(j);
    }
    for (VehicleSpec& v : sub.vehicles) {
        std::vector<double> freq;
        std::vector<int> data;
        for (TaskId j = 0; j < cfg.task_count(); ++j) {
            if (!active[j]) continue;
            freq.push_back(v.cpu_freq[j]);
            data.push_back(v.dataset_size[j]);
        }
        v.cpu_freq = std::move(freq);
        v.dataset_size = std::move(data);
    }
    // The assignment target follows the shrinking task set; the calibrated
    // scales and weights stay as fixed at start.
    sub.hyper.chi = std::max(1.0, std::round(static_cast<double>(cfg.vehicle_count()) /
                                             std::max<std::size_t>(1, sub.tasks.size())));
    return sub;
}

}  // namespace

ExperimentResult run_until_convergence(const SystemConfig& input_cfg, SchedulerKind scheduler,
                                       std::uint64_t seed, AggregationMode mode) {
    SystemConfig cfg = input_cfg;
    finalize_defaults(cfg);
    const int J = cfg.task_count();

    ExperimentResult res;
    res.scheduler = scheduler;
    res.mode = mode;
    res.seed = seed;
    res.completion_time.assign(J, 0.0);
    res.rounds_used.assign(J, 0);
    res.converged.assign(J, false);
    res.target_time.assign(J, -1.0);
    res.target_reached.assign(J, false);
    res.final_distance.assign(J, 0.0);
    res.converged_far_from_optimum.assign(J, false);

    MobilityModel mobility(cfg, seed);
    FlState models(cfg, seed);

    std::vector<bool> active(J, true);
    double t = 0;
    for (int g = 1; g <= cfg.hyper.iteration_cap; ++g) {
        std::vector<TaskId> mapping;
        SystemConfig sub = subconfig_for_active(cfg, active, mapping);
        if (sub.tasks.empty()) break;

        SchedulerOutput out = run_scheduler(scheduler, sub, mobility, t, g, seed);

        // Remap the sub-problem schedule onto full task ids.
        Schedule schedule(cfg.vehicle_count(), J);
        for (VehicleId n = 0; n < cfg.vehicle_count(); ++n) {
            if (!out.schedule.attached(n)) continue;
            schedule.attach(n, out.schedule.es_of(n));
            for (std::size_t js = 0; js < mapping.size(); ++js)
                if (out.schedule.assigned(n, static_cast<TaskId>(js)))
                    schedule.set(n, mapping[js], true);
        }
        SequencePlan plan(cfg.vehicle_count(), out.sequences.max_edge_iters());
        for (VehicleId n = 0; n < cfg.vehicle_count(); ++n) {
            if (!out.schedule.attached(n)) continue;
            for (int k = 1; k <= out.sequences.max_edge_iters(); ++k) {
                const TrainingSequence& s = out.sequences.at(n, k);
                for (TaskId js : s.order) plan.at(n, k).order.push_back(mapping[js]);
            }
        }

        TimelineReport rep = run_round(cfg, mobility, schedule, plan, g, t, mode, &models, seed);

        RoundRecord rec;
        rec.g = g;
        rec.scheduler = scheduler;
        rec.start = t;
        rec.objective = rep.objective;
        rec.counts = rep.counts_per_task;
        rec.task_active = active;
        rec.cloud_time = rep.cloud_time;
        rec.antt = rep.antt;
        rec.lntt = rep.lntt;
        rec.within_balance.assign(J, true);
        rec.movement.assign(J, 0.0);
        rec.dist_to_truth.assign(J, 0.0);
        double target = static_cast<double>(cfg.vehicle_count()) / mapping.size();
        for (TaskId j = 0; j < J; ++j) {
            if (!active[j]) continue;
            rec.within_balance[j] = rep.counts_per_task[j] >= target - cfg.hyper.xi1 - kTimeTol &&
                                    rep.counts_per_task[j] <= target + cfg.hyper.xi2 + kTimeTol;
        }

        bool any_participation = false;
        for (TaskId j = 0; j < J; ++j) {
            if (!active[j]) continue;
            res.rounds_used[j] = g;
            if (rep.participating_es[j] == 0) continue;
            any_participation = true;
            rec.movement[j] = l2_distance(models.global(j).params, models.prev_global(j).params);
            rec.dist_to_truth[j] = models.distance_to_truth(j);
            res.final_distance[j] = rec.dist_to_truth[j];
            if (!res.target_reached[j] && cfg.tasks[j].target_distance > 0 &&
                rec.dist_to_truth[j] <= cfg.tasks[j].target_distance) {
                res.target_reached[j] = true;
                res.target_time[j] = rep.cloud_time[j];
            }
            if (check_convergence(models.global(j), models.prev_global(j),
                                  cfg.tasks[j].conv_threshold)) {
                active[j] = false;
                res.converged[j] = true;
                res.completion_time[j] = rep.cloud_time[j];
                res.converged_far_from_optimum[j] =
                    cfg.tasks[j].target_distance > 0 && !res.target_reached[j];
            }
        }
        res.rounds.push_back(std::move(rec));
        if (!any_participation) {
            res.iteration_cap_hit = true;
            break;
        }

        double barrier = t;
        for (TaskId j = 0; j < J; ++j)
            if (rep.participating_es[j] > 0) barrier = std::max(barrier, rep.cloud_time[j]);
        res.total_makespan = std::max(res.total_makespan, barrier);
        t = barrier;

        bool all_done = true;
        for (TaskId j = 0; j < J; ++j)
            if (active[j]) all_done = false;
        if (all_done) break;
        if (g == cfg.hyper.iteration_cap) res.iteration_cap_hit = true;
    }
    return res;
}

std::string events_to_ndjson(const std::vector<Event>& events) {
    std::ostringstream out;
    out.precision(17);
    for (const Event& e : events) {
        out << "{\"t\":" << e.t << ",\"kind\":\"" << to_string(e.kind) << "\"";
        if (e.m >= 0) out << ",\"m\":" << e.m + 1;
        if (e.n >= 0) out << ",\"n\":" << e.n + 1;
        if (e.j >= 0) out << ",\"j\":" << e.j + 1;
        if (e.k > 0) out << ",\"k\":" << e.k;
        out << ",\"g\":" << e.g << "}\n";
    }
    return out.str();
}

std::string report_to_json(const TimelineReport& rep) {
    nlohmann::json j;
    j["round_start"] = rep.round_start;
    j["g"] = rep.g;
    j["mode"] = rep.mode == AggregationMode::kHybrid ? "hybrid" : "full-sync";
    j["objective"] = rep.objective;
    j["round_end"] = rep.round_end;
    j["dwell_overruns"] = rep.dwell_overruns;
    j["counts_per_task"] = rep.counts_per_task;
    j["antt"] = rep.antt;
    j["lntt"] = rep.lntt;
    nlohmann::json tasks = nlohmann::json::array();
    for (std::size_t t = 0; t < rep.cloud_time.size(); ++t) {
        nlohmann::json tj;
        tj["task"] = t + 1;
        tj["participating_es"] = rep.participating_es[t];
        tj["quorum_shortfall"] = static_cast<bool>(rep.quorum_shortfall[t]);
        tj["cloud_time"] = rep.cloud_time[t];
        tj["discarded_stragglers"] = rep.discarded_stragglers[t];
        nlohmann::json q = nlohmann::json::array();
        for (EsId m : rep.quorum[t]) q.push_back(m + 1);
        tj["quorum"] = q;
        tasks.push_back(tj);
    }
    j["tasks"] = tasks;
    return j.dump(2);
}

}  // namespace vecfl
