#include "vecfl/timeline/time_model.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <sstream>

namespace vecfl {

double local_round_time(const TaskSpec& task, const VehicleSpec& vehicle) {
    double f = vehicle.cpu_freq.at(task.id);
    return task.batch_size * task.cycles_per_sample / f + task.setup_overhead;
}

double task_training_time(const TaskSpec& task, const VehicleSpec& vehicle) {
    return task.local_iters * local_round_time(task, vehicle);
}

double v2e_upload_time(const TaskSpec& task, double rate_bps) {
    if (rate_bps <= 0) throw ZeroRate();
    return task.model_size_v2e / rate_bps;
}

double inactive_time(double others_end_max, double own_prev_end) {
    return std::max(others_end_max - own_prev_end, 0.0);
}

double inactive_time(std::span<const double> others_end, double own_prev_end) {
    double m = -std::numeric_limits<double>::infinity();
    for (double e : others_end) m = std::max(m, e);
    if (others_end.empty()) return 0.0;
    return inactive_time(m, own_prev_end);
}

double ntt_time(ExecutionCase c, double upload, double inactive) {
    return c == ExecutionCase::kImmediate ? 0.0 : upload + inactive;
}

double end_time(const TrainingSequence& seq, const std::map<TaskId, double>& totals, TaskId j) {
    if (!seq.contains(j)) throw TaskNotAssigned();
    int rank = seq.position_of(j);
    double sum = 0;
    for (int i = 0; i < rank; ++i) {
        auto it = totals.find(seq.order[i]);
        if (it == totals.end()) throw TaskNotAssigned();
        sum += it->second;
    }
    return sum;
}

double es_edge_iteration_time(std::span<const double> end_times) {
    if (end_times.empty()) throw EmptyAssignment();
    double m = end_times[0];
    for (double e : end_times) m = std::max(m, e);
    return m;
}

double es_global_round_time(const TaskSpec& task, std::span<const double> per_iteration,
                            const EdgeServerSpec& es) {
    if (static_cast<int>(per_iteration.size()) != task.edge_iters) throw WrongIterationCount();
    double upload = task.model_size_e2c > 0 ? task.model_size_e2c / es.e2c_rate : 0.0;
    double sum = 0;
    for (double t : per_iteration) sum += t;
    return upload + sum;
}

double global_objective(const std::map<std::pair<TaskId, EsId>, double>& per_task_per_es) {
    double m = 0;
    for (const auto& [key, v] : per_task_per_es) m = std::max(m, v);
    return m;
}

namespace {

struct StreamCell {
    TaskId j;
    int k;       // 1-based
    int pos;     // 0-based position within the iteration's sequence
    bool last_of_layer;
};

// Vehicle cell stream in execution order: all of iteration 1's sequence,
// then iteration 2's, and so on.
std::vector<StreamCell> cell_stream(const SequencePlan& plan, VehicleId n, int max_k) {
    std::vector<StreamCell> cells;
    for (int k = 1; k <= max_k; ++k) {
        const TrainingSequence& seq = plan.at(n, k);
        for (int p = 0; p < seq.length(); ++p)
            cells.push_back({seq.order[p], k, p, p + 1 == seq.length()});
    }
    return cells;
}

}  // namespace

RoundTimeline evaluate_round_timeline(const SystemConfig& cfg, const MobilityModel& mobility,
                                      const Schedule& schedule, const SequencePlan& plan,
                                      double round_start) {
    const int J = cfg.task_count();
    RoundTimeline tl;
    tl.round_start = round_start;
    tl.arrivals.resize(J);
    tl.participating_es.assign(J, 0);
    tl.quorum_shortfall.assign(J, false);
    tl.cloud_quorum_time.assign(J, 0.0);
    tl.cloud_full_time.assign(J, 0.0);

    const int max_k = plan.max_edge_iters();

    for (EsId m = 0; m < cfg.es_count(); ++m) {
        std::vector<VehicleId> covered = schedule.covered_by(m);
        if (covered.empty()) continue;

        struct VehState {
            std::vector<StreamCell> cells;
            std::size_t next = 0;
            double free_at;
            std::vector<CellTiming> done;
        };
        std::map<VehicleId, VehState> vs;
        int es_max_k = 0;
        for (VehicleId n : covered) {
            VehState st;
            st.cells = cell_stream(plan, n, max_k);
            st.free_at = round_start;
            if (!st.cells.empty()) es_max_k = std::max(es_max_k, st.cells.back().k);
            vs.emplace(n, std::move(st));
        }

        // es_agg_k[j][k-1]: absolute aggregation instant of task j's k-th
        // edge iteration under this ES.
        std::map<TaskId, std::vector<double>> agg;
        for (TaskId j = 0; j < J; ++j) {
            if (!schedule.vehicles_of(m, j).empty())
                agg[j].assign(cfg.tasks[j].edge_iters, 0.0);
        }

        auto arrival_of = [&](TaskId j, int k) -> double {
            // Model feeding iteration k: the global broadcast for k = 1,
            // otherwise the previous edge aggregation at this ES.
            if (k <= 1) return round_start;
            return agg.at(j).at(k - 2);
        };

        for (int k = 1; k <= es_max_k; ++k) {
            // Pass 1: everything except the upload-absorption decision of
            // cells whose next cell sits in layer k+1.
            struct Pending {
                VehicleId n;
                CellTiming cell;
                TaskId next_task;  // -1: no next cell (always on-clock)
            };
            std::vector<Pending> boundary;

            for (VehicleId n : covered) {
                VehState& st = vs.at(n);
                const VehicleSpec& veh = cfg.vehicles[n];
                while (st.next < st.cells.size() && st.cells[st.next].k == k) {
                    const StreamCell& sc = st.cells[st.next];
                    const TaskSpec& task = cfg.tasks[sc.j];
                    CellTiming c;
                    c.m = m;
                    c.n = n;
                    c.j = sc.j;
                    c.k = k;
                    double arr = arrival_of(sc.j, k);
                    c.start = std::max(st.free_at, arr);
                    // The first task of an iteration anchors at its own model
                    // arrival, so no wait is booked for it.
                    c.inactive = sc.pos == 0 ? 0.0 : c.start - st.free_at;
                    c.train_time = task_training_time(task, veh);
                    double train_done = c.start + c.train_time;
                    double rate = v2e_rate(mobility.position_at(n, train_done),
                                           cfg.edge_servers[m], cfg.channel);
                    c.upload_time = v2e_upload_time(task, rate);

                    bool has_next = st.next + 1 < st.cells.size();
                    const StreamCell* nx = has_next ? &st.cells[st.next + 1] : nullptr;
                    if (nx && nx->k == k) {
                        // Next model's availability is already known.
                        double next_arr = arrival_of(nx->j, k);
                        c.exec_case = next_arr < train_done ? ExecutionCase::kImmediate
                                                            : ExecutionCase::kDelayed;
                        c.ntt = ntt_time(c.exec_case, c.upload_time, c.inactive);
                        c.total = c.train_time + c.ntt;
                        c.end = c.exec_case == ExecutionCase::kImmediate
                                    ? train_done
                                    : train_done + c.upload_time;
                        st.free_at = c.end;
                        st.done.push_back(c);
                    } else {
                        // Crosses into the next layer (or is the final cell):
                        // resolve below against this layer's aggregations.
                        boundary.push_back({n, c, nx ? nx->j : -1});
                        st.free_at = train_done + c.upload_time;  // provisional
                    }
                    ++st.next;
                }
            }

            // Pass 2: pessimistic fixed point for the boundary cells. A
            // boundary upload can be absorbed only if the next task's model
            // was broadcast strictly before the training finished; since
            // absorbing shortens aggregation instants, iterate until stable.
            std::vector<bool> absorbed(boundary.size(), false);
            auto layer_agg = [&](TaskId j) -> double {
                double mx = -std::numeric_limits<double>::infinity();
                for (VehicleId n : schedule.vehicles_of(m, j)) {
                    const VehState& st = vs.at(n);
                    bool found = false;
                    for (const CellTiming& c : st.done) {
                        if (c.j == j && c.k == k) {
                            mx = std::max(mx, c.end);
                            found = true;
                        }
                    }
                    if (!found) {
                        for (std::size_t b = 0; b < boundary.size(); ++b) {
                            if (boundary[b].n == n && boundary[b].cell.j == j) {
                                double td = boundary[b].cell.start + boundary[b].cell.train_time;
                                mx = std::max(mx, absorbed[b] ? td : td + boundary[b].cell.upload_time);
                            }
                        }
                    }
                }
                return mx;
            };
            for (std::size_t pass = 0; pass <= boundary.size(); ++pass) {
                bool changed = false;
                for (std::size_t b = 0; b < boundary.size(); ++b) {
                    if (absorbed[b] || boundary[b].next_task < 0) continue;
                    double td = boundary[b].cell.start + boundary[b].cell.train_time;
                    if (layer_agg(boundary[b].next_task) < td) {
                        absorbed[b] = true;
                        changed = true;
                    }
                }
                if (!changed) break;
            }
            for (std::size_t b = 0; b < boundary.size(); ++b) {
                CellTiming c = boundary[b].cell;
                double td = c.start + c.train_time;
                c.exec_case = absorbed[b] ? ExecutionCase::kImmediate : ExecutionCase::kDelayed;
                c.ntt = ntt_time(c.exec_case, c.upload_time, c.inactive);
                c.total = c.train_time + c.ntt;
                c.end = absorbed[b] ? td : td + c.upload_time;
                VehState& st = vs.at(boundary[b].n);
                st.free_at = c.end;
                st.done.push_back(c);
            }

            // Final aggregation instants for this layer.
            for (auto& [j, vec] : agg) {
                if (k <= static_cast<int>(vec.size())) {
                    std::vector<double> ends;
                    for (VehicleId n : schedule.vehicles_of(m, j))
                        for (const CellTiming& c : vs.at(n).done)
                            if (c.j == j && c.k == k) ends.push_back(c.end);
                    if (!ends.empty()) vec[k - 1] = es_edge_iteration_time(ends);
                }
            }
        }

        // Collect cells in (n, k, pos) order; record aggregations and the
        // backhaul arrivals.
        for (VehicleId n : covered) {
            for (const CellTiming& c : vs.at(n).done) tl.cells.push_back(c);
        }
        for (auto& [j, vec] : agg) {
            tl.es_agg[{m, j}] = vec;
            const TaskSpec& task = cfg.tasks[j];
            double e2c = task.model_size_e2c > 0 ? task.model_size_e2c / cfg.edge_servers[m].e2c_rate
                                                 : 0.0;
            double arrive = vec.back() + e2c;
            tl.cs_arrival[{m, j}] = arrive;
            tl.arrivals[j].push_back({arrive, m});
        }
    }

    // Cells sorted by (m, n, k, position-within-layer == start order).
    std::stable_sort(tl.cells.begin(), tl.cells.end(), [](const CellTiming& a, const CellTiming& b) {
        if (a.m != b.m) return a.m < b.m;
        if (a.n != b.n) return a.n < b.n;
        if (a.k != b.k) return a.k < b.k;
        return a.start < b.start;
    });

    for (TaskId j = 0; j < J; ++j) {
        auto& arr = tl.arrivals[j];
        std::sort(arr.begin(), arr.end());
        tl.participating_es[j] = static_cast<int>(arr.size());
        if (arr.empty()) continue;
        int q = cfg.tasks[j].cloud_quorum;
        if (static_cast<int>(arr.size()) < q) {
            tl.quorum_shortfall[j] = true;
            q = static_cast<int>(arr.size());
        }
        tl.cloud_quorum_time[j] = arr[q - 1].first;
        tl.cloud_full_time[j] = arr.back().first;
        tl.objective_hybrid = std::max(tl.objective_hybrid, tl.cloud_quorum_time[j] - round_start);
        tl.objective_full_sync = std::max(tl.objective_full_sync, tl.cloud_full_time[j] - round_start);
    }
    return tl;
}

std::string cells_to_csv(const std::vector<CellTiming>& cells) {
    std::ostringstream out;
    out.precision(17);
    out << "es,vehicle,task,edge_iter,start,train_time,upload_time,inactive,case,ntt,total,end\n";
    for (const CellTiming& c : cells) {
        out << c.m + 1 << ',' << c.n + 1 << ',' << c.j + 1 << ',' << c.k << ',' << c.start << ','
            << c.train_time << ',' << c.upload_time << ',' << c.inactive << ','
            << (c.exec_case == ExecutionCase::kImmediate ? "immediate" : "delayed") << ',' << c.ntt
            << ',' << c.total << ',' << c.end << '\n';
    }
    return out.str();
}

}  // namespace vecfl
