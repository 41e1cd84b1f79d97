#ifndef VECFL_CORE_SCHEDULE_HPP_
#define VECFL_CORE_SCHEDULE_HPP_

#include <stdexcept>
#include <vector>

#include "vecfl/core/types.hpp"

namespace vecfl {

// Binary task-to-vehicle assignment for one global iteration. Each vehicle
// is attached to at most one edge server for the round; entries exist only
// for attached (covered) vehicles.
class Schedule {
public:
    Schedule() = default;
    Schedule(int vehicle_count, int task_count)
        : task_count_(task_count),
          vehicle_es_(vehicle_count, -1),
          bits_(static_cast<std::size_t>(vehicle_count) * task_count, 0) {}

    int vehicle_count() const { return static_cast<int>(vehicle_es_.size()); }
    int task_count() const { return task_count_; }

    void attach(VehicleId n, EsId m) { vehicle_es_.at(n) = m; }
    EsId es_of(VehicleId n) const { return vehicle_es_.at(n); }
    bool attached(VehicleId n) const { return vehicle_es_.at(n) >= 0; }

    void set(VehicleId n, TaskId j, bool on) {
        bits_.at(index(n, j)) = on ? 1 : 0;
    }
    bool assigned(VehicleId n, TaskId j) const {
        return bits_.at(index(n, j)) != 0;
    }
    bool assigned(EsId m, VehicleId n, TaskId j) const {
        return vehicle_es_.at(n) == m && assigned(n, j);
    }

    std::vector<TaskId> tasks_of(VehicleId n) const {
        std::vector<TaskId> out;
        for (TaskId j = 0; j < task_count_; ++j)
            if (assigned(n, j)) out.push_back(j);
        return out;
    }

    std::vector<VehicleId> vehicles_of(EsId m, TaskId j) const {
        std::vector<VehicleId> out;
        for (VehicleId n = 0; n < vehicle_count(); ++n)
            if (vehicle_es_[n] == m && assigned(n, j)) out.push_back(n);
        return out;
    }

    std::vector<VehicleId> covered_by(EsId m) const {
        std::vector<VehicleId> out;
        for (VehicleId n = 0; n < vehicle_count(); ++n)
            if (vehicle_es_[n] == m) out.push_back(n);
        return out;
    }

    // Assignment count of task j across the whole system.
    int count_of(TaskId j) const {
        int c = 0;
        for (VehicleId n = 0; n < vehicle_count(); ++n)
            if (assigned(n, j)) ++c;
        return c;
    }

    std::vector<int> counts_per_task() const {
        std::vector<int> c(task_count_, 0);
        for (TaskId j = 0; j < task_count_; ++j) c[j] = count_of(j);
        return c;
    }

private:
    std::size_t index(VehicleId n, TaskId j) const {
        return static_cast<std::size_t>(n) * task_count_ + j;
    }

    int task_count_ = 0;
    std::vector<int> vehicle_es_;
    std::vector<std::uint8_t> bits_;
};

// Ordered task list of one vehicle for one edge iteration together with the
// 1-based position lookup.
struct TrainingSequence {
    std::vector<TaskId> order;

    // 1-based rank of task j; throws if the task is not in the sequence.
    int position_of(TaskId j) const {
        for (std::size_t i = 0; i < order.size(); ++i)
            if (order[i] == j) return static_cast<int>(i) + 1;
        throw std::out_of_range("task not in training sequence");
    }
    bool contains(TaskId j) const {
        for (TaskId t : order)
            if (t == j) return true;
        return false;
    }
    int length() const { return static_cast<int>(order.size()); }
};

// Per-vehicle, per-edge-iteration sequences for one global round.
// k is 1-based in queries to match the iteration index convention.
class SequencePlan {
public:
    SequencePlan() = default;
    SequencePlan(int vehicle_count, int max_edge_iters)
        : max_k_(max_edge_iters), seqs_(static_cast<std::size_t>(vehicle_count) * max_edge_iters) {}

    int max_edge_iters() const { return max_k_; }

    TrainingSequence& at(VehicleId n, int k) { return seqs_.at(index(n, k)); }
    const TrainingSequence& at(VehicleId n, int k) const { return seqs_.at(index(n, k)); }

private:
    std::size_t index(VehicleId n, int k) const {
        if (k < 1 || k > max_k_) throw std::out_of_range("edge iteration out of range");
        return static_cast<std::size_t>(n) * max_k_ + (k - 1);
    }

    int max_k_ = 0;
    std::vector<TrainingSequence> seqs_;
};

enum class SchedulerKind { kHeart, kTsso, kTspso, kTsga, kTsgd };

inline const char* to_string(SchedulerKind k) {
    switch (k) {
        case SchedulerKind::kHeart: return "heart";
        case SchedulerKind::kTsso: return "tsso";
        case SchedulerKind::kTspso: return "tspso";
        case SchedulerKind::kTsga: return "tsga";
        case SchedulerKind::kTsgd: return "tsgd";
    }
    return "?";
}

}  // namespace vecfl

#endif  // VECFL_CORE_SCHEDULE_HPP_
