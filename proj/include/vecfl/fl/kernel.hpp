#ifndef VECFL_FL_KERNEL_HPP_
#define VECFL_FL_KERNEL_HPP_

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "vecfl/core/rng.hpp"
#include "vecfl/core/types.hpp"

namespace vecfl {

class DimMismatch : public std::runtime_error {
public:
    DimMismatch() : std::runtime_error("model dimension mismatch") {}
};
class EmptyAggregation : public std::runtime_error {
public:
    EmptyAggregation() : std::runtime_error("cannot aggregate zero models") {}
};
class QuorumMismatch : public std::runtime_error {
public:
    QuorumMismatch() : std::runtime_error("edge model count differs from the task quorum") {}
};
class NonFiniteGradient : public std::runtime_error {
public:
    NonFiniteGradient() : std::runtime_error("gradient diverged to a non-finite value") {}
};

// Flat parameter vector plus the sample count backing it (aggregation
// weight).
struct ModelVector {
    std::vector<double> params;
    double data_weight = 0;

    int dim() const { return static_cast<int>(params.size()); }
};

// Seeded linear-regression problem: y = X w_true + noise. Stands in for the
// per-task loss; mean squared error with an analytic gradient.
class SyntheticTask {
public:
    // Data for one vehicle's shard is generated lazily and deterministically
    // from (seed, task, vehicle).
    SyntheticTask(int model_dim, double noise_sigma, std::uint64_t seed, TaskId task);

    int dim() const { return dim_; }
    const std::vector<double>& true_weights() const { return w_true_; }

    struct Shard {
        std::vector<double> features;  // row-major |D| x dim
        std::vector<double> labels;
        int count = 0;
    };
    Shard make_shard(VehicleId n, int samples) const;

    // Mean squared error over the given rows.
    double loss(const Shard& shard, std::span<const double> w) const;
    // Analytic MSE gradient over the rows listed in `rows`.
    std::vector<double> gradient(const Shard& shard, std::span<const double> w,
                                 std::span<const int> rows) const;

private:
    int dim_;
    double noise_sigma_;
    std::uint64_t seed_;
    TaskId task_;
    std::vector<double> w_true_;
};

// H mini-batch SGD steps starting from the received edge model. Batches are
// drawn without replacement, reshuffling once an epoch is exhausted.
ModelVector local_sgd(const ModelVector& model, const SyntheticTask& task,
                      const SyntheticTask::Shard& shard, int iterations, double learning_rate,
                      int batch_size, SeededRng& rng);

// Data-volume-weighted mean of local models.
ModelVector edge_aggregate(std::span<const ModelVector> models);

// Blend of the previous global model with the weighted mean of the quorum's
// edge models.
ModelVector global_aggregate(const ModelVector& prev_global, std::span<const ModelVector> edge_models,
                             double alpha, int expected_quorum);

// L2 movement test; inclusive at the threshold (with a boundary tolerance so
// exact-distance cases are not lost to rounding).
bool check_convergence(const ModelVector& curr, const ModelVector& prev, double beta);

double l2_distance(std::span<const double> a, std::span<const double> b);

// Little-endian binary snapshot: u64 dimension header then the doubles.
std::string serialize_model(const ModelVector& m);
ModelVector deserialize_model(const std::string& bytes);

}  // namespace vecfl

#endif  // VECFL_FL_KERNEL_HPP_
