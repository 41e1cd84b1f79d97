#include "vecfl/fl/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

namespace vecfl {

SyntheticTask::SyntheticTask(int model_dim, double noise_sigma, std::uint64_t seed, TaskId task)
    : dim_(model_dim), noise_sigma_(noise_sigma), seed_(seed), task_(task) {
    SeededRng rng = SeededRng::derive(seed, {stream::kData, static_cast<std::uint64_t>(task)});
    w_true_.resize(dim_);
    for (double& w : w_true_) w = rng.normal();
}

SyntheticTask::Shard SyntheticTask::make_shard(VehicleId n, int samples) const {
    SeededRng rng = SeededRng::derive(
        seed_, {stream::kData, static_cast<std::uint64_t>(task_), static_cast<std::uint64_t>(n)});
    Shard s;
    s.count = samples;
    s.features.resize(static_cast<std::size_t>(samples) * dim_);
    s.labels.resize(samples);
    for (int i = 0; i < samples; ++i) {
        double y = 0;
        for (int d = 0; d < dim_; ++d) {
            double x = rng.normal();
            s.features[static_cast<std::size_t>(i) * dim_ + d] = x;
            y += x * w_true_[d];
        }
        s.labels[i] = y + noise_sigma_ * rng.normal();
    }
    return s;
}

double SyntheticTask::loss(const Shard& shard, std::span<const double> w) const {
    double sum = 0;
    for (int i = 0; i < shard.count; ++i) {
        double pred = 0;
        for (int d = 0; d < dim_; ++d)
            pred += shard.features[static_cast<std::size_t>(i) * dim_ + d] * w[d];
        double r = pred - shard.labels[i];
        sum += r * r;
    }
    return shard.count > 0 ? sum / shard.count : 0.0;
}

std::vector<double> SyntheticTask::gradient(const Shard& shard, std::span<const double> w,
                                            std::span<const int> rows) const {
    std::vector<double> g(dim_, 0.0);
    for (int i : rows) {
        double pred = 0;
        const double* x = &shard.features[static_cast<std::size_t>(i) * dim_];
        for (int d = 0; d < dim_; ++d) pred += x[d] * w[d];
        double r = pred - shard.labels[i];
        for (int d = 0; d < dim_; ++d) g[d] += 2.0 * r * x[d];
    }
    if (!rows.empty())
        for (double& v : g) v /= static_cast<double>(rows.size());
    return g;
}

ModelVector local_sgd(const ModelVector& model, const SyntheticTask& task,
                      const SyntheticTask::Shard& shard, int iterations, double learning_rate,
                      int batch_size, SeededRng& rng) {
    if (model.dim() != task.dim()) throw DimMismatch();
    ModelVector out = model;
    out.data_weight = shard.count;
    if (iterations <= 0 || learning_rate == 0.0) return out;

    // Without-replacement batches; reshuffle when the epoch is exhausted.
    std::vector<int> order(shard.count);
    std::iota(order.begin(), order.end(), 0);
    std::size_t cursor = order.size();  // force a shuffle on first use
    std::vector<int> batch;
    for (int h = 0; h < iterations; ++h) {
        batch.clear();
        int want = std::min(batch_size, shard.count);
        while (static_cast<int>(batch.size()) < want) {
            if (cursor >= order.size()) {
                for (std::size_t i = order.size(); i > 1; --i)
                    std::swap(order[i - 1], order[rng.uniform_int(i)]);
                cursor = 0;
            }
            batch.push_back(order[cursor++]);
        }
        std::vector<double> g = task.gradient(shard, out.params, batch);
        for (int d = 0; d < task.dim(); ++d) {
            out.params[d] -= learning_rate * g[d];
            if (!std::isfinite(out.params[d])) throw NonFiniteGradient();
        }
    }
    return out;
}

ModelVector edge_aggregate(std::span<const ModelVector> models) {
    if (models.empty()) throw EmptyAggregation();
    int dim = models[0].dim();
    double total = 0;
    for (const ModelVector& m : models) {
        if (m.dim() != dim) throw DimMismatch();
        total += m.data_weight;
    }
    ModelVector out;
    out.params.assign(dim, 0.0);
    out.data_weight = total;
    for (const ModelVector& m : models) {
        double w = m.data_weight / total;
        for (int d = 0; d < dim; ++d) out.params[d] += w * m.params[d];
    }
    return out;
}

ModelVector global_aggregate(const ModelVector& prev_global, std::span<const ModelVector> edge_models,
                             double alpha, int expected_quorum) {
    if (static_cast<int>(edge_models.size()) != expected_quorum) throw QuorumMismatch();
    if (edge_models.empty()) throw EmptyAggregation();
    int dim = prev_global.dim();
    double total = 0;
    for (const ModelVector& m : edge_models) {
        if (m.dim() != dim) throw DimMismatch();
        total += m.data_weight;
    }
    ModelVector out;
    out.params.assign(dim, 0.0);
    out.data_weight = total;
    for (const ModelVector& m : edge_models) {
        double w = m.data_weight / total;
        for (int d = 0; d < dim; ++d) out.params[d] += w * m.params[d];
    }
    for (int d = 0; d < dim; ++d)
        out.params[d] = alpha * prev_global.params[d] + (1.0 - alpha) * out.params[d];
    return out;
}

double l2_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimMismatch();
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

bool check_convergence(const ModelVector& curr, const ModelVector& prev, double beta) {
    double d = l2_distance(curr.params, prev.params);
    // Inclusive at the threshold; the relative slack keeps exact-boundary
    // distances from flipping on the last bit of the norm.
    return d <= beta + 1e-9 * std::max(1.0, beta);
}

std::string serialize_model(const ModelVector& m) {
    std::string out;
    std::uint64_t dim = m.params.size();
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((dim >> (8 * i)) & 0xff);
    out.append(buf, 8);
    for (double v : m.params) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
        out.append(buf, 8);
    }
    return out;
}

ModelVector deserialize_model(const std::string& bytes) {
    if (bytes.size() < 8) throw std::runtime_error("truncated model snapshot");
    auto u64_at = [&](std::size_t off) {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[off + i])) << (8 * i);
        return v;
    };
    std::uint64_t dim = u64_at(0);
    if (bytes.size() != 8 + dim * 8) throw std::runtime_error("model snapshot size mismatch");
    ModelVector m;
    m.params.resize(dim);
    for (std::uint64_t d = 0; d < dim; ++d) {
        std::uint64_t bits = u64_at(8 + d * 8);
        std::memcpy(&m.params[d], &bits, 8);
    }
    return m;
}

}  // namespace vecfl
