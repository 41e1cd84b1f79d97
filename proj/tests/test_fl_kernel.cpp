#include <doctest.h>

#include <cmath>

#include "support/builders.hpp"
#include "vecfl/fl/kernel.hpp"

using namespace vecfl;

namespace {

ModelVector scalar_model(double v, double weight) {
    ModelVector m;
    m.params = {v};
    m.data_weight = weight;
    return m;
}

}  // namespace

TEST_CASE("analytic gradient matches central finite differences") {
    SyntheticTask task(6, 0.1, 42, 0);
    SyntheticTask::Shard shard = task.make_shard(0, 40);
    SeededRng rng(7);
    std::vector<int> all(shard.count);
    for (int i = 0; i < shard.count; ++i) all[i] = i;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> w(6);
        for (double& x : w) x = rng.normal();
        std::vector<double> g = task.gradient(shard, w, all);
        const double h = 1e-6;
        for (int d = 0; d < 6; ++d) {
            std::vector<double> wp = w, wm = w;
            wp[d] += h;
            wm[d] -= h;
            double fd = (task.loss(shard, wp) - task.loss(shard, wm)) / (2 * h);
            double denom = std::max(1.0, std::abs(fd));
            CHECK(std::abs(g[d] - fd) / denom < 1e-5);
        }
    }
}

TEST_CASE("zero learning rate and zero iterations leave the model unchanged") {
    SyntheticTask task(4, 0.05, 1, 0);
    SyntheticTask::Shard shard = task.make_shard(0, 32);
    ModelVector m;
    m.params = {0.5, -0.25, 0.125, 1.0};
    m.data_weight = 32;
    SeededRng rng(3);
    ModelVector a = local_sgd(m, task, shard, 5, 0.0, 8, rng);
    CHECK(a.params == m.params);
    SeededRng rng2(3);
    ModelVector b = local_sgd(m, task, shard, 0, 0.1, 8, rng2);
    CHECK(b.params == m.params);
}

TEST_CASE("full-batch descent strictly decreases the loss") {
    SyntheticTask task(4, 0.0, 9, 0);
    SyntheticTask::Shard shard = task.make_shard(0, 64);
    ModelVector m;
    m.params.assign(4, 0.0);
    m.data_weight = 64;
    SeededRng rng(5);
    double prev = task.loss(shard, m.params);
    for (int step = 0; step < 10; ++step) {
        m = local_sgd(m, task, shard, 1, 0.01, 64, rng);
        double now = task.loss(shard, m.params);
        CHECK(now < prev);
        prev = now;
    }
}

TEST_CASE("edge aggregation: uniform weights give the arithmetic mean") {
    std::vector<ModelVector> ms{scalar_model(1.0, 10), scalar_model(3.0, 10)};
    ModelVector out = edge_aggregate(ms);
    CHECK(out.params[0] == doctest::Approx(2.0));
    CHECK(out.data_weight == doctest::Approx(20));
}

TEST_CASE("edge aggregation of a single model is the identity") {
    std::vector<ModelVector> ms{scalar_model(1.25, 7)};
    ModelVector out = edge_aggregate(ms);
    CHECK(out.params[0] == doctest::Approx(1.25));
}

TEST_CASE("edge aggregation weights 1 and 3 on values 0 and 4 give 3") {
    std::vector<ModelVector> ms{scalar_model(0.0, 1), scalar_model(4.0, 3)};
    CHECK(edge_aggregate(ms).params[0] == doctest::Approx(3.0));
}

TEST_CASE("edge aggregation error paths") {
    CHECK_THROWS_AS(edge_aggregate({}), EmptyAggregation);
    ModelVector a = scalar_model(1, 1);
    ModelVector b;
    b.params = {1.0, 2.0};
    b.data_weight = 1;
    std::vector<ModelVector> ms{a, b};
    CHECK_THROWS_AS(edge_aggregate(ms), DimMismatch);
}

TEST_CASE("global blend boundaries") {
    ModelVector prev = scalar_model(2.0, 5);
    std::vector<ModelVector> edges{scalar_model(4.0, 5)};
    ModelVector keep = global_aggregate(prev, edges, 1.0, 1);
    CHECK(keep.params[0] == doctest::Approx(2.0));
    ModelVector fresh = global_aggregate(prev, edges, 0.0, 1);
    CHECK(fresh.params[0] == doctest::Approx(4.0));
    ModelVector half = global_aggregate(prev, edges, 0.5, 1);
    CHECK(half.params[0] == doctest::Approx(3.0));
    CHECK_THROWS_AS(global_aggregate(prev, edges, 0.5, 2), QuorumMismatch);
}

TEST_CASE("global blend with zero weight on history and equal volumes is the mean") {
    ModelVector prev = scalar_model(100.0, 1);
    std::vector<ModelVector> edges{scalar_model(1.0, 8), scalar_model(5.0, 8)};
    ModelVector out = global_aggregate(prev, edges, 0.0, 2);
    CHECK(out.params[0] == doctest::Approx(3.0));
}

TEST_CASE("aggregation weights sum to one within 1e-12") {
    SeededRng rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        int count = 1 + static_cast<int>(rng.uniform_int(6));
        std::vector<ModelVector> ms;
        double total = 0;
        for (int i = 0; i < count; ++i) {
            double w = rng.uniform(1, 500);
            ms.push_back(scalar_model(rng.normal(), w));
            total += w;
        }
        double wsum = 0;
        for (const ModelVector& m : ms) wsum += m.data_weight / total;
        CHECK(std::abs(wsum - 1.0) < 1e-12);
        // The blend's second term uses the same weights.
        ModelVector agg = edge_aggregate(ms);
        CHECK(agg.data_weight == doctest::Approx(total));
    }
}

TEST_CASE("convergence check is inclusive at the threshold") {
    ModelVector a = scalar_model(1.0, 1);
    CHECK(check_convergence(a, a, 1e-12));
    ModelVector b = scalar_model(1.5, 1);
    CHECK_FALSE(check_convergence(a, b, 0.4));
    ModelVector u, v;
    u.params = {0.0, 0.0};
    v.params = {0.3, 0.4};
    CHECK(check_convergence(u, v, 0.5));  // 3-4-5 at the boundary
    ModelVector x, y;
    x.params = {0.0};
    y.params = {1.0, 2.0};
    CHECK_THROWS_AS(check_convergence(x, y, 1.0), DimMismatch);
}

TEST_CASE("model snapshots round-trip through the binary form") {
    ModelVector m;
    m.params = {0.0, -1.5, 3.14159265358979, 1e-300, -0.0};
    std::string bytes = serialize_model(m);
    CHECK(bytes.size() == 8 + 5 * 8);
    ModelVector back = deserialize_model(bytes);
    CHECK(back.params == m.params);
    CHECK_THROWS(deserialize_model(bytes.substr(0, 11)));
}
