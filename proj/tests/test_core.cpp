#include <doctest.h>

#include "support/builders.hpp"
#include "vecfl/core/config_io.hpp"
#include "vecfl/core/schedule.hpp"
#include "vecfl/core/validate.hpp"

using namespace vecfl;

TEST_CASE("quorum larger than the ES count is rejected") {
    SystemConfig cfg = testing::build_config({});
    cfg.tasks[0].cloud_quorum = cfg.es_count() + 1;
    ValidationResult r = validate_config(cfg);
    CHECK_FALSE(r.ok());
    CHECK(r.has("QUORUM_EXCEEDS_M"));
}

TEST_CASE("table-shaped default instance validates") {
    SystemConfig cfg = testing::build_config({});
    CHECK(cfg.task_count() == 4);
    for (const TaskSpec& t : cfg.tasks) {
        CHECK(t.local_iters >= 4);
        CHECK(t.local_iters <= 6);
        CHECK(t.edge_iters >= 8);
        CHECK(t.edge_iters <= 10);
    }
    CHECK(cfg.hyper.particles == 30);
    CHECK(cfg.hyper.iterations == 100);
    CHECK(cfg.hyper.phi_max == doctest::Approx(0.3));
    ValidationResult r = validate_config(cfg);
    CAPTURE(r.violations.size());
    for (const auto& v : r.violations) CAPTURE(v.code);
    CHECK(r.ok());
}

TEST_CASE("blend weight outside [0,1] is rejected") {
    SystemConfig cfg = testing::build_config({});
    cfg.tasks[1].blend_alpha = 1.5;
    ValidationResult r = validate_config(cfg);
    CHECK_FALSE(r.ok());
    CHECK(r.has("ALPHA_OUT_OF_RANGE"));
}

TEST_CASE("validation reports the complete violation list") {
    SystemConfig cfg = testing::build_config({});
    cfg.tasks[0].cloud_quorum = 99;
    cfg.tasks[2].blend_alpha = -0.25;
    cfg.vehicles[3].speed = -1;
    ValidationResult r = validate_config(cfg);
    CHECK(r.has("QUORUM_EXCEEDS_M"));
    CHECK(r.has("ALPHA_OUT_OF_RANGE"));
    CHECK(r.has("SPEED_NEGATIVE"));
}

TEST_CASE("config serialization round-trips to an equal config") {
    SystemConfig cfg = testing::default_config(42);
    std::string text = serialize_config(cfg);
    SystemConfig back = parse_config(text);
    CHECK(back == cfg);
    CHECK(config_hash(back) == config_hash(cfg));
}

TEST_CASE("unknown config fields are rejected") {
    SystemConfig cfg = testing::default_config(7);
    std::string text = serialize_config(cfg);
    text.insert(text.rfind('}'), ",\"surprise\": 1");
    CHECK_THROWS_AS(parse_config(text), ConfigError);
}

TEST_CASE("schedule assignment counts match an independent recount") {
    SystemConfig cfg = testing::default_config(3);
    MobilityModel mobility(cfg, 3);
    SeededRng rng(11);
    Schedule s = testing::random_feasible_schedule(cfg, mobility, 0.0, rng);
    std::vector<int> recount(cfg.task_count(), 0);
    for (VehicleId n = 0; n < cfg.vehicle_count(); ++n)
        for (TaskId j = 0; j < cfg.task_count(); ++j)
            if (s.attached(n) && s.assigned(n, j)) ++recount[j];
    CHECK(recount == s.counts_per_task());
}

TEST_CASE("training sequence position lookup inverts the order") {
    TrainingSequence seq;
    seq.order = {3, 0, 2};
    CHECK(seq.position_of(3) == 1);
    CHECK(seq.position_of(0) == 2);
    CHECK(seq.position_of(2) == 3);
    std::vector<TaskId> rebuilt(3);
    for (TaskId j : seq.order) rebuilt[seq.position_of(j) - 1] = j;
    CHECK(rebuilt == seq.order);
    CHECK_THROWS(seq.position_of(1));
}
