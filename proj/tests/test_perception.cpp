#include <doctest.h>

#include "rspt/perception.hpp"
#include "support/oracles.hpp"

using namespace rspt;

namespace {

AgentState agent_at(Scalar x, Scalar y, Scalar heading = 0) {
    AgentState a;
    a.pose = {x, y, heading};
    return a;
}

World empty_room() {
    World w;
    w.bounds = {{-10, -10}, {10, 10}};
    return w;
}

}  // namespace

TEST_CASE("detect: occluded target is never found") {
    World w = empty_room();
    w.obstacles.push_back({AARect{{2, 0}, {0.5, 0.5}}});
    SensorModel sensor;
    RandomStream rng(1);
    for (int i = 0; i < 200; ++i) {
        const Detection det = detect(w, {0, 0, 0}, agent_at(4, 0), sensor, {}, rng);
        CHECK_FALSE(det.found);
    }
}

TEST_CASE("detect: noiseless detection reports the center ray and body range") {
    const World w = empty_room();
    SensorModel sensor{kPi / 2, 9, 7.5};
    RandomStream rng(2);
    const AgentState target = agent_at(4, 0);
    const Detection det = detect(w, {0, 0, 0}, target, sensor, DetectionNoise::none(), rng);
    REQUIRE(det.found);
    CHECK(det.ray_index == 4);
    CHECK(det.depth == doctest::Approx(4.0 - target.radius));
}

TEST_CASE("detect: depth noise has the configured spread") {
    const World w = empty_room();
    SensorModel sensor;
    DetectionNoise noise{0.0, 0.0, 0.1};
    RandomStream rng(3);
    std::vector<Scalar> depths;
    for (int i = 0; i < 10000; ++i) {
        const Detection det = detect(w, {0, 0, 0}, agent_at(4, 0), sensor, noise, rng);
        REQUIRE(det.found);
        depths.push_back(det.depth);
    }
    Scalar mean = 0;
    for (Scalar d : depths) mean += d;
    mean /= static_cast<Scalar>(depths.size());
    Scalar var = 0;
    for (Scalar d : depths) var += (d - mean) * (d - mean);
    const Scalar std = std::sqrt(var / (static_cast<Scalar>(depths.size()) - 1));
    CHECK(std == doctest::Approx(0.1).epsilon(0.1));
    CHECK(std::abs(std - 0.1) < 0.01);
}

TEST_CASE("detect: miss rate applies only to visible targets") {
    const World w = empty_room();
    SensorModel sensor;
    DetectionNoise noise{0.25, 0, 0};
    RandomStream rng(4);
    int found = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i)
        if (detect(w, {0, 0, 0}, agent_at(3, 0), sensor, noise, rng).found) ++found;
    const Scalar rate = static_cast<Scalar>(found) / n;
    CHECK(rate == doctest::Approx(0.75).epsilon(0.02));
}

TEST_CASE("update_vis_state: lost counter counts consecutive misses exactly") {
    SensorModel sensor;
    VisState vis = VisState::initial({0, 2.5});
    const TrackerMotion still{{0, 0}, 0};

    RandomStream rng(5);
    int expected_run = 0;
    for (int i = 0; i < 500; ++i) {
        Detection det;
        det.found = rng.uniform() < 0.5;
        det.ray_index = sensor.nearest_ray(0);
        det.depth = 2.0;
        vis = update_vis_state(vis, det, sensor, still);
        expected_run = det.found ? 0 : expected_run + 1;
        CHECK(vis.lost_count == expected_run);
        CHECK(vis.found == det.found);
        if (!det.found) {
            CHECK(vis.rel_pos.x == 0);
            CHECK(vis.rel_pos.y == 0);
        }
    }
}

TEST_CASE("update_vis_state: found detection sets rel_pos and last_seen") {
    SensorModel sensor{kPi / 2, 9, 7.5};
    VisState prev = VisState::initial({0, 2.5});
    prev.lost_count = 3;
    Detection det;
    det.found = true;
    det.ray_index = 4;
    det.depth = 2.0;
    const VisState vis = update_vis_state(prev, det, sensor, {{0, 0}, 0});
    CHECK(vis.found);
    CHECK(vis.lost_count == 0);
    CHECK(vis.rel_pos.x == doctest::Approx(0).epsilon(1e-12));
    CHECK(vis.rel_pos.y == doctest::Approx(2.0));
    CHECK(vis.last_seen.x == vis.rel_pos.x);
    CHECK(vis.last_seen.y == vis.rel_pos.y);
}

TEST_CASE("update_vis_state: last_seen rotates with the tracker while unseen") {
    SensorModel sensor;
    VisState vis = VisState::initial({0, 3});
    // Tracker turns 90 degrees left in place.
    const TrackerMotion quarter_left{{0, 0}, kPi / 2};
    const VisState after = update_vis_state(vis, {}, sensor, quarter_left);
    CHECK(after.last_seen.x == doctest::Approx(3).epsilon(1e-9));
    CHECK(after.last_seen.y == doctest::Approx(0).epsilon(1e-9));
    CHECK(after.last_seen.norm() == doctest::Approx(3).epsilon(1e-9));
    CHECK(after.lost_count == 1);
}

TEST_CASE("zero-noise pipeline matches ground truth within ray quantization") {
    GenerationConfig cfg;
    cfg.obstacle_count = 0;
    SensorModel sensor;
    RandomStream rng(6);
    for (uint64_t seed = 0; seed < 20; ++seed) {
        const World w = generate_world(cfg, seed);
        const AgentState target = agent_at(w.target_spawn.x, w.target_spawn.y);
        const Detection det =
            detect(w, w.tracker_spawn, target, sensor, DetectionNoise::none(), rng);
        REQUIRE(det.found);
        const RelPos est = ct_detection_to_relpos(sensor, det.ray_index, det.depth);
        const RelPos truth = to_tracker_frame(target.pose.position(), w.tracker_spawn);
        // Bearing quantized to one ray, range reduced by the body radius.
        const Scalar tol = sensor.spacing() * truth.norm() + target.radius + 1e-9;
        CHECK((est.vec() - truth.vec()).norm() <= tol);
    }
}
