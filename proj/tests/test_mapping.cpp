#include <doctest.h>

#include "rspt/mapping.hpp"
#include "support/oracles.hpp"

using namespace rspt;

namespace {

World empty_room(Scalar half = 15) {
    World w;
    w.bounds = {{-half, -half}, {half, half}};
    return w;
}

AgentState far_target() {
    AgentState a;
    a.pose = {14, 14, 0};
    return a;
}

DepthScan scan_at(const World& w, const Pose2& pose, const SensorModel& sensor) {
    return cast_scan(w, pose, sensor, far_target());
}

}  // namespace

TEST_CASE("integrate_scan: open room marks traversed cells free, none occupied") {
    const World w = empty_room(20);
    OccupancyField field = OccupancyField::for_bounds(w.bounds);
    SensorModel sensor;
    integrate_scan(field, scan_at(w, {0, 0, 0}, sensor), {0, 0, 0});
    int freed = 0;
    for (int r = 0; r < field.rows; ++r) {
        for (int c = 0; c < field.cols; ++c) {
            CHECK(field.log_odds(r, c) <= 0);
            if (field.visited(r, c)) {
                ++freed;
                CHECK(field.log_odds(r, c) == doctest::Approx(-0.4));
            }
        }
    }
    CHECK(freed > 100);
}

TEST_CASE("integrate_scan: repeated wall scans clamp the hit cells") {
    World w = empty_room();
    w.obstacles.push_back({AARect{{3.5, 0}, {0.5, 3}}});
    OccupancyField field = OccupancyField::for_bounds(w.bounds);
    SensorModel sensor;
    const DepthScan scan = scan_at(w, {0, 0, 0}, sensor);
    for (int i = 0; i < 30; ++i) integrate_scan(field, scan, {0, 0, 0});
    // The cell just past the wall face at x = 3 on the center ray.
    const auto cell = field.cell_of({3.01, 0.0});
    REQUIRE(cell.has_value());
    CHECK(field.log_odds((*cell)[0], (*cell)[1]) == doctest::Approx(4.0));
    CHECK(field.probability((*cell)[0], (*cell)[1]) > 0.98);
}

TEST_CASE("integrate_scan: one contradicting scan subtracts exactly the free decrement") {
    World w = empty_room();
    w.obstacles.push_back({AARect{{3.5, 0}, {0.5, 3}}});
    OccupancyField field = OccupancyField::for_bounds(w.bounds);
    SensorModel sensor{kPi / 2, 31, 7.5};
    integrate_scan(field, scan_at(w, {0, 0, 0}, sensor), {0, 0, 0});
    const auto cell = field.cell_of({3.01, 0.0});
    REQUIRE(cell.has_value());
    const Scalar before = field.log_odds((*cell)[0], (*cell)[1]);
    CHECK(before == doctest::Approx(0.85));
    // Same scene without the wall: the same cells now read free.
    const World wo = empty_room();
    integrate_scan(field, scan_at(wo, {0, 0, 0}, sensor), {0, 0, 0});
    CHECK(field.log_odds((*cell)[0], (*cell)[1]) == doctest::Approx(before - 0.4));
}

TEST_CASE("integrate_scan: log odds never leave the clamp under fuzzing") {
    GenerationConfig cfg;
    const World w = generate_world(cfg, 55);
    OccupancyField field = OccupancyField::for_bounds(w.bounds);
    SensorModel sensor{kPi / 2, 20, 7.5};
    RandomStream rng(9);
    // ~100k cell updates across random poses.
    for (int i = 0; i < 700; ++i) {
        Pose2 pose{rng.uniform(-9, 9), rng.uniform(-9, 9), rng.uniform(-4, 4)};
        integrate_scan(field, scan_at(w, pose, sensor), pose);
    }
    CHECK(field.log_odds.maxCoeff() <= 4.0 + 1e-12);
    CHECK(field.log_odds.minCoeff() >= -4.0 - 1e-12);
    for (int r = 0; r < field.rows; ++r)
        for (int c = 0; c < field.cols; ++c) {
            const Scalar p = field.probability(r, c);
            CHECK(p > 0.017);
            CHECK(p < 0.983);
        }
}

TEST_CASE("extract_ego_grid: identity pose copies the central window") {
    const World w = empty_room();
    OccupancyField field = OccupancyField::for_bounds(w.bounds);
    // Paint a recognizable pattern into the field.
    RandomStream rng(10);
    for (int r = 0; r < field.rows; ++r)
        for (int c = 0; c < field.cols; ++c) {
            field.visited(r, c) = 1;
            field.log_odds(r, c) = rng.uniform(-4, 4);
        }
    const EgoGrid grid = extract_ego_grid(field, {0, 0, kPi / 2});
    // Tracker at the origin facing +y: ego rows align with world rows.
    for (int row = 0; row < EgoGrid::kSize; ++row) {
        for (int col = 0; col < EgoGrid::kSize; ++col) {
            if (row == EgoGrid::center_index() && col == EgoGrid::center_index()) continue;
            const RelPos rel = EgoGrid::rel_of_cell(row, col);
            const Vec2 world_pt = from_tracker_frame(rel, {0, 0, kPi / 2});
            const auto cell = field.cell_of(world_pt);
            REQUIRE(cell.has_value());
            CHECK(grid.explored(row, col) == 1);
            CHECK(grid.prob(row, col) ==
                  doctest::Approx(field.probability((*cell)[0], (*cell)[1])));
        }
    }
}

TEST_CASE("extract_ego_grid: 180 degree rotation flips the grid cellwise") {
    const World w = empty_room();
    OccupancyField field = OccupancyField::for_bounds(w.bounds);
    RandomStream rng(11);
    for (int r = 0; r < field.rows; ++r)
        for (int c = 0; c < field.cols; ++c) {
            field.visited(r, c) = 1;
            field.log_odds(r, c) = rng.uniform(-4, 4);
        }
    const EgoGrid a = extract_ego_grid(field, {1.25, -0.75, 0.4});
    const EgoGrid b = extract_ego_grid(field, {1.25, -0.75, 0.4 + kPi});
    const int n = EgoGrid::kSize;
    const int center = EgoGrid::center_index();
    for (int row = 0; row < n; ++row)
        for (int col = 0; col < n; ++col) {
            if ((row == center && col == center) ||
                (n - 1 - row == center && n - 1 - col == center))
                continue;
            CHECK(b.prob(row, col) == doctest::Approx(a.prob(n - 1 - row, n - 1 - col)));
        }
}

TEST_CASE("extract_ego_grid: random poses match a per-cell lookup oracle") {
    GenerationConfig cfg;
    const World w = generate_world(cfg, 66);
    OccupancyField field = OccupancyField::for_bounds(w.bounds);
    SensorModel sensor{kPi / 2, 40, 7.5};
    RandomStream rng(12);
    for (int i = 0; i < 40; ++i) {
        Pose2 pose{rng.uniform(-8, 8), rng.uniform(-8, 8), rng.uniform(-4, 4)};
        integrate_scan(field, scan_at(w, pose, sensor), pose);
    }
    for (int i = 0; i < 5; ++i) {
        const Pose2 pose{rng.uniform(-8, 8), rng.uniform(-8, 8), rng.uniform(-4, 4)};
        const EgoGrid grid = extract_ego_grid(field, pose);
        for (int row = 0; row < EgoGrid::kSize; ++row) {
            for (int col = 0; col < EgoGrid::kSize; ++col) {
                if (row == EgoGrid::center_index() && col == EgoGrid::center_index())
                    continue;
                const Vec2 world_pt = from_tracker_frame(EgoGrid::rel_of_cell(row, col), pose);
                const auto cell = field.cell_of(world_pt);
                if (!cell || !field.visited((*cell)[0], (*cell)[1])) {
                    CHECK(grid.explored(row, col) == 0);
                    CHECK(grid.prob(row, col) == doctest::Approx(0.5));
                } else {
                    CHECK(grid.explored(row, col) == 1);
                    CHECK(grid.prob(row, col) ==
                          doctest::Approx(field.probability((*cell)[0], (*cell)[1])));
                }
            }
        }
    }
}

TEST_CASE("extract_ego_grid: the tracker cell is never occupied") {
    const World w = empty_room();
    OccupancyField field = OccupancyField::for_bounds(w.bounds);
    const auto cell = field.cell_of({0.1, 0.1});
    REQUIRE(cell.has_value());
    field.visited((*cell)[0], (*cell)[1]) = 1;
    field.log_odds((*cell)[0], (*cell)[1]) = 4.0;  // stale occupied evidence
    const EgoGrid grid = extract_ego_grid(field, {0.1, 0.1, 0});
    CHECK(grid.prob(EgoGrid::center_index(), EgoGrid::center_index()) <= 0.5);
}

TEST_CASE("mark_target: tags the expected cell, ignores lost and far targets") {
    EgoGrid grid;
    VisState vis;
    mark_target(grid, vis);  // not found
    CHECK(grid.target_cell[0] == -1);

    vis.found = true;
    vis.rel_pos = {0, 2.0};
    mark_target(grid, vis);
    CHECK(grid.target_cell[0] == 24);  // +2 m forward
    CHECK(grid.target_cell[1] == 20);  // center column

    EgoGrid far_grid;
    VisState far_vis;
    far_vis.found = true;
    far_vis.rel_pos = {0, 12.0};  // beyond the 10 m extent
    mark_target(far_grid, far_vis);
    CHECK(far_grid.target_cell[0] == -1);
}

TEST_CASE("mark_target: sweep matches a floor-division oracle") {
    RandomStream rng(13);
    for (int i = 0; i < 4000; ++i) {
        const RelPos rel{rng.uniform(-11, 11), rng.uniform(-11, 11)};
        EgoGrid grid;
        VisState vis;
        vis.found = true;
        vis.rel_pos = rel;
        mark_target(grid, vis);
        const int row = static_cast<int>(std::floor((rel.y + 10.0) / 0.5));
        const int col = static_cast<int>(std::floor((rel.x + 10.0) / 0.5));
        if (row < 0 || row >= 40 || col < 0 || col >= 40) {
            CHECK(grid.target_cell[0] == -1);
        } else {
            CHECK(grid.target_cell[0] == row);
            CHECK(grid.target_cell[1] == col);
        }
    }
}

TEST_CASE("mapping fidelity: a full spin classifies in-range cells like the oracle") {
    World w = empty_room(12);
    w.obstacles.push_back({AARect{{4, 2}, {1.0, 1.0}}});
    w.obstacles.push_back({Circle{{-3, -3}, 1.2}});
    w.obstacles.push_back({AARect{{-4, 4}, {1.5, 0.8}}});
    OccupancyField field = OccupancyField::for_bounds(w.bounds);
    SensorModel sensor;
    const Pose2 center{0, 0, 0};
    for (int i = 0; i < 24; ++i) {
        const Pose2 pose{0, 0, i * 15.0 * kPi / 180.0};
        integrate_scan(field, scan_at(w, pose, sensor), pose);
    }
    const EgoGrid grid = extract_ego_grid(field, center);
    int checked = 0, agree = 0;
    for (int row = 0; row < EgoGrid::kSize; ++row) {
        for (int col = 0; col < EgoGrid::kSize; ++col) {
            const RelPos rel = EgoGrid::rel_of_cell(row, col);
            if (rel.norm() > sensor.max_range) continue;
            if (!grid.explored(row, col)) continue;
            const Scalar p = grid.prob(row, col);
            if (p > 0.35 && p < 0.65) continue;  // undecided cells are not classified
            const Vec2 world_pt = from_tracker_frame(rel, center);
            const bool truth = oracle::point_in_any(world_pt, w);
            const bool mapped = p >= 0.5;
            ++checked;
            if (truth == mapped) ++agree;
        }
    }
    CHECK(checked > 300);
    CHECK(static_cast<Scalar>(agree) / checked >= 0.95);
}

TEST_CASE("grid snapshots round-trip the network input encoding") {
    GenerationConfig cfg;
    const World w = generate_world(cfg, 88);
    OccupancyField field = OccupancyField::for_bounds(w.bounds);
    SensorModel sensor{kPi / 2, 30, 7.5};
    integrate_scan(field, scan_at(w, w.tracker_spawn, sensor), w.tracker_spawn);
    EgoGrid grid = extract_ego_grid(field, w.tracker_spawn);
    VisState vis;
    vis.found = true;
    vis.rel_pos = {0.4, 2.2};
    mark_target(grid, vis);

    const GridSnapshot snap = GridSnapshot::of(grid);
    const Eigen::RowVectorXd direct = grid_to_input(grid);
    Eigen::RowVectorXd via = Eigen::RowVectorXd::Zero(kGridInputSize);
    snap.write_input(via);
    // Quantization error is bounded by half a level.
    CHECK((direct - via).cwiseAbs().maxCoeff() <= 1.0 / 254 + 1e-12);
    const EgoGrid back = snap.to_grid();
    CHECK(back.target_cell == grid.target_cell);
    for (int row = 0; row < EgoGrid::kSize; ++row)
        for (int col = 0; col < EgoGrid::kSize; ++col) {
            CHECK(back.explored(row, col) == grid.explored(row, col));
            if (grid.explored(row, col))
                CHECK(std::abs(back.prob(row, col) - grid.prob(row, col)) <= 0.5 / 254 + 1e-12);
        }
}
