#pragma once

// Synthetic wall-turning trajectories: a target approaches a wall whose
// distance varies per episode, then turns left or right with equal
// probability and follows it. The turn direction is unpredictable from the
// history alone and the turn onset is readable only from the map, which is
// what separates a structure-aware forecaster from history-only baselines.

#include "rspt/prediction.hpp"
#include "rspt/sensor.hpp"

namespace rspt::corpus {

struct WallTurnEpisode {
    World world;
    Pose2 observer;            // static tracker pose the windows are framed in
    std::vector<Vec2> track;   // target world positions, one per step
    int turn_step = 0;         // index of the first post-turn position
};

inline WallTurnEpisode make_wall_turn_episode(uint64_t seed, int length) {
    RandomStream rng(derive_seed(seed, 0x3a11));
    WallTurnEpisode ep;
    ep.world.bounds = {{-12, -12}, {12, 12}};
    const Scalar wall_y = rng.uniform(2.5, 5.5);
    const Scalar wall_half = rng.uniform(3.5, 5.0);
    const Scalar wall_x = rng.uniform(-1.0, 1.0);
    ep.world.obstacles.push_back({AARect{{wall_x, wall_y}, {wall_half, 0.3}}});
    ep.observer = {rng.uniform(-0.8, 0.8), rng.uniform(-3.2, -2.2), kPi / 2};
    ep.world.tracker_spawn = ep.observer;

    const Scalar speed = rng.uniform(0.3, 0.4);
    const Scalar standoff = rng.uniform(0.55, 0.85);
    const bool turn_right = rng.uniform() < 0.5;
    const Scalar approach_heading = kPi / 2 + rng.uniform(-0.25, 0.25);

    Vec2 pos{rng.uniform(-1.5, 1.5), rng.uniform(0.2, 1.2)};
    Vec2 dir{std::cos(approach_heading), std::sin(approach_heading)};
    const Scalar turn_line = wall_y - 0.3 - standoff;

    ep.turn_step = -1;
    for (int i = 0; i < length; ++i) {
        ep.track.push_back(pos);
        if (ep.turn_step < 0 && pos.y() + speed * dir.y() >= turn_line) {
            ep.turn_step = i + 1;
            dir = turn_right ? Vec2{1, 0} : Vec2{-1, 0};
        }
        pos += speed * dir;
    }
    ep.world.target_spawn = {ep.track.front().x(), ep.track.front().y(), approach_heading};
    return ep;
}

/// Ground-truth ego grid at the observer pose: every cell explored, occupancy
/// from the true world, target tagged at its current relative position.
inline EgoGrid ground_truth_grid(const WallTurnEpisode& ep, const Vec2& target_pos) {
    EgoGrid grid;
    for (int row = 0; row < EgoGrid::kSize; ++row) {
        for (int col = 0; col < EgoGrid::kSize; ++col) {
            const Vec2 world_pt = from_tracker_frame(EgoGrid::rel_of_cell(row, col), ep.observer);
            grid.explored(row, col) = 1;
            bool inside = false;
            for (const auto& o : ep.world.obstacles)
                if (contains(o, world_pt)) inside = true;
            grid.prob(row, col) = inside ? 0.95 : 0.05;
        }
    }
    const int c = EgoGrid::center_index();
    grid.prob(c, c) = std::min(grid.prob(c, c), Scalar(0.5));
    VisState vis;
    vis.found = true;
    vis.rel_pos = to_tracker_frame(target_pos, ep.observer);
    mark_target(grid, vis);
    return grid;
}

/// Sliding windows over one episode (all samples valid, ground-truth frames).
inline void episode_windows(const WallTurnEpisode& ep, int history, int horizon,
                            PredictionDataset& out) {
    const int n = static_cast<int>(ep.track.size());
    for (int t = history - 1; t + horizon < n; ++t) {
        PredictionSample s;
        s.grid = GridSnapshot::of(ground_truth_grid(ep, ep.track[static_cast<size_t>(t)]));
        s.window = TrajectoryWindow::empty(history);
        for (int i = 0; i < history; ++i) {
            const RelPos rel =
                to_tracker_frame(ep.track[static_cast<size_t>(t - history + 1 + i)], ep.observer);
            s.window.samples(i, 0) = rel.x;
            s.window.samples(i, 1) = rel.y;
            s.window.valid[i] = true;
        }
        s.future.resize(horizon, 2);
        s.future_valid = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(horizon, true);
        for (int f = 1; f <= horizon; ++f) {
            const RelPos rel = to_tracker_frame(ep.track[static_cast<size_t>(t + f)], ep.observer);
            s.future(f - 1, 0) = rel.x;
            s.future(f - 1, 1) = rel.y;
        }
        out.push_back(std::move(s));
    }
}

/// Corpus with exactly `episodes * windows_per_episode` windows.
inline PredictionDataset make_wall_turn_corpus(int episodes, int history, int horizon,
                                               uint64_t seed, int windows_per_episode = 5) {
    PredictionDataset data;
    const int length = history + horizon + windows_per_episode;
    for (int i = 0; i < episodes; ++i) {
        const WallTurnEpisode ep =
            make_wall_turn_episode(derive_seed(seed, static_cast<uint64_t>(i)), length);
        episode_windows(ep, history, horizon, data);
    }
    return data;
}

}  // namespace rspt::corpus
