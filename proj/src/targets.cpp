#include "rspt/pipeline.hpp"

#include <queue>

namespace rspt {

namespace {

Action follow_waypoint(const AgentState& agent, const Vec2& waypoint) {
    return steer_towards(to_tracker_frame(waypoint, agent.pose));
}

class RandomTarget final : public TargetController {
public:
    Action act(const World&, const AgentState&, const AgentState&, RandomStream& rng) override {
        return static_cast<Action>(rng.uniform_int(kActionCount));
    }
};

class FrozenTarget final : public TargetController {
public:
    Action act(const World&, const AgentState&, const AgentState&, RandomStream&) override {
        return Action::Stop;
    }
};

/// Coarse rasterization of the true world for target navigation.
struct NavGrid {
    Scalar res = 0.25;
    Vec2 origin;
    int nx = 0, ny = 0;
    std::vector<uint8_t> free;

    static NavGrid build(const World& world, Scalar agent_radius) {
        NavGrid g;
        g.origin = world.bounds.min;
        g.nx = std::max(1, static_cast<int>(std::ceil(world.bounds.extent().x() / g.res)));
        g.ny = std::max(1, static_cast<int>(std::ceil(world.bounds.extent().y() / g.res)));
        g.free.assign(static_cast<size_t>(g.nx) * g.ny, 0);
        for (int j = 0; j < g.ny; ++j) {
            for (int i = 0; i < g.nx; ++i) {
                const Vec2 p = g.origin + Vec2((i + 0.5) * g.res, (j + 0.5) * g.res);
                if (world.bounds.contains(p, agent_radius) &&
                    world.clearance(p) >= agent_radius + 0.05)
                    g.free[g.idx(i, j)] = 1;
            }
        }
        return g;
    }

    size_t idx(int i, int j) const { return static_cast<size_t>(j) * nx + i; }
    bool in(int i, int j) const { return i >= 0 && j >= 0 && i < nx && j < ny; }
    Vec2i cell_of(const Vec2& p) const {
        return {static_cast<int>(std::floor((p.x() - origin.x()) / res)),
                static_cast<int>(std::floor((p.y() - origin.y()) / res))};
    }
    Vec2 center(int i, int j) const { return origin + Vec2((i + 0.5) * res, (j + 0.5) * res); }

    /// BFS shortest path (8-connected), returned as sparse waypoints. Cells
    /// near the avoid point (another agent's body) are treated as blocked.
    std::vector<Vec2> path(const Vec2& from, const Vec2& to, const Vec2& avoid,
                           Scalar avoid_radius) const {
        const Vec2i s = cell_of(from), t = cell_of(to);
        if (!in(s.x(), s.y()) || !in(t.x(), t.y())) return {};
        std::vector<uint8_t> free = this->free;
        if (avoid_radius > 0) {
            const Vec2i a = cell_of(avoid);
            const int r = static_cast<int>(std::ceil(avoid_radius / res));
            for (int j = a.y() - r; j <= a.y() + r; ++j)
                for (int i = a.x() - r; i <= a.x() + r; ++i)
                    if (in(i, j) && (center(i, j) - avoid).norm() <= avoid_radius)
                        free[idx(i, j)] = 0;
            if (in(s.x(), s.y())) free[idx(s.x(), s.y())] = this->free[idx(s.x(), s.y())];
        }
        std::vector<int> parent(free.size(), -2);
        std::queue<Vec2i> q;
        if (!free[idx(t.x(), t.y())]) return {};
        q.push(s);
        parent[idx(s.x(), s.y())] = -1;
        const int dx[8] = {1, -1, 0, 0, 1, 1, -1, -1};
        const int dy[8] = {0, 0, 1, -1, 1, -1, 1, -1};
        bool reached = false;
        while (!q.empty() && !reached) {
            const Vec2i c = q.front();
            q.pop();
            for (int k = 0; k < 8; ++k) {
                const int i = c.x() + dx[k], j = c.y() + dy[k];
                if (!in(i, j) || parent[idx(i, j)] != -2 || !free[idx(i, j)]) continue;
                if (dx[k] != 0 && dy[k] != 0 &&
                    (!free[idx(c.x(), j)] || !free[idx(i, c.y())]))
                    continue;
                parent[idx(i, j)] = static_cast<int>(idx(c.x(), c.y()));
                if (i == t.x() && j == t.y()) {
                    reached = true;
                    break;
                }
                q.push({i, j});
            }
        }
        if (!reached) return {};
        std::vector<Vec2> cells;
        for (int at = static_cast<int>(idx(t.x(), t.y())); at != -1;
             at = parent[static_cast<size_t>(at)])
            cells.push_back(center(at % nx, at / nx));
        std::reverse(cells.begin(), cells.end());
        // Keep every 2nd cell (0.5 m spacing) plus the endpoint; wider gaps
        // cut obstacle corners between waypoints.
        std::vector<Vec2> sparse;
        for (size_t i = 0; i < cells.size(); i += 2) sparse.push_back(cells[i]);
        if (sparse.empty() || (sparse.back() - cells.back()).norm() > 1e-9)
            sparse.push_back(cells.back());
        return sparse;
    }
};

class NavigatorTarget final : public TargetController {
public:
    void reset(const World& world) override {
        grid_ = NavGrid::build(world, 0.2);
        path_.clear();
        wp_ = 0;
        stuck_ = 0;
        last_pos_ = world.target_spawn.position();
    }

    Action act(const World& world, const AgentState& target, const AgentState& tracker,
               RandomStream& rng) override {
        const Vec2 pos = target.pose.position();
        if ((pos - last_pos_).norm() < 0.04) {
            ++stuck_;
        } else {
            stuck_ = 0;
        }
        last_pos_ = pos;
        if (stuck_ > 6) {
            // Skip a snagged waypoint first; replan once the path runs out.
            if (wp_ + 1 < path_.size()) {
                ++wp_;
            } else {
                path_.clear();
            }
            stuck_ = 0;
        }
        while (wp_ < path_.size() && (path_[wp_] - pos).norm() < 0.35) ++wp_;
        if (wp_ >= path_.size()) pick_goal(world, pos, tracker.pose.position(), rng);
        if (wp_ >= path_.size()) return Action::Stop;

        // Reactive dodge: slide around the tracker body instead of pushing it.
        const RelPos tracker_rel = to_tracker_frame(tracker.pose.position(), target.pose);
        if (tracker_rel.norm() < 0.8 && std::abs(tracker_rel.bearing()) < kPi / 3)
            return tracker_rel.x > 0 ? Action::TurnLeftForward : Action::TurnRightForward;
        return follow_waypoint(target, path_[wp_]);
    }

private:
    void pick_goal(const World& world, const Vec2& pos, const Vec2& tracker_pos,
                   RandomStream& rng) {
        path_.clear();
        wp_ = 0;
        // Flee-style goals: far from the pursuer and from the current spot,
        // so the walk keeps leaving the tracker's fan. Relax if cornered.
        struct Tier {
            Scalar self_dist, tracker_dist;
        };
        for (const Tier tier : {Tier{5.0, 0.0}, Tier{3.0, 0.0}, Tier{1.5, 0.0}}) {
            for (int attempt = 0; attempt < 48; ++attempt) {
                const Vec2 goal{
                    rng.uniform(world.bounds.min.x() + 0.5, world.bounds.max.x() - 0.5),
                    rng.uniform(world.bounds.min.y() + 0.5, world.bounds.max.y() - 0.5)};
                if ((goal - pos).norm() < tier.self_dist) continue;
                if ((goal - tracker_pos).norm() < tier.tracker_dist) continue;
                const Vec2i c = grid_.cell_of(goal);
                if (!grid_.in(c.x(), c.y()) || !grid_.free[grid_.idx(c.x(), c.y())]) continue;
                auto p = grid_.path(pos, goal, tracker_pos, 0.6);
                if (p.empty()) continue;
                path_ = std::move(p);
                return;
            }
        }
    }

    NavGrid grid_;
    std::vector<Vec2> path_;
    size_t wp_ = 0;
    int stuck_ = 0;
    Vec2 last_pos_{0, 0};
};

class ScriptedTarget final : public TargetController {
public:
    ScriptedTarget(std::vector<Vec2> waypoints, Scalar arrive_radius)
        : waypoints_(std::move(waypoints)), arrive_(arrive_radius) {}

    void reset(const World&) override { wp_ = 0; }

    Action act(const World&, const AgentState& target, const AgentState&,
               RandomStream&) override {
        if (waypoints_.empty()) return Action::Stop;
        const Vec2 pos = target.pose.position();
        if ((waypoints_[wp_] - pos).norm() < arrive_)
            wp_ = (wp_ + 1) % waypoints_.size();
        return follow_waypoint(target, waypoints_[wp_]);
    }

private:
    std::vector<Vec2> waypoints_;
    Scalar arrive_;
    size_t wp_ = 0;
};

}  // namespace

std::unique_ptr<TargetController> make_navigator_target() {
    return std::make_unique<NavigatorTarget>();
}
std::unique_ptr<TargetController> make_random_target() {
    return std::make_unique<RandomTarget>();
}
std::unique_ptr<TargetController> make_frozen_target() {
    return std::make_unique<FrozenTarget>();
}
std::unique_ptr<TargetController> make_scripted_target(std::vector<Vec2> waypoints,
                                                       Scalar arrive_radius) {
    return std::make_unique<ScriptedTarget>(std::move(waypoints), arrive_radius);
}

}  // namespace rspt
