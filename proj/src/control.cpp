#include "rspt/control.hpp"

#include <queue>

namespace rspt {

using nn::Binder;
using nn::Tape;
using nn::Var;

Eigen::Matrix<Scalar, 6, 1> vis_to_input(const VisState& vis) {
    Eigen::Matrix<Scalar, 6, 1> v;
    v << vis.rel_pos.x / kPositionScale, vis.rel_pos.y / kPositionScale,
        vis.last_seen.x / kPositionScale, vis.last_seen.y / kPositionScale,
        std::min(Scalar(vis.lost_count), Scalar(10)) / 10, vis.found ? 1 : 0;
    return v;
}

PolicyParams PolicyParams::init(const PolicyConfig& config) {
    PolicyParams p;
    p.config = config;
    auto& layout = p.store.layout;
    if (config.use_map) nn::register_grid_encoder(layout, "emap", config.map_embed);
    if (config.use_traj) nn::register_gru(layout, "etraj", config.traj_in_dim(), config.traj_embed);
    nn::register_affine(layout, "actor.h", config.phi_dim(), config.hidden);
    nn::register_affine(layout, "actor.out", config.hidden, kActionCount);
    nn::register_affine(layout, "critic.h", config.phi_dim(), config.hidden);
    nn::register_affine(layout, "critic.out", config.hidden, 1);
    RandomStream rng(derive_seed(config.seed, 0xac));
    p.store.init(rng);
    return p;
}

namespace {

Var build_phi(Tape& t, Binder& bind, const PolicyConfig& cfg, Var vis_input, Var grid_input,
              Var traj_input) {
    std::vector<Var> parts{vis_input};
    if (cfg.use_map) parts.push_back(nn::grid_encoder(t, bind, grid_input, "emap"));
    if (cfg.use_traj) {
        const Eigen::Index n = t.val(traj_input).rows();
        Var h = t.constant(Mat::Zero(n, cfg.traj_embed));
        for (int step = 0; step < cfg.horizon; ++step) {
            Var x = t.slice(traj_input, 0, cfg.traj_in_dim() * step, static_cast<int>(n),
                            cfg.traj_in_dim());
            h = nn::gru_cell(t, bind, x, h, "etraj");
        }
        parts.push_back(h);
    }
    return t.hcat(parts);
}

}  // namespace

PolicyHeads policy_forward(Tape& t, Binder& bind, const PolicyConfig& cfg, Var vis_input,
                           Var grid_input, Var traj_input) {
    Var phi = build_phi(t, bind, cfg, vis_input, grid_input, traj_input);
    Var a = t.tanh_(nn::affine(t, bind, phi, "actor.h"));
    Var c = t.tanh_(nn::affine(t, bind, phi, "critic.h"));
    return {nn::affine(t, bind, a, "actor.out"), nn::affine(t, bind, c, "critic.out")};
}

Action argmax_action(const Eigen::RowVectorXd& logits) {
    int best = 0;
    for (int i = 1; i < kActionCount; ++i)
        if (logits[i] > logits[best]) best = i;
    return static_cast<Action>(best);
}

namespace {

struct SingleForward {
    Mat logits;
    Vec phi;
};

SingleForward single_forward(const PolicyParams& params, const EgoGrid& grid,
                             const MixtureForecast& forecast, const VisState& vis) {
    Tape t;
    Binder bind(t, params.store);
    Var vis_in = t.constant(vis_to_input(vis).transpose());
    Var grid_in =
        t.constant(params.config.use_map ? Mat(grid_to_input(grid)) : Mat::Zero(1, 1));
    Var traj_in = t.constant(
        params.config.use_traj
            ? Mat(forecast_to_input(forecast, params.config.horizon, params.config.mixtures))
            : Mat::Zero(1, 1));
    Var phi = build_phi(t, bind, params.config, vis_in, grid_in, traj_in);
    Var a = t.tanh_(nn::affine(t, bind, phi, "actor.h"));
    Var logits = nn::affine(t, bind, a, "actor.out");
    return {t.val(logits), t.val(phi).row(0).transpose()};
}

}  // namespace

Action policy_act(const PolicyParams& params, const EgoGrid& grid,
                  const MixtureForecast& forecast, const VisState& vis, ActMode mode,
                  RandomStream& rng) {
    const SingleForward fwd = single_forward(params, grid, forecast, vis);
    const Eigen::RowVectorXd logits = fwd.logits.row(0);
    if (!logits.allFinite()) {
        std::string diag = "policy produced non-finite action logits [vis ";
        diag += vis_to_input(vis).allFinite() ? "ok" : "BAD";
        diag += ", grid ";
        diag += grid_to_input(grid).allFinite() ? "ok" : "BAD";
        diag += ", forecast ";
        diag += forecast_to_input(forecast).allFinite() ? "ok" : "BAD";
        diag += ", params ";
        diag += params.store.finite() ? "ok" : "BAD";
        diag += ", phi ";
        diag += fwd.phi.allFinite() ? "ok" : "BAD";
        diag += "]";
        throw Error(diag);
    }
    if (mode == ActMode::greedy) return argmax_action(logits);

    const Scalar m = logits.maxCoeff();
    Eigen::ArrayXd p = (logits.array() - m).exp();
    p /= p.sum();
    Scalar u = rng.uniform();
    for (int i = 0; i < kActionCount; ++i) {
        u -= p[i];
        if (u <= 0) return static_cast<Action>(i);
    }
    return static_cast<Action>(kActionCount - 1);
}

StateRepr state_repr(const PolicyParams& params, const EgoGrid& grid,
                     const MixtureForecast& forecast, const VisState& vis) {
    const SingleForward fwd = single_forward(params, grid, forecast, vis);
    StateRepr repr;
    repr.vis = fwd.phi.head<6>();
    Eigen::Index at = 6;
    if (params.config.use_map) {
        repr.map_emb = fwd.phi.segment(at, params.config.map_embed);
        at += params.config.map_embed;
    }
    if (params.config.use_traj) repr.traj_emb = fwd.phi.segment(at, params.config.traj_embed);
    return repr;
}

namespace {

constexpr Scalar kAngleDeadband = 7.5 * kPi / 180;
constexpr Scalar kDistDeadband = 0.2;

}  // namespace

Action rule_controller(const VisState& vis, const RewardConfig& cfg) {
    if (!vis.found) {
        // Pursue the vanish point; turn in place once it is close or behind.
        if (vis.last_seen.norm() > 1.0) return steer_towards(vis.last_seen);
        return vis.last_seen.x >= 0 ? Action::TurnRight : Action::TurnLeft;
    }
    const Scalar bearing = vis.rel_pos.bearing();
    const Scalar dist_err = vis.rel_pos.norm() - cfg.expected_distance;
    if (std::abs(bearing) > kAngleDeadband) {
        const bool right = bearing > 0;
        if (dist_err > kDistDeadband)
            return right ? Action::TurnRightForward : Action::TurnLeftForward;
        return right ? Action::TurnRight : Action::TurnLeft;
    }
    if (dist_err > kDistDeadband) return Action::MoveForward;
    if (dist_err < -kDistDeadband) return Action::MoveBackward;
    return Action::Stop;
}

namespace {

constexpr int kStraightCost = 10;
constexpr int kDiagCost = 14;
constexpr Scalar kBlockedProb = 0.65;

bool traversable(const EgoGrid& grid, int row, int col) {
    return !(grid.explored(row, col) && grid.prob(row, col) > kBlockedProb);
}

int cell_multiplier(const EgoGrid& grid, int row, int col) {
    return grid.explored(row, col) ? 1 : 2;
}

int octile(int r0, int c0, int r1, int c1) {
    const int dr = std::abs(r0 - r1), dc = std::abs(c0 - c1);
    return kDiagCost * std::min(dr, dc) + kStraightCost * std::abs(dr - dc);
}

}  // namespace

PlanResult plan_path(const EgoGrid& grid, const RelPos& goal) {
    constexpr int n = EgoGrid::kSize;
    PlanResult result;
    const int start = EgoGrid::center_index() * n + EgoGrid::center_index();

    auto goal_cell = EgoGrid::cell_of(goal);
    if (!goal_cell) {
        result.action = goal.x >= 0 ? Action::TurnRight : Action::TurnLeft;
        return result;
    }
    int goal_row = (*goal_cell)[0], goal_col = (*goal_cell)[1];
    if (!traversable(grid, goal_row, goal_col)) {
        // Relax to the nearest traversable cell within 1 m.
        bool relaxed = false;
        Scalar best = std::numeric_limits<Scalar>::infinity();
        for (int dr = -2; dr <= 2; ++dr) {
            for (int dc = -2; dc <= 2; ++dc) {
                const int r = goal_row + dr, c = goal_col + dc;
                if (r < 0 || r >= n || c < 0 || c >= n) continue;
                if (!traversable(grid, r, c)) continue;
                const RelPos center = EgoGrid::rel_of_cell(r, c);
                const Scalar d = std::hypot(center.x - goal.x, center.y - goal.y);
                if (d <= 1.0 && d < best) {
                    best = d;
                    goal_row = r;
                    goal_col = c;
                    relaxed = true;
                }
            }
        }
        if (!relaxed) {
            result.action = goal.x >= 0 ? Action::TurnRight : Action::TurnLeft;
            return result;
        }
    }

    const int goal_idx = goal_row * n + goal_col;
    std::vector<int> g(n * n, std::numeric_limits<int>::max());
    std::vector<int> parent(n * n, -1);
    std::vector<uint8_t> closed(n * n, 0);
    using Entry = std::pair<int, int>;  // (f, cell)
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
    g[start] = 0;
    open.push({octile(EgoGrid::center_index(), EgoGrid::center_index(), goal_row, goal_col), start});

    const int dr8[8] = {1, -1, 0, 0, 1, 1, -1, -1};
    const int dc8[8] = {0, 0, 1, -1, 1, -1, 1, -1};
    while (!open.empty()) {
        const auto [f, cur] = open.top();
        open.pop();
        if (closed[cur]) continue;
        closed[cur] = 1;
        if (cur == goal_idx) break;
        const int cr = cur / n, cc = cur % n;
        for (int k = 0; k < 8; ++k) {
            const int r = cr + dr8[k], c = cc + dc8[k];
            if (r < 0 || r >= n || c < 0 || c >= n) continue;
            if (!traversable(grid, r, c)) continue;
            // No corner cutting through blocked orthogonal neighbors.
            if (dr8[k] != 0 && dc8[k] != 0 &&
                (!traversable(grid, cr, c) || !traversable(grid, r, cc)))
                continue;
            const int base = (dr8[k] != 0 && dc8[k] != 0) ? kDiagCost : kStraightCost;
            const int cost = g[cur] + base * cell_multiplier(grid, r, c);
            const int idx = r * n + c;
            if (cost < g[idx]) {
                g[idx] = cost;
                parent[idx] = cur;
                open.push({cost + octile(r, c, goal_row, goal_col), idx});
            }
        }
    }

    if (g[goal_idx] == std::numeric_limits<int>::max()) {
        result.action = goal.x >= 0 ? Action::TurnRight : Action::TurnLeft;
        return result;
    }

    result.reachable = true;
    result.cost = g[goal_idx];
    for (int at = goal_idx; at != -1; at = parent[at])
        result.path.push_back({at / n, at % n});
    std::reverse(result.path.begin(), result.path.end());

    if (result.path.size() < 2) {
        result.action = Action::Stop;
        return result;
    }
    const Vec2i wp = result.path[1];
    result.action = steer_towards(EgoGrid::rel_of_cell(wp[0], wp[1]));
    return result;
}

Action steer_towards(const RelPos& waypoint) {
    const Scalar bearing = waypoint.bearing();
    // Close misaligned waypoints need in-place turns: the turning circle at
    // full speed is wider than a typical arrive radius and the agent orbits.
    if (std::abs(bearing) > kPi / 2 ||
        (waypoint.norm() < 1.2 && std::abs(bearing) > 25 * kPi / 180))
        return bearing > 0 ? Action::TurnRight : Action::TurnLeft;
    if (std::abs(bearing) > kAngleDeadband)
        return bearing > 0 ? Action::TurnRightForward : Action::TurnLeftForward;
    return Action::MoveForward;
}

Action planner_controller(const EgoGrid& grid, const VisState& vis, const RewardConfig& cfg) {
    if (vis.found) {
        const Scalar dist = vis.rel_pos.norm();
        const Scalar bearing = vis.rel_pos.bearing();
        if (std::abs(dist - cfg.expected_distance) <= 0.5) {
            // Close enough: keep the target centered.
            if (std::abs(bearing) > kAngleDeadband)
                return bearing > 0 ? Action::TurnRight : Action::TurnLeft;
            return rule_controller(vis, cfg);
        }
        if (dist < cfg.expected_distance) return Action::MoveBackward;
        const Scalar scale = 1 - cfg.expected_distance / dist;
        return plan_path(grid, {vis.rel_pos.x * scale, vis.rel_pos.y * scale}).action;
    }
    if (vis.last_seen.norm() < 0.75)
        return vis.last_seen.x >= 0 ? Action::TurnRight : Action::TurnLeft;
    return plan_path(grid, vis.last_seen).action;
}

}  // namespace rspt
