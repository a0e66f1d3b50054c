#pragma once

#include "rspt/agent.hpp"
#include "rspt/prediction.hpp"

namespace rspt {

struct RewardConfig {
    Scalar expected_distance = 2.5;  // d*
    Scalar rho_max = 5.0;
    Scalar theta_max = kPi / 4;
};

/// r0 = 1 - min(1, |dist - d*|/rho_max) - min(1, |bearing|/theta_max).
/// Range [-1, 1], maximal exactly at (0, d*).
inline Scalar reward_tracker(const RelPos& true_rel, const RewardConfig& cfg) {
    const Scalar drho =
        std::min(Scalar(1), std::abs(true_rel.norm() - cfg.expected_distance) / cfg.rho_max);
    const Scalar dtheta = std::min(Scalar(1), std::abs(true_rel.bearing()) / cfg.theta_max);
    return 1 - drho - dtheta;
}

inline Scalar reward_target(Scalar r_tracker) { return -r_tracker; }

/// Structure-aware motion representation Phi = [vis, map_emb, traj_emb].
/// Positions are scaled by the sensor range, the lost counter by its 10-step
/// limit; ablation variants leave the unused embeddings empty.
struct StateRepr {
    Eigen::Matrix<Scalar, 6, 1> vis;
    Vec map_emb;
    Vec traj_emb;

    Vec flat() const {
        Vec out(6 + map_emb.size() + traj_emb.size());
        out.head<6>() = vis;
        out.segment(6, map_emb.size()) = map_emb;
        out.tail(traj_emb.size()) = traj_emb;
        return out;
    }
};

Eigen::Matrix<Scalar, 6, 1> vis_to_input(const VisState& vis);

struct PolicyConfig {
    bool use_map = true;
    bool use_traj = true;
    int map_embed = 32;
    int traj_embed = 32;
    int hidden = 64;
    int horizon = 5;   // forecast steps consumed by the trajectory encoder
    int mixtures = 5;
    uint64_t seed = 2;

    int traj_in_dim() const { return 3 * mixtures; }
    int phi_dim() const {
        return 6 + (use_map ? map_embed : 0) + (use_traj ? traj_embed : 0);
    }

    friend bool operator==(const PolicyConfig&, const PolicyConfig&) = default;
};

struct PolicyParams {
    PolicyConfig config;
    nn::ParamStore store;

    static PolicyParams init(const PolicyConfig& config);
};

struct PolicyHeads {
    nn::Var logits;  // (n, 7)
    nn::Var value;   // (n, 1)
};

/// Batched forward pass from raw observation encodings.
PolicyHeads policy_forward(nn::Tape& tape, nn::Binder& bind, const PolicyConfig& config,
                           nn::Var vis_input, nn::Var grid_input, nn::Var traj_input);

enum class ActMode { sample, greedy };

/// Greedy argmax with ties broken toward the lowest action index.
Action argmax_action(const Eigen::RowVectorXd& logits);

/// Build the state representation and emit an action. Greedy mode ignores the
/// random stream. Throws on non-finite logits.
Action policy_act(const PolicyParams& params, const EgoGrid& grid,
                  const MixtureForecast& forecast, const VisState& vis, ActMode mode,
                  RandomStream& rng);

/// The representation fed to the controller, exposed for inspection.
StateRepr state_repr(const PolicyParams& params, const EgoGrid& grid,
                     const MixtureForecast& forecast, const VisState& vis);

/// PID-like baseline on distance/angle errors. When the target is not found,
/// rotates toward the side it was last seen on.
Action rule_controller(const VisState& vis, const RewardConfig& cfg);

/// A* planning over the ego grid, 8-connected with octile costs (scaled to
/// integers: straight 10, diagonal 14). Occupied cells (p > 0.65) block;
/// unexplored cells cost double. An occupied goal relaxes to the nearest free
/// cell within 1 m.
struct PlanResult {
    bool reachable = false;
    std::vector<Vec2i> path;  // from the start cell to the goal cell
    Action action = Action::Stop;
    int cost = 0;
};

PlanResult plan_path(const EgoGrid& grid, const RelPos& goal);

/// Steering used for waypoint following (shared by the rule and planner
/// controllers).
Action steer_towards(const RelPos& waypoint);

/// Planner baseline: navigate to the expected-distance standoff point next to
/// the target (its last seen position when not found).
Action planner_controller(const EgoGrid& grid, const VisState& vis, const RewardConfig& cfg);

}  // namespace rspt
