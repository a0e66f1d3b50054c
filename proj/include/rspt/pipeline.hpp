#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "rspt/control.hpp"

namespace rspt {

/// Sensor/pose corruption profiles (the robustness study axes).
struct NoiseConfig {
    struct Depth {
        Scalar gaussian_std = 0;   // meters, added per reading
        Scalar dropout_prob = 0;   // reading replaced by max range
        int lateral_shift_max = 0; // whole-scan index shift, uniform in [-max, max]
    };
    struct Pose {
        Scalar xy_std = 0;       // meters, per axis
        Scalar heading_std = 0;  // radians
    };
    Depth depth;
    Pose pose;

    bool any_depth() const {
        return depth.gaussian_std > 0 || depth.dropout_prob > 0 || depth.lateral_shift_max > 0;
    }
    bool any_pose() const { return pose.xy_std > 0 || pose.heading_std > 0; }

    /// Named profiles: none, depth, pose, depth_pose. The pose profile applies
    /// the reported 0.5 m^2 variance as std = sqrt(0.5) per axis unless
    /// variance_as_std is set.
    static NoiseConfig profile(const std::string& name, bool variance_as_std = false);
};

DepthScan apply_depth_noise(const DepthScan& scan, const NoiseConfig::Depth& noise,
                            RandomStream& rng);
Pose2 apply_pose_noise(const Pose2& pose, const NoiseConfig::Pose& noise, RandomStream& rng);

/// Which pipeline estimates are replaced by ground truth.
enum class OracleMode { full_pipeline, perfect_detection, perfect_pose, perfect_both };

OracleMode oracle_mode_from_string(const std::string& name);
std::string to_string(OracleMode mode);

struct PipelineConfig {
    SensorModel sensor;
    DetectionNoise detection_noise;
    Scalar move_speed = 0.4;
    Scalar turn_rate = 15.0 * kPi / 180.0;
    Scalar agent_radius = 0.2;
    Scalar target_speed_scale = 1.0;
    RewardConfig reward;
    int history = 10;
    int horizon = 5;
    int max_steps = 500;
    int lost_limit = 10;  // consecutive lost steps tolerated before termination
};

using PredictorFn = std::function<MixtureForecast(const EgoGrid&, const TrajectoryWindow&)>;

PredictorFn mdn_predictor(PredictorParams params);
PredictorFn kf_predictor(int horizon, KfConfig config = {});

/// Everything a controller may observe at the current step, plus the ground
/// truth the harness needs for rewards and termination.
struct Observation {
    VisState vis;
    TrajectoryWindow window;
    EgoGrid grid;
    MixtureForecast forecast;
    RelPos true_rel;  // ground truth, never fed to the tracker policy
};

enum class TerminationCause { none, max_steps, lost };

struct StepOutcome {
    Scalar reward = 0;  // r0; the target receives -r0
    bool done = false;
    TerminationCause cause = TerminationCause::none;
};

/// Drives the target agent. Implementations may keep per-episode state.
class TargetController {
public:
    virtual ~TargetController() = default;
    virtual Action act(const World& world, const AgentState& target, const AgentState& tracker,
                       RandomStream& rng) = 0;
    virtual void reset(const World& world) { (void)world; }
    /// Test hook: request a direct placement before a step.
    virtual std::optional<Pose2> teleport(int step) {
        (void)step;
        return std::nullopt;
    }
};

/// Seeded waypoint walker on the true world (shortest paths to far goals).
std::unique_ptr<TargetController> make_navigator_target();
std::unique_ptr<TargetController> make_random_target();
std::unique_ptr<TargetController> make_frozen_target();
/// Follows a fixed waypoint circuit (loops).
std::unique_ptr<TargetController> make_scripted_target(std::vector<Vec2> waypoints,
                                                       Scalar arrive_radius = 0.3);

/// One episode's mutable state: world, both agents, perception and mapping
/// memory. Call sense() once per step, then apply() with both actions.
class EpisodeContext {
public:
    EpisodeContext(World world, const PipelineConfig& config, PredictorFn predictor,
                   NoiseConfig noise, OracleMode mode, uint64_t seed);

    const Observation& sense();
    StepOutcome apply(Action tracker_action, Action target_action);

    /// Test hook: place the target directly (validated by the caller).
    void teleport_target(const Pose2& pose) { target_.pose = pose; }

    const World& world() const { return world_; }
    const AgentState& tracker() const { return tracker_; }
    const AgentState& target() const { return target_; }
    const PipelineConfig& config() const { return config_; }
    int steps() const { return step_count_; }
    int lost_run() const { return lost_run_; }
    bool target_currently_visible() const;

private:
    World world_;
    PipelineConfig config_;
    PredictorFn predictor_;
    NoiseConfig noise_;
    OracleMode mode_;
    AgentState tracker_, target_;
    OccupancyField field_;
    Observation obs_;
    Pose2 last_sensed_pose_;
    bool first_sense_ = true;
    int step_count_ = 0;
    int lost_run_ = 0;
    RandomStream detect_rng_, noise_rng_;
};

}  // namespace rspt
