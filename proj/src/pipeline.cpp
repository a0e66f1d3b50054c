#include "rspt/pipeline.hpp"

namespace rspt {

NoiseConfig NoiseConfig::profile(const std::string& name, bool variance_as_std) {
    NoiseConfig cfg;
    const Scalar pose_std = variance_as_std ? Scalar(0.5) : std::sqrt(Scalar(0.5));
    if (name == "none") return cfg;
    if (name == "depth" || name == "depth_pose") {
        cfg.depth.gaussian_std = 0.25;
        cfg.depth.dropout_prob = 0.05;
        cfg.depth.lateral_shift_max = 2;
    }
    if (name == "pose" || name == "depth_pose") cfg.pose.xy_std = pose_std;
    if (name != "depth" && name != "pose" && name != "depth_pose")
        throw ConfigError("unknown noise profile: " + name +
                          " (expected none, depth, pose, depth_pose)");
    return cfg;
}

DepthScan apply_depth_noise(const DepthScan& scan, const NoiseConfig::Depth& noise,
                            RandomStream& rng) {
    DepthScan out = scan;
    const int n = static_cast<int>(scan.ranges.size());
    if (noise.lateral_shift_max > 0) {
        const int shift = rng.uniform_int(2 * noise.lateral_shift_max + 1) - noise.lateral_shift_max;
        for (int i = 0; i < n; ++i) {
            const int src = std::clamp(i + shift, 0, n - 1);
            out.ranges[static_cast<size_t>(i)] = scan.ranges[static_cast<size_t>(src)];
        }
    }
    for (auto& r : out.ranges) {
        if (noise.dropout_prob > 0 && rng.uniform() < noise.dropout_prob) {
            r = scan.sensor.max_range;
            continue;
        }
        if (noise.gaussian_std > 0) r += rng.normal(0, noise.gaussian_std);
        r = std::clamp(r, Scalar(1e-3), scan.sensor.max_range);
    }
    return out;
}

Pose2 apply_pose_noise(const Pose2& pose, const NoiseConfig::Pose& noise, RandomStream& rng) {
    return {pose.x + (noise.xy_std > 0 ? rng.normal(0, noise.xy_std) : 0),
            pose.y + (noise.xy_std > 0 ? rng.normal(0, noise.xy_std) : 0),
            pose.heading + (noise.heading_std > 0 ? rng.normal(0, noise.heading_std) : 0)};
}

OracleMode oracle_mode_from_string(const std::string& name) {
    if (name == "full_pipeline") return OracleMode::full_pipeline;
    if (name == "perfect_detection") return OracleMode::perfect_detection;
    if (name == "perfect_pose") return OracleMode::perfect_pose;
    if (name == "perfect_both") return OracleMode::perfect_both;
    throw ConfigError("unknown oracle mode: " + name);
}

std::string to_string(OracleMode mode) {
    switch (mode) {
        case OracleMode::full_pipeline: return "full_pipeline";
        case OracleMode::perfect_detection: return "perfect_detection";
        case OracleMode::perfect_pose: return "perfect_pose";
        case OracleMode::perfect_both: return "perfect_both";
    }
    return "?";
}

PredictorFn mdn_predictor(PredictorParams params) {
    return [params = std::move(params)](const EgoGrid& grid, const TrajectoryWindow& window) {
        return predict(params, grid, window);
    };
}

PredictorFn kf_predictor(int horizon, KfConfig config) {
    return [horizon, config](const EgoGrid&, const TrajectoryWindow& window) {
        return kf_predict(window, horizon, config);
    };
}

EpisodeContext::EpisodeContext(World world, const PipelineConfig& config, PredictorFn predictor,
                               NoiseConfig noise, OracleMode mode, uint64_t seed)
    : world_(std::move(world)),
      config_(config),
      predictor_(std::move(predictor)),
      noise_(noise),
      mode_(mode),
      field_(OccupancyField::for_bounds(world_.bounds)),
      detect_rng_(derive_seed(seed, 0xde)),
      noise_rng_(derive_seed(seed, 0x1f)) {
    tracker_.pose = world_.tracker_spawn;
    tracker_.move_speed = config.move_speed;
    tracker_.turn_rate = config.turn_rate;
    tracker_.radius = config.agent_radius;
    target_ = tracker_;
    target_.pose = world_.target_spawn;
    target_.move_speed = config.move_speed * config.target_speed_scale;
    obs_.vis = VisState::initial(to_tracker_frame(world_.target_spawn.position(),
                                                  world_.tracker_spawn));
    obs_.window = TrajectoryWindow::empty(config.history);
    last_sensed_pose_ = tracker_.pose;
}

bool EpisodeContext::target_currently_visible() const {
    return target_visible(world_, tracker_.pose, target_.pose, config_.sensor);
}

const Observation& EpisodeContext::sense() {
    const Pose2 pose_true = tracker_.pose;
    const bool gt_pose =
        mode_ == OracleMode::perfect_pose || mode_ == OracleMode::perfect_both;
    const bool gt_detect =
        mode_ == OracleMode::perfect_detection || mode_ == OracleMode::perfect_both;

    const Pose2 pose_map = (gt_pose || !noise_.any_pose())
                               ? pose_true
                               : apply_pose_noise(pose_true, noise_.pose, noise_rng_);

    DepthScan scan = cast_scan(world_, pose_true, config_.sensor, target_);
    if (!gt_detect && noise_.any_depth())
        scan = apply_depth_noise(scan, noise_.depth, noise_rng_);

    const Detection det =
        detect(world_, pose_true, target_, config_.sensor,
               gt_detect ? DetectionNoise::none() : config_.detection_noise, detect_rng_);

    // Frame updates use the step-to-step motion (odometry is clean at this
    // horizon); the absolute pose estimate only feeds the map.
    const TrackerMotion motion = motion_between(last_sensed_pose_, pose_true);
    last_sensed_pose_ = pose_true;

    obs_.vis = update_vis_state(obs_.vis, det, config_.sensor, motion);
    obs_.window.advance(motion, det.found ? std::optional<RelPos>(obs_.vis.rel_pos)
                                          : std::nullopt);

    integrate_scan(field_, scan, pose_map);
    obs_.grid = extract_ego_grid(field_, pose_map);
    mark_target(obs_.grid, obs_.vis);

    obs_.forecast = predictor_(obs_.grid, obs_.window);
    obs_.true_rel = to_tracker_frame(target_.pose.position(), pose_true);
    return obs_;
}

StepOutcome EpisodeContext::apply(Action tracker_action, Action target_action) {
    const Circle target_body{target_.pose.position(), target_.radius};
    tracker_ = step_agent(world_, tracker_, tracker_action, {&target_body, 1});
    const Circle tracker_body{tracker_.pose.position(), tracker_.radius};
    target_ = step_agent(world_, target_, target_action, {&tracker_body, 1});

    ++step_count_;
    StepOutcome out;
    out.reward = reward_tracker(to_tracker_frame(target_.pose.position(), tracker_.pose),
                                config_.reward);
    lost_run_ = target_currently_visible() ? 0 : lost_run_ + 1;
    if (lost_run_ > config_.lost_limit) {
        out.done = true;
        out.cause = TerminationCause::lost;
    } else if (step_count_ >= config_.max_steps) {
        out.done = true;
        out.cause = TerminationCause::max_steps;
    }
    return out;
}

}  // namespace rspt
