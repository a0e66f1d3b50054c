#pragma once

#include <string>
#include <vector>

#include "rspt/learning.hpp"

namespace rspt {

/// Resolved run configuration. Parsed strictly from JSON: unknown keys are
/// rejected with their path, every run writes the fully resolved file back to
/// its output directory.
struct RunConfig {
    int schema_version = 1;

    struct WorldSection {
        std::string archetype = "flexible_room";
        GenerationConfig gen;  // resolved from the archetype, then overridden
    } world;

    SensorModel sensor;
    DetectionNoise detection;

    struct Kinematics {
        Scalar move_speed = 0.4;
        Scalar turn_rate_deg = 15.0;
        Scalar agent_radius = 0.2;
    } kinematics;

    RewardConfig reward;

    struct Predictor {
        std::string kind = "mdn";  // mdn | kf
        PredictorConfig config;
    } predictor;

    struct Training {
        std::string representation = "rspt";  // rspt | vist | vist_rs | vist_pt
        long stage_env_steps[3] = {40000, 40000, 40000};
        int n_contexts = 16;
        int rollout_len = 32;
        int max_obstacles = 8;
        Scalar learning_rate = 3e-4;
        Scalar target_lr_scale = 0.5;
        Scalar scripted_opponent_fraction = 0.5;
        Scalar entropy_coef = 0.01;
        Scalar gamma = 0.95;
        int predictor_epochs = 25;
        Scalar predictor_lr = 1e-3;
        uint64_t seed = 42;
    } training;

    struct Evaluation {
        std::vector<std::string> suite;  // archetypes or a scenario suite name
        int episodes = 50;
        std::string noise = "none";
        bool pose_variance_as_std = false;
        std::string mode = "full_pipeline";
        std::string target = "navigator";  // navigator | random | frozen
        Scalar target_speed_scale = 0.7;
        int threads = 2;
        int replay_episodes = 0;
        uint64_t seed = 0;
    } evaluation;

    PipelineConfig pipeline() const;
    TrainRunConfig train_run() const;
    std::string resolved_json() const;
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

}  // namespace rspt
