#include "rspt/io/config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "rspt/evalharness.hpp"

namespace rspt {

using nlohmann::json;

namespace {

void require_keys(const json& j, const std::string& path,
                  const std::set<std::string>& allowed) {
    if (!j.is_object()) throw ConfigError(path + ": expected an object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!allowed.count(key))
            throw ConfigError(path + ": unknown key '" + key + "'");
    }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void read_vec2(const json& j, const char* key, Vec2& out) {
    if (!j.contains(key)) return;
    const auto& a = j.at(key);
    if (!a.is_array() || a.size() != 2) throw ConfigError(std::string(key) + ": expected [x, y]");
    out = {a[0].get<Scalar>(), a[1].get<Scalar>()};
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    require_keys(j, "config",
                 {"schema_version", "world", "sensor", "detection", "kinematics", "reward",
                  "predictor", "training", "evaluation"});

    RunConfig cfg;
    read(j, "schema_version", cfg.schema_version);
    if (cfg.schema_version != 1)
        throw ConfigError("unsupported schema_version " + std::to_string(cfg.schema_version));

    if (j.contains("world")) {
        const auto& w = j["world"];
        require_keys(w, "world",
                     {"archetype", "extent", "obstacle_count", "rect_fraction", "min_size",
                      "max_size", "spawn_distance"});
        read(w, "archetype", cfg.world.archetype);
        cfg.world.gen = archetype_config(cfg.world.archetype);
        read_vec2(w, "extent", cfg.world.gen.extent);
        read(w, "obstacle_count", cfg.world.gen.obstacle_count);
        read(w, "rect_fraction", cfg.world.gen.rect_fraction);
        read(w, "min_size", cfg.world.gen.min_size);
        read(w, "max_size", cfg.world.gen.max_size);
        read(w, "spawn_distance", cfg.world.gen.spawn_distance);
    } else {
        cfg.world.gen = archetype_config(cfg.world.archetype);
    }

    if (j.contains("sensor")) {
        const auto& s = j["sensor"];
        require_keys(s, "sensor", {"fov_deg", "ray_count", "max_range"});
        Scalar fov_deg = cfg.sensor.fov * 180 / kPi;
        read(s, "fov_deg", fov_deg);
        cfg.sensor.fov = fov_deg * kPi / 180;
        read(s, "ray_count", cfg.sensor.ray_count);
        read(s, "max_range", cfg.sensor.max_range);
        if (!cfg.sensor.valid()) throw ConfigError("sensor: invalid parameters");
    }

    if (j.contains("detection")) {
        const auto& d = j["detection"];
        require_keys(d, "detection", {"miss_rate", "bearing_std_rays", "depth_std"});
        read(d, "miss_rate", cfg.detection.miss_rate);
        read(d, "bearing_std_rays", cfg.detection.bearing_std_rays);
        read(d, "depth_std", cfg.detection.depth_std);
    }

    if (j.contains("kinematics")) {
        const auto& k = j["kinematics"];
        require_keys(k, "kinematics", {"move_speed", "turn_rate_deg", "agent_radius"});
        read(k, "move_speed", cfg.kinematics.move_speed);
        read(k, "turn_rate_deg", cfg.kinematics.turn_rate_deg);
        read(k, "agent_radius", cfg.kinematics.agent_radius);
    }

    if (j.contains("reward")) {
        const auto& r = j["reward"];
        require_keys(r, "reward", {"expected_distance", "rho_max", "theta_max_deg"});
        read(r, "expected_distance", cfg.reward.expected_distance);
        read(r, "rho_max", cfg.reward.rho_max);
        Scalar theta_deg = cfg.reward.theta_max * 180 / kPi;
        read(r, "theta_max_deg", theta_deg);
        cfg.reward.theta_max = theta_deg * kPi / 180;
        if (cfg.reward.expected_distance <= 0 || cfg.reward.rho_max <= 0 ||
            cfg.reward.theta_max <= 0)
            throw ConfigError("reward: all parameters must be positive");
        if (cfg.reward.expected_distance >= cfg.sensor.max_range)
            throw ConfigError("reward.expected_distance must be below sensor.max_range");
    }

    if (j.contains("predictor")) {
        const auto& p = j["predictor"];
        require_keys(p, "predictor", {"kind", "history", "horizon", "mixtures", "use_grid"});
        read(p, "kind", cfg.predictor.kind);
        if (cfg.predictor.kind != "mdn" && cfg.predictor.kind != "kf")
            throw ConfigError("predictor.kind: expected mdn or kf");
        read(p, "history", cfg.predictor.config.history);
        read(p, "horizon", cfg.predictor.config.horizon);
        read(p, "mixtures", cfg.predictor.config.mixtures);
        read(p, "use_grid", cfg.predictor.config.use_grid);
    }

    if (j.contains("training")) {
        const auto& t = j["training"];
        require_keys(t, "training",
                     {"representation", "stage_env_steps", "n_contexts", "rollout_len",
                      "max_obstacles", "learning_rate", "target_lr_scale",
                      "scripted_opponent_fraction", "entropy_coef", "gamma",
                      "predictor_epochs", "predictor_lr", "seed"});
        read(t, "representation", cfg.training.representation);
        const std::set<std::string> reps = {"rspt", "vist", "vist_rs", "vist_pt"};
        if (!reps.count(cfg.training.representation))
            throw ConfigError("training.representation: expected rspt, vist, vist_rs or vist_pt");
        if (t.contains("stage_env_steps")) {
            const auto& s = t["stage_env_steps"];
            if (!s.is_array() || s.size() != 3)
                throw ConfigError("training.stage_env_steps: expected three integers");
            for (int i = 0; i < 3; ++i) cfg.training.stage_env_steps[i] = s[static_cast<size_t>(i)].get<long>();
        }
        read(t, "n_contexts", cfg.training.n_contexts);
        read(t, "rollout_len", cfg.training.rollout_len);
        read(t, "max_obstacles", cfg.training.max_obstacles);
        read(t, "learning_rate", cfg.training.learning_rate);
        read(t, "target_lr_scale", cfg.training.target_lr_scale);
        read(t, "scripted_opponent_fraction", cfg.training.scripted_opponent_fraction);
        read(t, "entropy_coef", cfg.training.entropy_coef);
        read(t, "gamma", cfg.training.gamma);
        read(t, "predictor_epochs", cfg.training.predictor_epochs);
        read(t, "predictor_lr", cfg.training.predictor_lr);
        read(t, "seed", cfg.training.seed);
    }

    if (j.contains("evaluation")) {
        const auto& e = j["evaluation"];
        require_keys(e, "evaluation",
                     {"suite", "episodes", "noise", "pose_variance_as_std", "mode", "target",
                      "target_speed_scale", "threads", "replay_episodes", "seed"});
        if (e.contains("suite")) cfg.evaluation.suite = e["suite"].get<std::vector<std::string>>();
        read(e, "episodes", cfg.evaluation.episodes);
        read(e, "noise", cfg.evaluation.noise);
        read(e, "pose_variance_as_std", cfg.evaluation.pose_variance_as_std);
        read(e, "mode", cfg.evaluation.mode);
        read(e, "target", cfg.evaluation.target);
        read(e, "target_speed_scale", cfg.evaluation.target_speed_scale);
        read(e, "threads", cfg.evaluation.threads);
        read(e, "replay_episodes", cfg.evaluation.replay_episodes);
        read(e, "seed", cfg.evaluation.seed);
        (void)oracle_mode_from_string(cfg.evaluation.mode);
        (void)NoiseConfig::profile(cfg.evaluation.noise, cfg.evaluation.pose_variance_as_std);
        const std::set<std::string> targets = {"navigator", "random", "frozen"};
        if (!targets.count(cfg.evaluation.target))
            throw ConfigError("evaluation.target: expected navigator, random or frozen");
    }
    if (cfg.evaluation.suite.empty()) cfg.evaluation.suite = archetype_names();
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_run_config(text);
}

PipelineConfig RunConfig::pipeline() const {
    PipelineConfig pipe;
    pipe.sensor = sensor;
    pipe.detection_noise = detection;
    pipe.move_speed = kinematics.move_speed;
    pipe.turn_rate = kinematics.turn_rate_deg * kPi / 180;
    pipe.agent_radius = kinematics.agent_radius;
    pipe.reward = reward;
    pipe.history = predictor.config.history;
    pipe.horizon = predictor.config.horizon;
    return pipe;
}

TrainRunConfig RunConfig::train_run() const {
    TrainRunConfig run;
    run.world_base = world.gen;
    run.max_obstacles = training.max_obstacles;
    run.pipe = pipeline();
    run.policy.use_map = training.representation == "rspt" || training.representation == "vist_rs";
    run.policy.use_traj = training.representation == "rspt" || training.representation == "vist_pt";
    run.policy.horizon = predictor.config.horizon;
    run.policy.mixtures = predictor.config.mixtures;
    run.policy.seed = derive_seed(training.seed, 0x10);
    run.predictor = predictor.config;
    run.predictor.seed = derive_seed(training.seed, 0x20);
    run.predictor_train.epochs = training.predictor_epochs;
    run.predictor_train.lr = training.predictor_lr;
    run.a2c.adam.lr = training.learning_rate;
    run.a2c.target_lr_scale = training.target_lr_scale;
    run.opponents.scripted_fraction = training.scripted_opponent_fraction;
    run.a2c.entropy_coef = training.entropy_coef;
    run.a2c.gamma = training.gamma;
    run.n_contexts = training.n_contexts;
    run.rollout_len = training.rollout_len;
    for (int i = 0; i < 3; ++i) run.stage_env_steps[i] = training.stage_env_steps[i];
    run.seed = training.seed;
    return run;
}

std::string RunConfig::resolved_json() const {
    json j;
    j["schema_version"] = schema_version;
    j["world"] = {{"archetype", world.archetype},
                  {"extent", {world.gen.extent.x(), world.gen.extent.y()}},
                  {"obstacle_count", world.gen.obstacle_count},
                  {"rect_fraction", world.gen.rect_fraction},
                  {"min_size", world.gen.min_size},
                  {"max_size", world.gen.max_size},
                  {"spawn_distance", world.gen.spawn_distance}};
    j["sensor"] = {{"fov_deg", sensor.fov * 180 / kPi},
                   {"ray_count", sensor.ray_count},
                   {"max_range", sensor.max_range}};
    j["detection"] = {{"miss_rate", detection.miss_rate},
                      {"bearing_std_rays", detection.bearing_std_rays},
                      {"depth_std", detection.depth_std}};
    j["kinematics"] = {{"move_speed", kinematics.move_speed},
                       {"turn_rate_deg", kinematics.turn_rate_deg},
                       {"agent_radius", kinematics.agent_radius}};
    j["reward"] = {{"expected_distance", reward.expected_distance},
                   {"rho_max", reward.rho_max},
                   {"theta_max_deg", reward.theta_max * 180 / kPi}};
    j["predictor"] = {{"kind", predictor.kind},
                      {"history", predictor.config.history},
                      {"horizon", predictor.config.horizon},
                      {"mixtures", predictor.config.mixtures},
                      {"use_grid", predictor.config.use_grid}};
    j["training"] = {{"representation", training.representation},
                     {"stage_env_steps",
                      {training.stage_env_steps[0], training.stage_env_steps[1],
                       training.stage_env_steps[2]}},
                     {"n_contexts", training.n_contexts},
                     {"rollout_len", training.rollout_len},
                     {"max_obstacles", training.max_obstacles},
                     {"learning_rate", training.learning_rate},
                     {"target_lr_scale", training.target_lr_scale},
                     {"scripted_opponent_fraction", training.scripted_opponent_fraction},
                     {"entropy_coef", training.entropy_coef},
                     {"gamma", training.gamma},
                     {"predictor_epochs", training.predictor_epochs},
                     {"predictor_lr", training.predictor_lr},
                     {"seed", training.seed}};
    j["evaluation"] = {{"suite", evaluation.suite},
                       {"episodes", evaluation.episodes},
                       {"noise", evaluation.noise},
                       {"pose_variance_as_std", evaluation.pose_variance_as_std},
                       {"mode", evaluation.mode},
                       {"target", evaluation.target},
                       {"target_speed_scale", evaluation.target_speed_scale},
                       {"threads", evaluation.threads},
                       {"replay_episodes", evaluation.replay_episodes},
                       {"seed", evaluation.seed}};
    return j.dump(2);
}

}  // namespace rspt
