#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "rspt/evalharness.hpp"
#include "rspt/io/checkpoint.hpp"
#include "rspt/io/config.hpp"
#include "rspt/io/replay.hpp"
#include "rspt/render.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rspt;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

RunConfig load_config_or_default(const std::string& path) {
    if (path.empty()) return parse_run_config("{}");
    return load_run_config(path);
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    out << text;
}

void write_resolved_config(const RunConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    write_text(out_dir + "/config.json", cfg.resolved_json() + "\n");
}

int cmd_train(const std::string& config_path, const std::string& out_dir, uint64_t seed,
              bool seed_set, const std::string& resume_dir) {
    RunConfig cfg = load_config_or_default(config_path);
    if (seed_set) cfg.training.seed = seed;
    write_resolved_config(cfg, out_dir);

    TrainRunConfig run = cfg.train_run();

    std::ofstream metrics(out_dir + "/metrics.jsonl");
    if (!metrics) throw Error("cannot open metrics.jsonl for writing");
    MetricsHook hook = [&](const TrainMetrics& m) {
        json j = {{"update", m.update},
                  {"env_steps", m.env_steps},
                  {"stage", m.stage},
                  {"mean_reward", m.mean_reward},
                  {"tracker_entropy", m.tracker_entropy},
                  {"target_entropy", m.target_entropy},
                  {"tracker_value_loss", m.tracker_value_loss},
                  {"mean_episode_length", m.mean_episode_length},
                  {"nan_reverts", m.nan_reverts}};
        metrics << j.dump() << "\n";
    };

    SnapshotHook snapshots = [&](const TrainSnapshot& snap) {
        save_policy(out_dir + "/tracker.ckpt", snap.tracker);
        save_target_policy(out_dir + "/target.ckpt", snap.target);
        save_predictor(out_dir + "/predictor.ckpt", snap.predictor);
    };
    TrainOutput out;
    if (!resume_dir.empty()) {
        TrainOutput start{load_policy(resume_dir + "/tracker.ckpt", run.policy),
                          load_target_policy(resume_dir + "/target.ckpt"),
                          load_predictor(resume_dir + "/predictor.ckpt", run.predictor),
                          {},
                          0};
        out = train_rspt(run, hook, &start, snapshots);
    } else {
        out = train_rspt(run, hook, nullptr, snapshots);
    }
    save_policy(out_dir + "/tracker.ckpt", out.tracker);
    save_target_policy(out_dir + "/target.ckpt", out.target);
    save_predictor(out_dir + "/predictor.ckpt", out.predictor);
    std::cout << "trained " << out.env_steps << " env steps; checkpoints in " << out_dir << "\n";
    return kExitOk;
}

json episode_to_json(const std::string& method, const std::string& env,
                     const EpisodeResult& r) {
    return {{"method", method},
            {"env", env},
            {"seed", r.seed},
            {"ar", r.accumulated_reward},
            {"el", r.episode_length},
            {"success", r.success},
            {"cause", r.cause == TerminationCause::max_steps ? "max_steps" : "lost"},
            {"valid", r.valid},
            {"fault", r.fault}};
}

json table_to_json(const BenchmarkTable& table) {
    json methods = json::array();
    for (size_t m = 0; m < table.method_names.size(); ++m) {
        json envs = json::array();
        for (size_t e = 0; e < table.env_names.size(); ++e) {
            const auto& c = table.cells[m][e];
            envs.push_back({{"env", table.env_names[e]},
                            {"ar", c.mean_ar},
                            {"el", c.mean_el},
                            {"sr", c.sr},
                            {"valid", c.valid}});
        }
        methods.push_back({{"method", table.method_names[m]},
                           {"envs", envs},
                           {"mean",
                            {{"ar", table.mean[m].mean_ar},
                             {"el", table.mean[m].mean_el},
                             {"sr", table.mean[m].sr}}}});
    }
    return {{"methods", methods}};
}

int cmd_eval(const std::string& config_path, const std::string& out_dir, uint64_t seed,
             bool seed_set, const std::string& checkpoint_dir, std::vector<std::string> methods,
             const std::string& suite_override, const std::string& noise_override,
             const std::string& mode_override) {
    RunConfig cfg = load_config_or_default(config_path);
    if (seed_set) cfg.evaluation.seed = seed;
    if (!noise_override.empty()) cfg.evaluation.noise = noise_override;
    if (!mode_override.empty()) cfg.evaluation.mode = mode_override;
    if (!suite_override.empty()) {
        if (suite_override == "archetypes") {
            cfg.evaluation.suite = archetype_names();
        } else {
            cfg.evaluation.suite = {suite_override};
        }
    }
    write_resolved_config(cfg, out_dir);

    if (methods.empty()) methods = {checkpoint_dir.empty() ? "rule" : "rspt"};

    const PipelineConfig pipe = cfg.pipeline();
    const int horizon = cfg.predictor.config.horizon;
    const int mixtures = cfg.predictor.config.mixtures;

    auto zero_forecast = [horizon, mixtures](const EgoGrid&, const TrajectoryWindow&) {
        return MixtureForecast::zeros(horizon, mixtures);
    };

    std::vector<MethodSpec> specs;
    for (const auto& name : methods) {
        MethodSpec spec;
        spec.name = name;
        if (name == "rule") {
            spec.make_controller = [&cfg] { return make_rule_controller(cfg.reward); };
            spec.make_predictor = [zero_forecast] { return PredictorFn(zero_forecast); };
        } else if (name == "planner") {
            spec.make_controller = [&cfg] { return make_planner_controller(cfg.reward); };
            spec.make_predictor = [zero_forecast] { return PredictorFn(zero_forecast); };
        } else if (name == "stop") {
            spec.make_controller = [] { return make_stop_controller(); };
            spec.make_predictor = [zero_forecast] { return PredictorFn(zero_forecast); };
        } else if (name == "rspt" || name == "rspt_kf") {
            if (checkpoint_dir.empty())
                throw ConfigError("method " + name + " requires --checkpoint");
            PolicyParams policy = load_policy(checkpoint_dir + "/tracker.ckpt");
            spec.make_controller = [policy] { return make_policy_controller(policy); };
            if (name == "rspt_kf") {
                spec.make_predictor = [horizon] { return kf_predictor(horizon); };
            } else {
                PredictorParams pred =
                    load_predictor(checkpoint_dir + "/predictor.ckpt", cfg.predictor.config);
                spec.make_predictor = [pred] { return mdn_predictor(pred); };
            }
        } else {
            throw ConfigError("unknown method: " + name +
                              " (expected rule, planner, stop, rspt, rspt_kf)");
        }
        specs.push_back(std::move(spec));
    }

    BenchmarkOptions options;
    options.noise = NoiseConfig::profile(cfg.evaluation.noise, cfg.evaluation.pose_variance_as_std);
    options.mode = oracle_mode_from_string(cfg.evaluation.mode);
    options.seed = cfg.evaluation.seed;
    options.threads = cfg.evaluation.threads;
    options.target_speed_scale = cfg.evaluation.target_speed_scale;
    if (cfg.evaluation.target == "random") {
        options.make_target = make_random_target;
    } else if (cfg.evaluation.target == "frozen") {
        options.make_target = make_frozen_target;
    }

    BenchmarkTable table;
    const std::string& first = cfg.evaluation.suite.front();
    const auto scen_names = scenario_suite_names();
    const bool is_scenario =
        std::find(scen_names.begin(), scen_names.end(), first) != scen_names.end();
    if (is_scenario) {
        table = run_scenario_benchmark(first, cfg.evaluation.episodes, specs, pipe, options);
    } else {
        std::vector<EnvSpec> suite;
        for (const auto& env_name : cfg.evaluation.suite)
            suite.push_back({env_name, archetype_config(env_name), cfg.evaluation.episodes});
        table = run_benchmark(suite, specs, pipe, options);
    }

    std::ofstream episodes(out_dir + "/episodes.jsonl");
    for (size_t m = 0; m < table.method_names.size(); ++m) {
        size_t at = 0;
        for (size_t e = 0; e < table.env_names.size(); ++e) {
            const size_t count = table.episodes[m].size() / table.env_names.size();
            for (size_t i = 0; i < count; ++i, ++at)
                episodes << episode_to_json(table.method_names[m], table.env_names[e],
                                            table.episodes[m][at])
                                .dump()
                         << "\n";
        }
    }
    write_text(out_dir + "/summary.txt", format_table(table));
    write_text(out_dir + "/summary.json", table_to_json(table).dump(2) + "\n");
    std::cout << format_table(table);

    if (cfg.evaluation.replay_episodes > 0 && !is_scenario) {
        fs::create_directories(out_dir + "/replays");
        for (size_t m = 0; m < specs.size(); ++m) {
            for (size_t e = 0; e < cfg.evaluation.suite.size(); ++e) {
                for (int i = 0; i < cfg.evaluation.replay_episodes &&
                                i < cfg.evaluation.episodes; ++i) {
                    const uint64_t episode_seed = derive_seed(
                        derive_seed(options.seed, static_cast<uint64_t>(e)),
                        static_cast<uint64_t>(i));
                    const World world =
                        generate_world(archetype_config(cfg.evaluation.suite[e]), episode_seed);
                    auto controller = specs[m].make_controller();
                    auto target = options.make_target ? options.make_target()
                                                      : make_navigator_target();
                    PipelineConfig episode_pipe = pipe;
                    episode_pipe.target_speed_scale = options.target_speed_scale;
                    ReplayWriter writer(out_dir + "/replays/" + specs[m].name + "_" +
                                            cfg.evaluation.suite[e] + "_" + std::to_string(i) +
                                            ".jsonl",
                                        world, episode_pipe);
                    run_episode(world, *controller, *target, episode_pipe,
                                specs[m].make_predictor(), options.noise, options.mode,
                                episode_seed, writer.hook());
                }
            }
        }
    }
    return kExitOk;
}

int cmd_render(const std::string& replay_path, const std::string& out_dir, int cell_px) {
    RenderOptions options;
    options.cell_px = cell_px;
    const int frames = render_replay(replay_path, out_dir, options);
    json meta = {{"command", "render"},
                 {"replay", replay_path},
                 {"cell_px", cell_px},
                 {"frames", frames}};
    write_text(out_dir + "/render.json", meta.dump(2) + "\n");
    std::cout << "wrote " << frames << " frames to " << out_dir << "\n";
    return kExitOk;
}

int cmd_gen_world(const std::string& config_path, uint64_t seed, const std::string& out_file) {
    RunConfig cfg = load_config_or_default(config_path);
    const World world = generate_world(cfg.world.gen, seed);
    save_world(world, out_file);
    std::cout << "wrote " << out_file << " (" << world.obstacles.size() << " obstacles)\n";
    return kExitOk;
}

int cmd_inspect(const std::string& path) {
    std::cout << describe(inspect_checkpoint(path));
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"RSPT active object tracking: simulation, training and benchmarks"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", resume_dir, checkpoint_dir;
    std::string suite, noise, mode, replay_path, world_out = "world.json", inspect_path;
    std::vector<std::string> methods;
    uint64_t seed = 0;
    int cell_px = 8;

    auto* train = app.add_subcommand("train", "Self-play training run");
    train->add_option("--config", config_path, "run configuration (JSON)");
    auto* train_seed = train->add_option("--seed", seed, "training seed override");
    train->add_option("--out", out_dir, "output directory");
    train->add_option("--resume", resume_dir, "checkpoint directory to resume from");

    auto* eval = app.add_subcommand("eval", "Benchmark evaluation");
    eval->add_option("--config", config_path, "run configuration (JSON)");
    auto* eval_seed = eval->add_option("--seed", seed, "evaluation seed override");
    eval->add_option("--out", out_dir, "output directory");
    eval->add_option("--checkpoint", checkpoint_dir, "trained checkpoint directory");
    eval->add_option("--method", methods, "methods to evaluate (repeatable)");
    eval->add_option("--suite", suite, "archetype, 'archetypes', or scenario suite name");
    eval->add_option("--noise", noise, "noise profile: none|depth|pose|depth_pose");
    eval->add_option("--mode", mode,
                     "oracle mode: full_pipeline|perfect_detection|perfect_pose|perfect_both");

    auto* render = app.add_subcommand("render", "Render a replay log to PPM frames");
    render->add_option("--replay", replay_path, "replay log path")->required();
    render->add_option("--out", out_dir, "frame output directory");
    render->add_option("--cell-px", cell_px, "pixels per grid cell");

    auto* gen = app.add_subcommand("gen-world", "Generate and save a world");
    gen->add_option("--config", config_path, "run configuration (JSON)");
    gen->add_option("--seed", seed, "world seed");
    gen->add_option("--out", world_out, "output world file");

    auto* inspect = app.add_subcommand("inspect-checkpoint", "Print a checkpoint header");
    inspect->add_option("path", inspect_path, "checkpoint file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (train->parsed())
            return cmd_train(config_path, out_dir, seed, train_seed->count() > 0, resume_dir);
        if (eval->parsed())
            return cmd_eval(config_path, out_dir, seed, eval_seed->count() > 0, checkpoint_dir,
                            methods, suite, noise, mode);
        if (render->parsed()) return cmd_render(replay_path, out_dir, cell_px);
        if (gen->parsed()) return cmd_gen_world(config_path, seed, world_out);
        if (inspect->parsed()) return cmd_inspect(inspect_path);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const CheckpointError& e) {
        std::cerr << "checkpoint error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}
