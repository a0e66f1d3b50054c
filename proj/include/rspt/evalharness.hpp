#pragma once

#include <functional>
#include <memory>

#include "rspt/learning.hpp"

namespace rspt {

struct EpisodeResult {
    Scalar accumulated_reward = 0;
    int episode_length = 0;  // in [1, 500]
    bool success = false;    // episode_length == max_steps
    uint64_t seed = 0;
    TerminationCause cause = TerminationCause::lost;
    bool valid = true;
    std::string fault;
};

class TrackerController {
public:
    virtual ~TrackerController() = default;
    virtual Action act(const Observation& obs, RandomStream& rng) = 0;
    virtual void reset() {}
};

std::unique_ptr<TrackerController> make_policy_controller(PolicyParams params,
                                                          ActMode mode = ActMode::greedy);
std::unique_ptr<TrackerController> make_rule_controller(RewardConfig cfg);
std::unique_ptr<TrackerController> make_planner_controller(RewardConfig cfg);
std::unique_ptr<TrackerController> make_stop_controller();

std::unique_ptr<TargetController> make_policy_target(TargetPolicyParams params,
                                                     ActMode mode = ActMode::sample);

/// Per-step observer invoked after each step (for replay logging and tests).
struct EpisodeStepInfo {
    int step;
    const Observation& obs;
    Action tracker_action, target_action;
    Scalar reward;
    const AgentState& tracker;
    const AgentState& target;
    bool target_visible;
};
using StepHook = std::function<void(const EpisodeStepInfo&)>;

EpisodeResult run_episode(const World& world, TrackerController& tracker_ctrl,
                          TargetController& target_ctrl, const PipelineConfig& pipe,
                          const PredictorFn& predictor, const NoiseConfig& noise,
                          OracleMode mode, uint64_t seed, const StepHook& hook = {});

struct EnvSpec {
    std::string name;
    GenerationConfig config;
    int episodes = 50;
};

struct MethodSpec {
    std::string name;
    std::function<std::unique_ptr<TrackerController>()> make_controller;
    std::function<PredictorFn()> make_predictor;
};

struct CellStats {
    Scalar mean_ar = 0;
    Scalar mean_el = 0;
    Scalar sr = 0;
    int valid = 0;
};

struct BenchmarkTable {
    std::vector<std::string> env_names;
    std::vector<std::string> method_names;
    std::vector<std::vector<CellStats>> cells;  // [method][env]
    std::vector<CellStats> mean;                // per method, average across envs
    std::vector<std::vector<EpisodeResult>> episodes;  // [method][env * episodes + i]
};

struct BenchmarkOptions {
    NoiseConfig noise;
    OracleMode mode = OracleMode::full_pipeline;
    uint64_t seed = 0;
    int threads = 1;
    std::function<std::unique_ptr<TargetController>()> make_target;  // default: navigator
    // Benchmark opponents walk slower than the tracker drives, like the
    // paper's human targets; the adversarial training target keeps full speed.
    Scalar target_speed_scale = 0.7;
};

BenchmarkTable run_benchmark(const std::vector<EnvSpec>& suite,
                             const std::vector<MethodSpec>& methods, const PipelineConfig& pipe,
                             const BenchmarkOptions& options);

std::string format_table(const BenchmarkTable& table);

/// The six held-out layout archetypes plus the randomized training room.
GenerationConfig archetype_config(const std::string& name);
std::vector<std::string> archetype_names();

/// A deterministic scripted scenario: fixed world plus a target waypoint
/// circuit.
struct Scenario {
    World world;
    std::vector<Vec2> waypoints;
    Scalar speed_scale = 1.0;
};

/// Named scripted suites mirroring the real-robot situations: moving_forward,
/// moving_backward, visual_occluding. Throws with the list of known names.
std::vector<Scenario> scenario_suite(const std::string& name, int count = 50);
std::vector<std::string> scenario_suite_names();

EpisodeResult run_scenario(const Scenario& scenario, TrackerController& tracker_ctrl,
                           const PipelineConfig& pipe, const PredictorFn& predictor,
                           const NoiseConfig& noise, OracleMode mode, uint64_t seed,
                           const StepHook& hook = {});

/// Benchmark over a scripted scenario suite (one table column).
BenchmarkTable run_scenario_benchmark(const std::string& suite_name, int count,
                                      const std::vector<MethodSpec>& methods,
                                      const PipelineConfig& pipe,
                                      const BenchmarkOptions& options);

}  // namespace rspt
