#pragma once

#include "rspt/pipeline.hpp"

namespace rspt {

/// The asymmetric (privileged) target policy: grounded poses of both agents
/// plus eight obstacle-proximity rays around the target.
struct TargetNetConfig {
    int hidden = 64;
    uint64_t seed = 3;
    static constexpr int kInputDim = 16;

    friend bool operator==(const TargetNetConfig&, const TargetNetConfig&) = default;
};

struct TargetPolicyParams {
    TargetNetConfig config;
    nn::ParamStore store;

    static TargetPolicyParams init(const TargetNetConfig& config);
};

/// Grounded features: target pose in the tracker frame, tracker pose in the
/// target frame (positions scaled by sensor range, headings as cos/sin), and
/// 8-direction obstacle ranges around the target (clamped to 5 m, scaled).
Vec grounded_target_features(const World& world, const Pose2& tracker_pose,
                             const AgentState& target);

struct TargetHeads {
    nn::Var logits;
    nn::Var value;
};

TargetHeads target_forward(nn::Tape& tape, nn::Binder& bind, const TargetNetConfig& config,
                           nn::Var features);

Action target_act(const TargetPolicyParams& params, const Vec& features, ActMode mode,
                  RandomStream& rng);

/// One experience step: the observation encodings both policies acted on,
/// the actions, the tracker reward (the target receives its negation), and
/// ground-truth poses for labels and audits.
struct StepRecord {
    GridSnapshot grid;
    Eigen::Matrix<Scalar, 6, 1> vis_vec;
    Vec forecast_ser;
    Mat window_samples;
    Eigen::Array<bool, Eigen::Dynamic, 1> window_valid;
    Vec target_features;
    Pose2 tracker_pose, target_pose;  // ground truth at observation time
    int action_tracker = 0;
    int action_target = 0;
    Scalar reward = 0;  // r0
    bool episode_start = false;
    bool done = false;
    bool target_scripted = false;  // opponent driven by a scripted controller
};

struct RolloutBatch {
    // Interleaved layout: step index t * n_contexts + k.
    std::vector<StepRecord> steps;
    struct Tail {
        Eigen::Matrix<Scalar, 6, 1> vis_vec;
        GridSnapshot grid;
        Vec forecast_ser;
        Vec target_features;
        bool terminal = false;
    };
    std::vector<Tail> tails;  // one per context, for bootstrap values
    int n_contexts = 1;
    uint64_t seed = 0;

    size_t size() const { return steps.size(); }
};

/// Opponent mixture for training: a fraction of the parallel contexts face
/// scripted navigator walkers (with jittered speed) instead of the learned
/// adversary, so the tracker also meets waypoint-style, corner-cutting
/// motion. The adversary's update only sees its own contexts.
struct SelfplayOptions {
    Scalar scripted_fraction = 0.0;
    Scalar scripted_speed_min = 0.7;
    Scalar scripted_speed_max = 0.95;
};

/// Runs the full sense/detect/map/predict/act pipeline for the tracker and
/// grounded-state action selection for the target across n_contexts parallel
/// episode streams. Episodes end by the evaluation rules and re-spawn from
/// fresh worlds. Deterministic in (inputs, seed).
RolloutBatch selfplay_rollout(const GenerationConfig& worlds, const PolicyParams& tracker,
                              const PredictorFn& predictor, const TargetPolicyParams& target,
                              const PipelineConfig& pipe, int n_steps_per_context,
                              int n_contexts, uint64_t seed,
                              const SelfplayOptions& options = {});

/// Same loop over worlds from an arbitrary factory (fixed scenarios, tests).
using WorldFactory = std::function<World(uint64_t seed)>;
RolloutBatch selfplay_rollout(const WorldFactory& worlds, const PolicyParams& tracker,
                              const PredictorFn& predictor, const TargetPolicyParams& target,
                              const PipelineConfig& pipe, int n_steps_per_context,
                              int n_contexts, uint64_t seed,
                              const SelfplayOptions& options = {});

/// Persistent self-play streams: episodes survive across rollout calls, so
/// training sees full-length episodes rather than only their first steps.
/// World generation follows the config passed to each collect() call (the
/// curriculum applies to newly spawned episodes).
class SelfplayRunner {
public:
    SelfplayRunner(PipelineConfig pipe, int n_contexts, uint64_t seed,
                   const SelfplayOptions& options = {});
    ~SelfplayRunner();

    SelfplayRunner(const SelfplayRunner&) = delete;
    SelfplayRunner& operator=(const SelfplayRunner&) = delete;

    /// Swap the (frozen) predictor driving the pipeline; resets all episodes.
    void set_predictor(PredictorFn predictor);

    RolloutBatch collect(const GenerationConfig& worlds, const PolicyParams& tracker,
                         const TargetPolicyParams& target, int n_steps_per_context);
    RolloutBatch collect_from(const WorldFactory& worlds, const PolicyParams& tracker,
                              const TargetPolicyParams& target, int n_steps_per_context);

    /// Mean length of episodes finished since the last call.
    Scalar drain_mean_episode_length();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct A2cConfig {
    Scalar gamma = 0.95;
    Scalar value_coef = 0.5;
    Scalar entropy_coef = 0.01;
    Scalar max_grad_norm = 10.0;
    nn::AdamConfig adam{.lr = 3e-4};
    // The adversary trains at a fraction of the tracker's rate; a full-rate
    // target escalates faster than a from-scratch tracker can follow.
    Scalar target_lr_scale = 0.5;
};

struct A2cState {
    nn::Adam tracker_opt;
    nn::Adam target_opt;
    Scalar lr_scale = 1;
    int nan_reverts = 0;

    explicit A2cState(const A2cConfig& cfg) : tracker_opt(cfg.adam), target_opt(cfg.adam) {}
};

struct AgentUpdateStats {
    Scalar actor_loss = 0;
    Scalar value_loss = 0;
    Scalar entropy = 0;
    bool reverted = false;
};

struct UpdateStats {
    AgentUpdateStats tracker, target;
    Scalar mean_reward = 0;
};

/// Advantage actor-critic step for both agents from the same batch, each with
/// its own rewards (r1 = -r0). A non-finite loss reverts the agent's
/// parameters and halves the shared learning-rate scale.
UpdateStats update_policies(const RolloutBatch& batch, PolicyParams& tracker,
                            TargetPolicyParams& target, const A2cConfig& config,
                            A2cState& state);

/// Batched observation matrices extracted from a rollout (tracker side),
/// exposed for loss construction and gradient checks.
struct TrackerBatchInputs {
    Mat vis, grid, traj;          // (n, 6), (n, grid), (n, traj)
    std::vector<int> actions;
    Vec rewards;                  // r0
};

TrackerBatchInputs tracker_batch_inputs(const RolloutBatch& batch, const PolicyConfig& config);

/// Discounted returns over the interleaved batch with critic bootstrap values
/// at the tails.
Vec discounted_returns(const RolloutBatch& batch, const Vec& step_rewards,
                       const Vec& tail_values, Scalar gamma);

/// The scalar A2C objective for fixed advantage/return constants; the
/// analytic gradient of this expression is what update_policies applies.
nn::Var tracker_loss(nn::Tape& tape, nn::Binder& bind, const PolicyConfig& config,
                     const TrackerBatchInputs& inputs, const Vec& advantages,
                     const Vec& returns, const A2cConfig& a2c);

nn::Var target_loss(nn::Tape& tape, nn::Binder& bind, const TargetNetConfig& config,
                    const Mat& features, const std::vector<int>& actions,
                    const Vec& advantages, const Vec& returns, const A2cConfig& a2c);

/// Obstacle count ramps linearly from zero to the configured maximum over the
/// first 80% of training, then holds.
GenerationConfig curriculum_schedule(Scalar phase, const GenerationConfig& base,
                                     int max_obstacles);

/// Sliding-window extraction of (grid, window, future) triples. Future labels
/// are ground-truth relative positions in the frame of the window's last step.
PredictionDataset log_predictor_dataset(const RolloutBatch& batch, int history, int horizon,
                                        int stride = 1);

struct TrainRunConfig {
    GenerationConfig world_base;  // randomized training room
    int max_obstacles = 8;
    PipelineConfig pipe;
    PolicyConfig policy;
    PredictorConfig predictor;
    PredictorTrainConfig predictor_train;
    A2cConfig a2c;
    int n_contexts = 16;
    int rollout_len = 32;  // steps per context per update
    // Stages: A logs with the fresh predictor, B with the first trained one,
    // C trains the final tracker against the refreshed predictor.
    long stage_env_steps[3] = {40000, 40000, 40000};
    int dataset_stride = 3;
    size_t dataset_cap = 40000;
    int snapshot_every = 200;  // updates between periodic checkpoints
    SelfplayOptions opponents{.scripted_fraction = 0.5};
    uint64_t seed = 42;
};

struct TrainMetrics {
    int update = 0;
    long env_steps = 0;
    int stage = 0;
    Scalar mean_reward = 0;
    Scalar tracker_entropy = 0;
    Scalar target_entropy = 0;
    Scalar tracker_value_loss = 0;
    Scalar mean_episode_length = 0;  // episodes finished since the last update
    int nan_reverts = 0;
};

using MetricsHook = std::function<void(const TrainMetrics&)>;

/// Called with parameter snapshots for periodic checkpointing.
struct TrainSnapshot {
    const PolicyParams& tracker;
    const TargetPolicyParams& target;
    const PredictorParams& predictor;
    int update;
};
using SnapshotHook = std::function<void(const TrainSnapshot&)>;

struct TrainOutput {
    PolicyParams tracker;
    TargetPolicyParams target;
    PredictorParams predictor;
    std::vector<Scalar> predictor_curve;
    long env_steps = 0;
};

/// Full training run: curriculum self-play with staged predictor training
/// (log, fit the predictor, continue with it frozen, refresh once more, then
/// finish the tracker). Deterministic in the config seed. Pass resume to
/// continue from existing parameters instead of a fresh initialization.
TrainOutput train_rspt(const TrainRunConfig& config, const MetricsHook& hook = {},
                       const TrainOutput* resume = nullptr,
                       const SnapshotHook& snapshot_hook = {});

}  // namespace rspt
