#include "rspt/learning.hpp"

#include <memory>

namespace rspt {

using nn::Binder;
using nn::Tape;
using nn::Var;

TargetPolicyParams TargetPolicyParams::init(const TargetNetConfig& config) {
    TargetPolicyParams p;
    p.config = config;
    nn::register_affine(p.store.layout, "trunk", TargetNetConfig::kInputDim, config.hidden);
    nn::register_affine(p.store.layout, "actor", config.hidden, kActionCount);
    nn::register_affine(p.store.layout, "critic", config.hidden, 1);
    RandomStream rng(derive_seed(config.seed, 0x7a));
    p.store.init(rng);
    return p;
}

Vec grounded_target_features(const World& world, const Pose2& tracker_pose,
                             const AgentState& target) {
    Vec f(TargetNetConfig::kInputDim);
    const RelPos target_in_tracker = to_tracker_frame(target.pose.position(), tracker_pose);
    const RelPos tracker_in_target = to_tracker_frame(tracker_pose.position(), target.pose);
    const Scalar dh = normalize_angle(target.pose.heading - tracker_pose.heading);
    f[0] = target_in_tracker.x / kPositionScale;
    f[1] = target_in_tracker.y / kPositionScale;
    f[2] = std::cos(dh);
    f[3] = std::sin(dh);
    f[4] = tracker_in_target.x / kPositionScale;
    f[5] = tracker_in_target.y / kPositionScale;
    f[6] = std::cos(-dh);
    f[7] = std::sin(-dh);
    constexpr Scalar kProximityRange = 5.0;
    for (int k = 0; k < 8; ++k) {
        const Scalar b = k * kPi / 4;
        const Vec2 dir = std::cos(b) * target.pose.forward() + std::sin(b) * target.pose.right();
        Scalar range = ray_exit_distance(target.pose.position(), dir, world.bounds);
        for (const auto& o : world.obstacles)
            range = std::min(range, ray_hit_distance(target.pose.position(), dir, o));
        f[8 + k] = std::min(range, kProximityRange) / kProximityRange;
    }
    return f;
}

TargetHeads target_forward(Tape& t, Binder& bind, const TargetNetConfig&, Var features) {
    Var h = t.tanh_(nn::affine(t, bind, features, "trunk"));
    return {nn::affine(t, bind, h, "actor"), nn::affine(t, bind, h, "critic")};
}

Action target_act(const TargetPolicyParams& params, const Vec& features, ActMode mode,
                  RandomStream& rng) {
    Tape t;
    Binder bind(t, params.store);
    TargetHeads heads = target_forward(t, bind, params.config, t.constant(features.transpose()));
    const Eigen::RowVectorXd logits = t.val(heads.logits).row(0);
    if (!logits.allFinite()) throw Error("target policy produced non-finite logits");
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

RolloutBatch selfplay_rollout(const GenerationConfig& worlds, const PolicyParams& tracker,
                              const PredictorFn& predictor, const TargetPolicyParams& target,
                              const PipelineConfig& pipe, int n_steps_per_context,
                              int n_contexts, uint64_t seed, const SelfplayOptions& options) {
    return selfplay_rollout(
        [&worlds](uint64_t ws) { return generate_world(worlds, ws); }, tracker, predictor,
        target, pipe, n_steps_per_context, n_contexts, seed, options);
}

RolloutBatch selfplay_rollout(const WorldFactory& worlds, const PolicyParams& tracker,
                              const PredictorFn& predictor, const TargetPolicyParams& target,
                              const PipelineConfig& pipe, int n_steps_per_context,
                              int n_contexts, uint64_t seed, const SelfplayOptions& options) {
    SelfplayRunner one_shot(pipe, n_contexts, seed, options);
    one_shot.set_predictor(predictor);
    return one_shot.collect_from(worlds, tracker, target, n_steps_per_context);
}

struct SelfplayRunner::Impl {
    struct Ctx {
        std::unique_ptr<EpisodeContext> episode;
        std::unique_ptr<TargetController> scripted;  // null: learned adversary
        RandomStream rng{0};
        uint64_t next_world = 0;
        bool fresh = true;
    };

    PipelineConfig pipe;
    SelfplayOptions options;
    uint64_t seed = 0;
    PredictorFn predictor;
    std::vector<Ctx> ctxs;
    long finished_episodes = 0;
    long finished_steps = 0;

    Impl(PipelineConfig p, int n_contexts, uint64_t s, const SelfplayOptions& o)
        : pipe(std::move(p)), options(o), seed(s) {
        const int n_scripted = static_cast<int>(
            std::lround(options.scripted_fraction * static_cast<Scalar>(n_contexts)));
        ctxs.resize(static_cast<size_t>(n_contexts));
        for (int k = 0; k < n_contexts; ++k) {
            auto& c = ctxs[static_cast<size_t>(k)];
            c.rng = RandomStream(derive_seed(seed, 0xa0 + static_cast<uint64_t>(k)));
            if (k < n_scripted) c.scripted = make_navigator_target();
        }
    }

    void spawn(const WorldFactory& worlds, int k) {
        auto& ctx = ctxs[static_cast<size_t>(k)];
        const uint64_t ws =
            derive_seed(derive_seed(seed, 0xe0 + static_cast<uint64_t>(k)), ctx.next_world++);
        PipelineConfig episode_pipe = pipe;
        if (ctx.scripted) {
            RandomStream speed_rng(derive_seed(ws, 0x5d));
            episode_pipe.target_speed_scale =
                speed_rng.uniform(options.scripted_speed_min, options.scripted_speed_max);
        }
        ctx.episode = std::make_unique<EpisodeContext>(worlds(ws), episode_pipe, predictor,
                                                       NoiseConfig{},
                                                       OracleMode::full_pipeline, ws);
        if (ctx.scripted) ctx.scripted->reset(ctx.episode->world());
        ctx.fresh = true;
    }

    RolloutBatch collect(const WorldFactory& worlds, const PolicyParams& tracker,
                         const TargetPolicyParams& target, int n_steps_per_context) {
        RolloutBatch batch;
        const int n_contexts = static_cast<int>(ctxs.size());
        batch.n_contexts = n_contexts;
        batch.seed = seed;
        if (n_steps_per_context <= 0) return batch;
        batch.steps.reserve(static_cast<size_t>(n_steps_per_context) * n_contexts);

        for (int k = 0; k < n_contexts; ++k)
            if (!ctxs[static_cast<size_t>(k)].episode) spawn(worlds, k);

        for (int t = 0; t < n_steps_per_context; ++t) {
            for (int k = 0; k < n_contexts; ++k) {
                auto& ctx = ctxs[static_cast<size_t>(k)];
                const Observation& obs = ctx.episode->sense();

                StepRecord rec;
                rec.episode_start = ctx.fresh;
                ctx.fresh = false;
                rec.target_scripted = ctx.scripted != nullptr;
                rec.grid = GridSnapshot::of(obs.grid);
                rec.vis_vec = vis_to_input(obs.vis);
                rec.forecast_ser = forecast_to_input(obs.forecast, tracker.config.horizon,
                                                     tracker.config.mixtures)
                                       .transpose();
                rec.window_samples = obs.window.samples;
                rec.window_valid = obs.window.valid;
                rec.tracker_pose = ctx.episode->tracker().pose;
                rec.target_pose = ctx.episode->target().pose;
                rec.target_features =
                    ctx.scripted ? Vec::Zero(TargetNetConfig::kInputDim)
                                 : grounded_target_features(ctx.episode->world(),
                                                            ctx.episode->tracker().pose,
                                                            ctx.episode->target());

                const Action a0 = policy_act(tracker, obs.grid, obs.forecast, obs.vis,
                                             ActMode::sample, ctx.rng);
                const Action a1 =
                    ctx.scripted
                        ? ctx.scripted->act(ctx.episode->world(), ctx.episode->target(),
                                            ctx.episode->tracker(), ctx.rng)
                        : target_act(target, rec.target_features, ActMode::sample, ctx.rng);
                const StepOutcome outcome = ctx.episode->apply(a0, a1);

                rec.action_tracker = static_cast<int>(a0);
                rec.action_target = static_cast<int>(a1);
                rec.reward = outcome.reward;
                rec.done = outcome.done;
                batch.steps.push_back(std::move(rec));

                if (outcome.done) {
                    ++finished_episodes;
                    finished_steps += ctx.episode->steps();
                    spawn(worlds, k);
                }
            }
        }

        for (int k = 0; k < n_contexts; ++k) {
            auto& ctx = ctxs[static_cast<size_t>(k)];
            RolloutBatch::Tail tail;
            tail.terminal = ctx.fresh;  // last step of this context ended an episode
            const Observation& obs = ctx.episode->sense();
            tail.vis_vec = vis_to_input(obs.vis);
            tail.grid = GridSnapshot::of(obs.grid);
            tail.forecast_ser = forecast_to_input(obs.forecast, tracker.config.horizon,
                                                  tracker.config.mixtures)
                                    .transpose();
            tail.target_features =
                ctx.scripted ? Vec::Zero(TargetNetConfig::kInputDim)
                             : grounded_target_features(ctx.episode->world(),
                                                        ctx.episode->tracker().pose,
                                                        ctx.episode->target());
            batch.tails.push_back(std::move(tail));
        }
        return batch;
    }
};

SelfplayRunner::SelfplayRunner(PipelineConfig pipe, int n_contexts, uint64_t seed,
                               const SelfplayOptions& options)
    : impl_(std::make_unique<Impl>(std::move(pipe), n_contexts, seed, options)) {}

SelfplayRunner::~SelfplayRunner() = default;

void SelfplayRunner::set_predictor(PredictorFn predictor) {
    impl_->predictor = std::move(predictor);
    for (auto& ctx : impl_->ctxs) ctx.episode.reset();
}

RolloutBatch SelfplayRunner::collect(const GenerationConfig& worlds,
                                     const PolicyParams& tracker,
                                     const TargetPolicyParams& target,
                                     int n_steps_per_context) {
    return impl_->collect([&worlds](uint64_t ws) { return generate_world(worlds, ws); },
                          tracker, target, n_steps_per_context);
}

RolloutBatch SelfplayRunner::collect_from(const WorldFactory& worlds,
                                          const PolicyParams& tracker,
                                          const TargetPolicyParams& target,
                                          int n_steps_per_context) {
    return impl_->collect(worlds, tracker, target, n_steps_per_context);
}

Scalar SelfplayRunner::drain_mean_episode_length() {
    if (impl_->finished_episodes == 0) return 0;
    const Scalar mean = static_cast<Scalar>(impl_->finished_steps) /
                        static_cast<Scalar>(impl_->finished_episodes);
    impl_->finished_episodes = 0;
    impl_->finished_steps = 0;
    return mean;
}

TrackerBatchInputs tracker_batch_inputs(const RolloutBatch& batch, const PolicyConfig& config) {
    const int n = static_cast<int>(batch.size());
    TrackerBatchInputs in;
    in.vis.resize(n, 6);
    in.grid = config.use_map ? Mat(n, kGridInputSize) : Mat::Zero(1, 1);
    in.traj = config.use_traj ? Mat(n, config.horizon * config.traj_in_dim()) : Mat::Zero(1, 1);
    in.rewards.resize(n);
    in.actions.resize(static_cast<size_t>(n));
    Eigen::RowVectorXd grid_row(kGridInputSize);
    for (int i = 0; i < n; ++i) {
        const auto& s = batch.steps[static_cast<size_t>(i)];
        in.vis.row(i) = s.vis_vec.transpose();
        if (config.use_map) {
            s.grid.write_input(grid_row);
            in.grid.row(i) = grid_row;
        }
        if (config.use_traj) in.traj.row(i) = s.forecast_ser.transpose();
        in.rewards[i] = s.reward;
        in.actions[static_cast<size_t>(i)] = s.action_tracker;
    }
    return in;
}

Vec discounted_returns(const RolloutBatch& batch, const Vec& step_rewards,
                       const Vec& tail_values, Scalar gamma) {
    const int k = batch.n_contexts;
    const int total = static_cast<int>(batch.size());
    const int t_steps = total / k;
    Vec returns(total);
    for (int ctx = 0; ctx < k; ++ctx) {
        Scalar carry = batch.tails[static_cast<size_t>(ctx)].terminal ? 0 : tail_values[ctx];
        for (int t = t_steps - 1; t >= 0; --t) {
            const int idx = t * k + ctx;
            const auto& s = batch.steps[static_cast<size_t>(idx)];
            carry = step_rewards[idx] + (s.done ? 0 : gamma * carry);
            returns[idx] = carry;
        }
    }
    return returns;
}

namespace {

Mat one_hot_actions(const std::vector<int>& actions) {
    Mat oh = Mat::Zero(static_cast<Eigen::Index>(actions.size()), kActionCount);
    for (size_t i = 0; i < actions.size(); ++i) oh(static_cast<Eigen::Index>(i), actions[i]) = 1;
    return oh;
}

/// loss = -mean(A * logpi(a)) + c_v * 0.5 * mean((V - G)^2) - c_e * mean(H)
Var a2c_loss(Tape& t, Var logits, Var value, const std::vector<int>& actions,
             const Vec& advantages, const Vec& returns, const A2cConfig& cfg) {
    const int n = static_cast<int>(actions.size());
    const Scalar inv_n = Scalar(1) / n;

    Var log_pi = t.sub_colvec(logits, t.logsumexp_rows(logits));
    Var chosen = t.rowsum(t.cmul_const(log_pi, one_hot_actions(actions)));  // (n,1)
    Var actor = t.scale(t.sum_all(t.cmul_const(chosen, advantages)), -inv_n);

    Var diff = t.sub(value, t.constant(returns));
    Var value_loss = t.scale(t.sum_all(t.mul(diff, diff)), Scalar(0.5) * inv_n);

    Var probs = t.softmax_rows(logits);
    Var entropy = t.scale(t.sum_all(t.mul(probs, log_pi)), -inv_n);

    return t.sub(t.add(actor, t.scale(value_loss, cfg.value_coef)),
                 t.scale(entropy, cfg.entropy_coef));
}

void clip_grad(Vec& grad, Scalar max_norm) {
    const Scalar norm = grad.norm();
    if (norm > max_norm) grad *= max_norm / norm;
}

Scalar mean_entropy(const Mat& logits) {
    Scalar h = 0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const Scalar m = logits.row(i).maxCoeff();
        Eigen::ArrayXd p = (logits.row(i).array() - m).exp();
        p /= p.sum();
        h -= (p * p.log()).sum();
    }
    return h / static_cast<Scalar>(logits.rows());
}

}  // namespace

Var tracker_loss(Tape& t, Binder& bind, const PolicyConfig& config,
                 const TrackerBatchInputs& inputs, const Vec& advantages, const Vec& returns,
                 const A2cConfig& a2c) {
    PolicyHeads heads = policy_forward(t, bind, config, t.constant(inputs.vis),
                                       t.constant(inputs.grid), t.constant(inputs.traj));
    return a2c_loss(t, heads.logits, heads.value, inputs.actions, advantages, returns, a2c);
}

Var target_loss(Tape& t, Binder& bind, const TargetNetConfig& config, const Mat& features,
                const std::vector<int>& actions, const Vec& advantages, const Vec& returns,
                const A2cConfig& a2c) {
    TargetHeads heads = target_forward(t, bind, config, t.constant(features));
    return a2c_loss(t, heads.logits, heads.value, actions, advantages, returns, a2c);
}

UpdateStats update_policies(const RolloutBatch& batch, PolicyParams& tracker,
                            TargetPolicyParams& target, const A2cConfig& config,
                            A2cState& state) {
    if (batch.size() == 0) throw Error("update_policies: empty batch");
    UpdateStats stats;
    const int n = static_cast<int>(batch.size());
    const int k = batch.n_contexts;

    // ---- tracker ----
    {
        TrackerBatchInputs inputs = tracker_batch_inputs(batch, tracker.config);
        stats.mean_reward = inputs.rewards.mean();

        // Values for bootstrap and advantages (no gradient needed).
        Mat tail_vis(k, 6);
        Mat tail_grid = tracker.config.use_map ? Mat(k, kGridInputSize) : Mat::Zero(1, 1);
        Mat tail_traj = tracker.config.use_traj
                            ? Mat(k, tracker.config.horizon * tracker.config.traj_in_dim())
                            : Mat::Zero(1, 1);
        Eigen::RowVectorXd grid_row(kGridInputSize);
        for (int c = 0; c < k; ++c) {
            const auto& tail = batch.tails[static_cast<size_t>(c)];
            tail_vis.row(c) = tail.vis_vec.transpose();
            if (tracker.config.use_map) {
                tail.grid.write_input(grid_row);
                tail_grid.row(c) = grid_row;
            }
            if (tracker.config.use_traj) tail_traj.row(c) = tail.forecast_ser.transpose();
        }

        Tape t;
        Binder bind(t, tracker.store);
        PolicyHeads heads =
            policy_forward(t, bind, tracker.config, t.constant(inputs.vis),
                           t.constant(inputs.grid), t.constant(inputs.traj));
        Tape tv;
        Binder bind_tail(tv, tracker.store);
        PolicyHeads tails = policy_forward(tv, bind_tail, tracker.config, tv.constant(tail_vis),
                                           tv.constant(tail_grid), tv.constant(tail_traj));

        const Vec values = t.val(heads.value).col(0);
        const Vec tail_values = tv.val(tails.value).col(0);
        const Vec returns = discounted_returns(batch, inputs.rewards, tail_values, config.gamma);
        const Vec advantages = returns - values;

        Var loss = a2c_loss(t, heads.logits, heads.value, inputs.actions, advantages, returns,
                            config);
        const Scalar loss_value = t.val(loss)(0, 0);
        if (!std::isfinite(loss_value)) {
            stats.tracker.reverted = true;
            state.lr_scale /= 2;
            ++state.nan_reverts;
        } else {
            Vec grad = Vec::Zero(tracker.store.layout.total);
            t.backward(loss);
            bind.add_grads_to(grad);
            clip_grad(grad, config.max_grad_norm);
            state.tracker_opt.step(tracker.store.values, grad, state.lr_scale);
            stats.tracker.actor_loss = loss_value;
            stats.tracker.value_loss =
                Scalar(0.5) * (values - returns).squaredNorm() / n;
            stats.tracker.entropy = mean_entropy(t.val(heads.logits));
        }
    }

    // ---- target (same batch, negated rewards; adversary-driven contexts only) ----
    std::vector<int> adv_ctxs;
    for (int c = 0; c < k; ++c)
        if (!batch.steps[static_cast<size_t>(c)].target_scripted) adv_ctxs.push_back(c);
    if (!adv_ctxs.empty()) {
        const int t_steps = n / k;
        const int n_adv = t_steps * static_cast<int>(adv_ctxs.size());
        Mat features(n_adv, TargetNetConfig::kInputDim);
        std::vector<int> actions(static_cast<size_t>(n_adv));
        Vec rewards(n_adv);
        std::vector<char> dones(static_cast<size_t>(n_adv));
        int at = 0;
        for (int c : adv_ctxs) {
            for (int t = 0; t < t_steps; ++t, ++at) {
                const auto& s = batch.steps[static_cast<size_t>(t * k + c)];
                features.row(at) = s.target_features.transpose();
                actions[static_cast<size_t>(at)] = s.action_target;
                rewards[at] = reward_target(s.reward);
                dones[static_cast<size_t>(at)] = s.done;
            }
        }
        Mat tail_features(static_cast<Eigen::Index>(adv_ctxs.size()),
                          TargetNetConfig::kInputDim);
        for (size_t i = 0; i < adv_ctxs.size(); ++i)
            tail_features.row(static_cast<Eigen::Index>(i)) =
                batch.tails[static_cast<size_t>(adv_ctxs[i])].target_features.transpose();

        Tape t;
        Binder bind(t, target.store);
        TargetHeads heads = target_forward(t, bind, target.config, t.constant(features));
        Tape tv;
        Binder bind_tail(tv, target.store);
        TargetHeads tails = target_forward(tv, bind_tail, target.config, tv.constant(tail_features));

        const Vec values = t.val(heads.value).col(0);
        const Vec tail_values = tv.val(tails.value).col(0);
        // Returns over the chain-major sub-batch.
        Vec returns(n_adv);
        for (size_t i = 0; i < adv_ctxs.size(); ++i) {
            Scalar carry = batch.tails[static_cast<size_t>(adv_ctxs[i])].terminal
                               ? 0
                               : tail_values[static_cast<Eigen::Index>(i)];
            for (int t2 = t_steps - 1; t2 >= 0; --t2) {
                const int idx = static_cast<int>(i) * t_steps + t2;
                carry = rewards[idx] +
                        (dones[static_cast<size_t>(idx)] ? 0 : config.gamma * carry);
                returns[idx] = carry;
            }
        }
        const Vec advantages = returns - values;

        Var loss = a2c_loss(t, heads.logits, heads.value, actions, advantages, returns, config);
        const int n_target = n_adv;
        (void)n_target;
        const Scalar loss_value = t.val(loss)(0, 0);
        if (!std::isfinite(loss_value)) {
            stats.target.reverted = true;
            state.lr_scale /= 2;
            ++state.nan_reverts;
        } else {
            Vec grad = Vec::Zero(target.store.layout.total);
            t.backward(loss);
            bind.add_grads_to(grad);
            clip_grad(grad, config.max_grad_norm);
            state.target_opt.step(target.store.values, grad,
                                  state.lr_scale * config.target_lr_scale);
            stats.target.actor_loss = loss_value;
            stats.target.value_loss = Scalar(0.5) * (values - returns).squaredNorm() / n_adv;
            stats.target.entropy = mean_entropy(t.val(heads.logits));
        }
    }
    return stats;
}

GenerationConfig curriculum_schedule(Scalar phase, const GenerationConfig& base,
                                     int max_obstacles) {
    GenerationConfig cfg = base;
    const Scalar ramp = std::clamp(phase / Scalar(0.8), Scalar(0), Scalar(1));
    cfg.obstacle_count = static_cast<int>(std::lround(ramp * max_obstacles));
    return cfg;
}

TrainOutput train_rspt(const TrainRunConfig& config, const MetricsHook& hook,
                       const TrainOutput* resume, const SnapshotHook& snapshot_hook) {
    TrainOutput out{PolicyParams::init(config.policy),
                    TargetPolicyParams::init({.hidden = 64, .seed = derive_seed(config.seed, 0x71)}),
                    PredictorParams::init(config.predictor),
                    {},
                    0};
    if (resume) {
        out.tracker = resume->tracker;
        out.target = resume->target;
        out.predictor = resume->predictor;
    }
    A2cState state(config.a2c);

    const long steps_per_update = static_cast<long>(config.n_contexts) * config.rollout_len;
    long total_steps = 0;
    for (long s : config.stage_env_steps) total_steps += s;
    total_steps = std::max(total_steps, 1L);

    PredictionDataset dataset;
    int update = 0;

    SelfplayRunner runner(config.pipe, config.n_contexts, derive_seed(config.seed, 0x99),
                          config.opponents);
    for (int stage = 0; stage < 3; ++stage) {
        const long stage_steps = config.stage_env_steps[stage];
        const long n_updates = (stage_steps + steps_per_update - 1) / steps_per_update;
        runner.set_predictor(mdn_predictor(out.predictor));
        const bool collect = stage < 2 && config.policy.use_traj;

        for (long u = 0; u < n_updates; ++u) {
            const Scalar phase = static_cast<Scalar>(out.env_steps) / total_steps;
            const GenerationConfig gen =
                curriculum_schedule(phase, config.world_base, config.max_obstacles);
            const RolloutBatch batch =
                runner.collect(gen, out.tracker, out.target, config.rollout_len);
            out.env_steps += static_cast<long>(batch.size());

            if (collect && dataset.size() < config.dataset_cap) {
                PredictionDataset more = log_predictor_dataset(
                    batch, config.predictor.history, config.predictor.horizon,
                    config.dataset_stride);
                for (auto& s : more) {
                    if (dataset.size() >= config.dataset_cap) break;
                    dataset.push_back(std::move(s));
                }
            }

            const UpdateStats stats =
                update_policies(batch, out.tracker, out.target, config.a2c, state);
            ++update;
            if (hook) {
                hook({update, out.env_steps, stage, stats.mean_reward, stats.tracker.entropy,
                      stats.target.entropy, stats.tracker.value_loss,
                      runner.drain_mean_episode_length(), state.nan_reverts});
            }
            if (snapshot_hook && config.snapshot_every > 0 &&
                update % config.snapshot_every == 0) {
                snapshot_hook({out.tracker, out.target, out.predictor, update});
            }
        }

        if (stage < 2 && config.policy.use_traj && !dataset.empty()) {
            PredictorTrainConfig pt = config.predictor_train;
            pt.seed = derive_seed(config.seed, 0x200 + static_cast<uint64_t>(stage));
            TrainedPredictor trained = train_predictor(dataset, config.predictor, pt);
            out.predictor = std::move(trained.params);
            out.predictor_curve = std::move(trained.train_curve);
            dataset.clear();  // stage B logs a fresh, on-policy dataset
        }
    }
    return out;
}

PredictionDataset log_predictor_dataset(const RolloutBatch& batch, int history, int horizon,
                                        int stride) {
    PredictionDataset data;
    const int k = batch.n_contexts;
    const int total = static_cast<int>(batch.size());
    const int t_steps = k > 0 ? total / k : 0;
    for (int ctx = 0; ctx < k; ++ctx) {
        int ep_begin = 0;  // step index within this context's chain
        std::vector<int> chain;  // batch indices of this context in time order
        chain.reserve(static_cast<size_t>(t_steps));
        for (int t = 0; t < t_steps; ++t) chain.push_back(t * k + ctx);

        for (int t = 0; t < t_steps; ++t) {
            const auto& s = batch.steps[static_cast<size_t>(chain[static_cast<size_t>(t)])];
            if (s.episode_start) ep_begin = t;
            const int in_ep = t - ep_begin;  // 0-based index within the episode
            // A window ends at t once `history` in-episode steps back it, and
            // needs `horizon` future steps from the same episode.
            if (in_ep + 1 < history) continue;
            if ((in_ep + 1 - history) % stride != 0) continue;
            bool future_ok = t + horizon < t_steps;
            for (int f = 1; future_ok && f <= horizon; ++f) {
                const auto& fs =
                    batch.steps[static_cast<size_t>(chain[static_cast<size_t>(t + f)])];
                if (fs.episode_start) future_ok = false;
            }
            if (!future_ok) continue;

            PredictionSample sample;
            sample.grid = s.grid;
            sample.window.samples = s.window_samples;
            sample.window.valid = s.window_valid;
            sample.future.resize(horizon, 2);
            sample.future_valid =
                Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(horizon, true);
            for (int f = 1; f <= horizon; ++f) {
                const auto& fs =
                    batch.steps[static_cast<size_t>(chain[static_cast<size_t>(t + f)])];
                const RelPos rel = to_tracker_frame(fs.target_pose.position(), s.tracker_pose);
                sample.future(f - 1, 0) = rel.x;
                sample.future(f - 1, 1) = rel.y;
            }
            data.push_back(std::move(sample));
        }
    }
    return data;
}

}  // namespace rspt
