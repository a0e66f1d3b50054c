#pragma once

#include "rspt/mapping.hpp"
#include "rspt/nn/layers.hpp"

namespace rspt {

/// Last-H relative target coordinates, oldest first, re-expressed in the
/// current tracker frame on every advance. Invalid (not-found) samples are
/// zero with a false mask bit.
struct TrajectoryWindow {
    Mat samples;  // (H, 2)
    Eigen::Array<bool, Eigen::Dynamic, 1> valid;

    static TrajectoryWindow empty(int history) {
        TrajectoryWindow w;
        w.samples = Mat::Zero(history, 2);
        w.valid = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(history, false);
        return w;
    }

    int length() const { return static_cast<int>(samples.rows()); }
    int valid_count() const { return static_cast<int>(valid.count()); }

    /// Shift one step: re-express history in the post-motion frame, drop the
    /// oldest sample and append the newest observation (or an invalid zero).
    void advance(const TrackerMotion& motion, const std::optional<RelPos>& observation) {
        const int h = length();
        for (int i = 0; i + 1 < h; ++i) {
            if (valid[i + 1]) {
                const RelPos p = reexpress({samples(i + 1, 0), samples(i + 1, 1)}, motion);
                samples(i, 0) = p.x;
                samples(i, 1) = p.y;
            } else {
                samples.row(i).setZero();
            }
            valid[i] = valid[i + 1];
        }
        if (observation) {
            samples(h - 1, 0) = observation->x;
            samples(h - 1, 1) = observation->y;
            valid[h - 1] = true;
        } else {
            samples.row(h - 1).setZero();
            valid[h - 1] = false;
        }
    }

    RelPos sample(int i) const { return {samples(i, 0), samples(i, 1)}; }

    std::optional<RelPos> last_valid() const {
        for (int i = length() - 1; i >= 0; --i)
            if (valid[i]) return sample(i);
        return std::nullopt;
    }
};

inline constexpr Scalar kPositionScale = 7.5;  // network input normalization

/// Network input for the history encoder: per step (x, y, mask) scaled.
Eigen::RowVectorXd window_to_input(const TrajectoryWindow& window);

/// Gaussian-mixture forecast of the next F relative positions, one diagonal
/// mixture per future step.
struct MixtureForecast {
    Mat weights;  // (F, K), rows sum to 1
    Mat mean_x, mean_y;  // (F, K) meters, tracker frame
    Mat std_x, std_y;    // (F, K) strictly positive meters

    int horizon() const { return static_cast<int>(weights.rows()); }
    int mixtures() const { return static_cast<int>(weights.cols()); }

    RelPos mixture_mean(int f) const {
        return {weights.row(f).dot(mean_x.row(f)), weights.row(f).dot(mean_y.row(f))};
    }

    bool valid(Scalar tol = 1e-6) const {
        if (!(weights.allFinite() && mean_x.allFinite() && mean_y.allFinite() &&
              std_x.allFinite() && std_y.allFinite()))
            return false;
        for (int f = 0; f < horizon(); ++f) {
            if (std::abs(weights.row(f).sum() - 1) > tol) return false;
            if ((std_x.row(f).minCoeff() <= 0) || (std_y.row(f).minCoeff() <= 0)) return false;
        }
        return true;
    }

    static MixtureForecast zeros(int horizon, int mixtures) {
        MixtureForecast m;
        m.weights = Mat::Constant(horizon, mixtures, Scalar(1) / mixtures);
        m.mean_x = Mat::Zero(horizon, mixtures);
        m.mean_y = Mat::Zero(horizon, mixtures);
        m.std_x = Mat::Constant(horizon, mixtures, 1);
        m.std_y = Mat::Constant(horizon, mixtures, 1);
        return m;
    }
};

/// Serialization of a forecast for the controller's trajectory encoder:
/// per step [weights..., mean_x/scale..., mean_y/scale...].
Eigen::RowVectorXd forecast_to_input(const MixtureForecast& forecast);

/// Fixed-shape serialization: missing steps/components pad with zero weight,
/// extras are dropped. Lets a single-Gaussian (Kalman) forecast feed an
/// encoder sized for the full mixture.
Eigen::RowVectorXd forecast_to_input(const MixtureForecast& forecast, int horizon,
                                     int mixtures);

struct PredictorConfig {
    int history = 10;
    int horizon = 5;
    int mixtures = 5;
    int map_embed = 32;
    int traj_embed = 32;
    int decoder_hidden = 32;
    bool use_grid = true;  // false: history-only (wall-blind) ablation
    uint64_t seed = 1;

    friend bool operator==(const PredictorConfig&, const PredictorConfig&) = default;
};

// log sigma is bounded smoothly into (kLogStdMin, kLogStdMax).
inline constexpr Scalar kLogStdMin = -4.0;
inline constexpr Scalar kLogStdMax = 2.0;

struct PredictorParams {
    PredictorConfig config;
    nn::ParamStore store;

    static PredictorParams init(const PredictorConfig& config);
};

/// Per-step head outputs of the mixture decoder.
struct MdnOutput {
    std::vector<nn::Var> pi_logits;   // F x (n, K)
    std::vector<nn::Var> mu;          // F x (n, 2K): x block then y block
    std::vector<nn::Var> log_sigma;   // F x (n, 2K), already bounded
};

/// Batched forward pass. grid_input (n, kGridInputSize) is ignored when the
/// config is history-only.
MdnOutput mdn_forward(nn::Tape& tape, nn::Binder& bind, const PredictorConfig& config,
                      nn::Var grid_input, nn::Var window_input);

/// Summed negative log-likelihood over all samples and masked steps.
/// truth_x/truth_y/mask are (n, F).
nn::Var mdn_nll(nn::Tape& tape, const PredictorConfig& config, const MdnOutput& out,
                const Mat& truth_x, const Mat& truth_y, const Mat& mask);

/// Single-sample deterministic forward pass.
MixtureForecast predict(const PredictorParams& params, const EgoGrid& grid,
                        const TrajectoryWindow& window);

/// Mixture negative log-likelihood of the true future under a forecast:
/// -sum over valid steps of log sum_k w_k N(truth_f; mu_k, diag sigma_k^2).
Scalar nll_loss(const MixtureForecast& forecast, const Mat& truth,
                const Eigen::Array<bool, Eigen::Dynamic, 1>& mask);

struct KfConfig {
    Scalar meas_std = 0.1;
    Scalar accel_std = 0.05;
    Scalar init_vel_var = 1e6;
    Scalar stationary_std = 2.0;
};

/// Constant-velocity Kalman filter over the valid window samples, rolled out
/// open-loop for the forecast horizon as a single-component mixture.
MixtureForecast kf_predict(const TrajectoryWindow& window, int horizon,
                           const KfConfig& config = {});

struct PredictionSample {
    GridSnapshot grid;
    TrajectoryWindow window;
    Mat future;  // (F, 2)
    Eigen::Array<bool, Eigen::Dynamic, 1> future_valid;
};

using PredictionDataset = std::vector<PredictionSample>;

struct PredictorTrainConfig {
    int epochs = 30;
    int batch_size = 64;
    Scalar lr = 1e-3;
    Scalar validation_fraction = 0.1;
    uint64_t seed = 7;
};

struct TrainedPredictor {
    PredictorParams params;
    std::vector<Scalar> train_curve;  // mean NLL per step, per epoch
    std::vector<Scalar> val_curve;
    bool diverged = false;
};

/// Gradient-descent NLL minimization. Deterministic for a fixed seed. On a
/// non-finite loss, aborts and returns the last finite parameters flagged.
/// Pass warm_start to continue from existing parameters.
TrainedPredictor train_predictor(const PredictionDataset& dataset, const PredictorConfig& config,
                                 const PredictorTrainConfig& train,
                                 const PredictorParams* warm_start = nullptr);

/// Mean NLL per valid step of a dataset under a trained predictor.
Scalar dataset_nll_per_step(const PredictorParams& params, const PredictionDataset& dataset);

/// Same metric for the Kalman baseline.
Scalar dataset_nll_per_step_kf(const PredictionDataset& dataset, int horizon,
                               const KfConfig& config = {});

}  // namespace rspt
