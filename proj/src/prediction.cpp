#include "rspt/prediction.hpp"

#include <numeric>

#include <Eigen/LU>

namespace rspt {

using nn::Binder;
using nn::Tape;
using nn::Var;

Eigen::RowVectorXd window_to_input(const TrajectoryWindow& window) {
    const int h = window.length();
    Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(3 * h);
    for (int i = 0; i < h; ++i) {
        out[3 * i] = window.samples(i, 0) / kPositionScale;
        out[3 * i + 1] = window.samples(i, 1) / kPositionScale;
        out[3 * i + 2] = window.valid[i] ? 1 : 0;
    }
    return out;
}

Eigen::RowVectorXd forecast_to_input(const MixtureForecast& forecast) {
    return forecast_to_input(forecast, forecast.horizon(), forecast.mixtures());
}

Eigen::RowVectorXd forecast_to_input(const MixtureForecast& forecast, int horizon,
                                     int mixtures) {
    Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(3 * mixtures * horizon);
    const int fs = std::min(horizon, forecast.horizon());
    const int ks = std::min(mixtures, forecast.mixtures());
    for (int s = 0; s < fs; ++s) {
        for (int k = 0; k < ks; ++k) {
            out[3 * mixtures * s + k] = forecast.weights(s, k);
            out[3 * mixtures * s + mixtures + k] = forecast.mean_x(s, k) / kPositionScale;
            out[3 * mixtures * s + 2 * mixtures + k] = forecast.mean_y(s, k) / kPositionScale;
        }
    }
    return out;
}

namespace {

void register_predictor(nn::ParamLayout& layout, const PredictorConfig& cfg) {
    if (cfg.use_grid) nn::register_grid_encoder(layout, "emap", cfg.map_embed);
    nn::register_gru(layout, "etraj", 3, cfg.traj_embed);
    const int ctx = cfg.traj_embed + (cfg.use_grid ? cfg.map_embed : 0);
    nn::register_affine(layout, "dec.init", ctx, cfg.decoder_hidden);
    nn::register_gru(layout, "dec.gru", cfg.horizon, cfg.decoder_hidden);
    nn::register_affine(layout, "head.pi", cfg.decoder_hidden, cfg.mixtures);
    nn::register_affine(layout, "head.mu", cfg.decoder_hidden, 2 * cfg.mixtures);
    nn::register_affine(layout, "head.ls", cfg.decoder_hidden, 2 * cfg.mixtures);
}

/// Smooth bound of raw head outputs into (kLogStdMin, kLogStdMax).
Var bound_log_sigma(Tape& t, Var raw) {
    const Scalar center = (kLogStdMax + kLogStdMin) / 2;   // -1
    const Scalar span = (kLogStdMax - kLogStdMin) / 2;     // 3
    return t.add_scalar(t.scale(t.tanh_(t.scale(raw, 1 / span)), span), center);
}

}  // namespace

PredictorParams PredictorParams::init(const PredictorConfig& config) {
    PredictorParams p;
    p.config = config;
    register_predictor(p.store.layout, config);
    RandomStream rng(derive_seed(config.seed, 0x9d));
    p.store.init(rng);
    return p;
}

MdnOutput mdn_forward(Tape& t, Binder& bind, const PredictorConfig& cfg, Var grid_input,
                      Var window_input) {
    const Eigen::Index n = t.val(window_input).rows();

    Var h = t.constant(Mat::Zero(n, cfg.traj_embed));
    for (int step = 0; step < cfg.history; ++step) {
        Var x = t.slice(window_input, 0, 3 * step, static_cast<int>(n), 3);
        h = nn::gru_cell(t, bind, x, h, "etraj");
    }

    Var ctx = h;
    if (cfg.use_grid) {
        Var emap = nn::grid_encoder(t, bind, grid_input, "emap");
        const std::array<Var, 2> parts{emap, h};
        ctx = t.hcat(parts);
    }
    Var s = t.tanh_(nn::affine(t, bind, ctx, "dec.init"));

    MdnOutput out;
    for (int f = 0; f < cfg.horizon; ++f) {
        Mat step_onehot = Mat::Zero(n, cfg.horizon);
        step_onehot.col(f).setOnes();
        Var x = t.constant(std::move(step_onehot));
        s = nn::gru_cell(t, bind, x, s, "dec.gru");
        out.pi_logits.push_back(nn::affine(t, bind, s, "head.pi"));
        out.mu.push_back(nn::affine(t, bind, s, "head.mu"));
        out.log_sigma.push_back(bound_log_sigma(t, nn::affine(t, bind, s, "head.ls")));
    }
    return out;
}

nn::Var mdn_nll(Tape& t, const PredictorConfig& cfg, const MdnOutput& out, const Mat& truth_x,
                const Mat& truth_y, const Mat& mask) {
    const int n = static_cast<int>(truth_x.rows());
    const int k = cfg.mixtures;
    const Scalar log2pi = std::log(2 * kPi);

    Var total = t.constant(Mat::Zero(n, 1));
    for (int f = 0; f < cfg.horizon; ++f) {
        Var logits = out.pi_logits[f];
        Var log_pi = t.sub_colvec(logits, t.logsumexp_rows(logits));

        Var mu_x = t.slice(out.mu[f], 0, 0, n, k);
        Var mu_y = t.slice(out.mu[f], 0, k, n, k);
        Var ls_x = t.slice(out.log_sigma[f], 0, 0, n, k);
        Var ls_y = t.slice(out.log_sigma[f], 0, k, n, k);

        Var dx = t.sub_colvec(mu_x, t.constant(truth_x.col(f)));
        Var dy = t.sub_colvec(mu_y, t.constant(truth_y.col(f)));
        Var zx = t.mul(dx, t.exp_(t.neg(ls_x)));
        Var zy = t.mul(dy, t.exp_(t.neg(ls_y)));

        // log N_k = -log(2pi) - ls_x - ls_y - (zx^2 + zy^2) / 2
        Var quad = t.scale(t.add(t.mul(zx, zx), t.mul(zy, zy)), -0.5);
        Var log_n = t.add_scalar(t.sub(t.sub(quad, ls_x), ls_y), -log2pi);

        Var log_mix = t.logsumexp_rows(t.add(log_pi, log_n));  // (n, 1)
        total = t.add(total, t.cmul_const(log_mix, mask.col(f)));
    }
    return t.neg(t.sum_all(total));
}

MixtureForecast predict(const PredictorParams& params, const EgoGrid& grid,
                        const TrajectoryWindow& window) {
    if (!params.store.finite())
        throw Error("predictor parameters contain non-finite values");
    Tape t;
    Binder bind(t, params.store);
    Var grid_in = t.constant(params.config.use_grid ? Mat(grid_to_input(grid))
                                                    : Mat::Zero(1, 1));
    Var win_in = t.constant(Mat(window_to_input(window)));
    MdnOutput out = mdn_forward(t, bind, params.config, grid_in, win_in);

    const int f = params.config.horizon, k = params.config.mixtures;
    MixtureForecast m;
    m.weights.resize(f, k);
    m.mean_x.resize(f, k);
    m.mean_y.resize(f, k);
    m.std_x.resize(f, k);
    m.std_y.resize(f, k);
    for (int s = 0; s < f; ++s) {
        const Mat& logits = t.val(out.pi_logits[s]);
        const Scalar mx = logits.row(0).maxCoeff();
        Eigen::ArrayXd e = (logits.row(0).array() - mx).exp();
        m.weights.row(s) = (e / e.sum()).matrix();
        m.mean_x.row(s) = t.val(out.mu[s]).row(0).head(k);
        m.mean_y.row(s) = t.val(out.mu[s]).row(0).tail(k);
        m.std_x.row(s) = t.val(out.log_sigma[s]).row(0).head(k).array().exp();
        m.std_y.row(s) = t.val(out.log_sigma[s]).row(0).tail(k).array().exp();
    }
    return m;
}

Scalar nll_loss(const MixtureForecast& forecast, const Mat& truth,
                const Eigen::Array<bool, Eigen::Dynamic, 1>& mask) {
    const Scalar log2pi = std::log(2 * kPi);
    Scalar total = 0;
    for (int f = 0; f < forecast.horizon(); ++f) {
        if (!mask[f]) continue;
        const int k = forecast.mixtures();
        Eigen::ArrayXd log_terms(k);
        for (int j = 0; j < k; ++j) {
            const Scalar sx = forecast.std_x(f, j), sy = forecast.std_y(f, j);
            const Scalar zx = (truth(f, 0) - forecast.mean_x(f, j)) / sx;
            const Scalar zy = (truth(f, 1) - forecast.mean_y(f, j)) / sy;
            log_terms[j] = std::log(forecast.weights(f, j)) - log2pi - std::log(sx) -
                           std::log(sy) - (zx * zx + zy * zy) / 2;
        }
        const Scalar m = log_terms.maxCoeff();
        total += m + std::log((log_terms - m).exp().sum());
    }
    return -total;
}

MixtureForecast kf_predict(const TrajectoryWindow& window, int horizon, const KfConfig& cfg) {
    MixtureForecast m;
    m.weights = Mat::Ones(horizon, 1);
    m.mean_x = Mat::Zero(horizon, 1);
    m.mean_y = Mat::Zero(horizon, 1);
    m.std_x = Mat::Constant(horizon, 1, cfg.stationary_std);
    m.std_y = Mat::Constant(horizon, 1, cfg.stationary_std);

    std::vector<int> valid_idx;
    for (int i = 0; i < window.length(); ++i)
        if (window.valid[i]) valid_idx.push_back(i);

    if (valid_idx.size() < 2) {
        // Stationary fallback centered on the last valid sample (origin if none).
        RelPos center = valid_idx.empty() ? RelPos{0, 0} : window.sample(valid_idx.back());
        m.mean_x.setConstant(center.x);
        m.mean_y.setConstant(center.y);
        return m;
    }

    using Mat4 = Eigen::Matrix4d;
    using Vec4 = Eigen::Vector4d;
    Mat4 F = Mat4::Identity();
    F(0, 2) = 1;
    F(1, 3) = 1;
    const Scalar q = cfg.accel_std * cfg.accel_std;
    Mat4 Q = Mat4::Zero();
    Q(0, 0) = Q(1, 1) = q / 4;
    Q(0, 2) = Q(2, 0) = Q(1, 3) = Q(3, 1) = q / 2;
    Q(2, 2) = Q(3, 3) = q;
    const Scalar r = cfg.meas_std * cfg.meas_std;
    Eigen::Matrix<Scalar, 2, 4> H = Eigen::Matrix<Scalar, 2, 4>::Zero();
    H(0, 0) = H(1, 1) = 1;

    Vec4 x;
    x << window.samples(valid_idx[0], 0), window.samples(valid_idx[0], 1), 0, 0;
    Mat4 P = Mat4::Zero();
    P(0, 0) = P(1, 1) = r;
    P(2, 2) = P(3, 3) = cfg.init_vel_var;

    for (int step = valid_idx[0] + 1; step < window.length(); ++step) {
        x = F * x;
        P = F * P * F.transpose() + Q;
        if (!window.valid[step]) continue;
        const Vec2 z{window.samples(step, 0), window.samples(step, 1)};
        const Vec2 innov = z - H * x;
        const Eigen::Matrix2d S = H * P * H.transpose() + r * Eigen::Matrix2d::Identity();
        const Eigen::Matrix<Scalar, 4, 2> K = P * H.transpose() * S.inverse();
        x += K * innov;
        // Joseph form keeps P positive with the large velocity prior.
        const Mat4 ikh = Mat4::Identity() - K * H;
        P = ikh * P * ikh.transpose() + r * K * K.transpose();
        P = ((P + P.transpose()) / 2).eval();
    }

    for (int f = 0; f < horizon; ++f) {
        x = F * x;
        P = F * P * F.transpose() + Q;
        m.mean_x(f, 0) = x[0];
        m.mean_y(f, 0) = x[1];
        m.std_x(f, 0) = std::sqrt(std::max(P(0, 0), Scalar(1e-8)));
        m.std_y(f, 0) = std::sqrt(std::max(P(1, 1), Scalar(1e-8)));
    }
    return m;
}

namespace {

struct BatchBuffers {
    Mat grid, window, truth_x, truth_y, mask;
};

BatchBuffers make_batch(const PredictionDataset& data, std::span<const int> rows,
                        const PredictorConfig& cfg) {
    const int n = static_cast<int>(rows.size());
    BatchBuffers b;
    b.grid = cfg.use_grid ? Mat(n, kGridInputSize) : Mat::Zero(1, 1);
    b.window = Mat(n, 3 * cfg.history);
    b.truth_x = Mat(n, cfg.horizon);
    b.truth_y = Mat(n, cfg.horizon);
    b.mask = Mat(n, cfg.horizon);
    Eigen::RowVectorXd grid_row(kGridInputSize);
    for (int i = 0; i < n; ++i) {
        const auto& s = data[static_cast<size_t>(rows[i])];
        if (cfg.use_grid) {
            s.grid.write_input(grid_row);
            b.grid.row(i) = grid_row;
        }
        b.window.row(i) = window_to_input(s.window);
        for (int f = 0; f < cfg.horizon; ++f) {
            b.truth_x(i, f) = s.future(f, 0);
            b.truth_y(i, f) = s.future(f, 1);
            b.mask(i, f) = s.future_valid[f] ? 1 : 0;
        }
    }
    return b;
}

Scalar batch_nll(const PredictorParams& params, const BatchBuffers& b, Vec* grad_out) {
    Tape t;
    Binder bind(t, params.store);
    Var grid_in = t.constant(b.grid);
    Var win_in = t.constant(b.window);
    MdnOutput out = mdn_forward(t, bind, params.config, grid_in, win_in);
    Var loss = mdn_nll(t, params.config, out, b.truth_x, b.truth_y, b.mask);
    const Scalar value = t.val(loss)(0, 0);
    if (grad_out) {
        t.backward(loss);
        bind.add_grads_to(*grad_out);
    }
    return value;
}

}  // namespace

TrainedPredictor train_predictor(const PredictionDataset& dataset, const PredictorConfig& config,
                                 const PredictorTrainConfig& train,
                                 const PredictorParams* warm_start) {
    if (dataset.empty()) throw Error("predictor training requires a non-empty dataset");

    TrainedPredictor result;
    result.params = warm_start ? *warm_start : PredictorParams::init(config);

    RandomStream rng(derive_seed(train.seed, 0x7e));
    std::vector<int> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    for (size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[static_cast<size_t>(rng.uniform_int(static_cast<int>(i)))]);

    const int n_val = std::min(static_cast<int>(dataset.size()) - 1,
                               static_cast<int>(train.validation_fraction *
                                                static_cast<Scalar>(dataset.size())));
    std::vector<int> val_rows(order.begin(), order.begin() + n_val);
    std::vector<int> train_rows(order.begin() + n_val, order.end());

    nn::Adam opt({.lr = train.lr});
    Vec best = result.params.store.values;

    auto mask_count = [&](std::span<const int> rows) {
        Scalar c = 0;
        for (int r : rows) c += static_cast<Scalar>(dataset[static_cast<size_t>(r)].future_valid.count());
        return std::max(c, Scalar(1));
    };
    const Scalar val_steps = val_rows.empty() ? 1 : mask_count(val_rows);

    for (int epoch = 0; epoch < train.epochs; ++epoch) {
        for (size_t i = train_rows.size(); i > 1; --i)
            std::swap(train_rows[i - 1],
                      train_rows[static_cast<size_t>(rng.uniform_int(static_cast<int>(i)))]);

        Scalar epoch_nll = 0, epoch_steps = 0;
        for (size_t at = 0; at < train_rows.size(); at += static_cast<size_t>(train.batch_size)) {
            const size_t end = std::min(at + static_cast<size_t>(train.batch_size), train_rows.size());
            std::span<const int> rows(train_rows.data() + at, end - at);
            BatchBuffers b = make_batch(dataset, rows, config);
            const Scalar steps = b.mask.sum();
            if (steps == 0) continue;

            Vec grad = Vec::Zero(result.params.store.layout.total);
            const Scalar loss = batch_nll(result.params, b, &grad);
            if (!std::isfinite(loss)) {
                result.diverged = true;
                result.params.store.values = best;
                return result;
            }
            grad /= steps;
            opt.step(result.params.store.values, grad);
            epoch_nll += loss;
            epoch_steps += steps;
        }
        result.train_curve.push_back(epoch_nll / std::max(epoch_steps, Scalar(1)));

        if (!val_rows.empty()) {
            BatchBuffers vb = make_batch(dataset, val_rows, config);
            result.val_curve.push_back(batch_nll(result.params, vb, nullptr) / val_steps);
        }
        if (result.params.store.finite()) best = result.params.store.values;
    }
    return result;
}

Scalar dataset_nll_per_step(const PredictorParams& params, const PredictionDataset& dataset) {
    Scalar total = 0, steps = 0;
    for (const auto& s : dataset) {
        const MixtureForecast f = predict(params, s.grid.to_grid(), s.window);
        total += nll_loss(f, s.future, s.future_valid);
        steps += static_cast<Scalar>(s.future_valid.count());
    }
    return total / std::max(steps, Scalar(1));
}

Scalar dataset_nll_per_step_kf(const PredictionDataset& dataset, int horizon,
                               const KfConfig& config) {
    Scalar total = 0, steps = 0;
    for (const auto& s : dataset) {
        const MixtureForecast f = kf_predict(s.window, horizon, config);
        total += nll_loss(f, s.future, s.future_valid);
        steps += static_cast<Scalar>(s.future_valid.count());
    }
    return total / std::max(steps, Scalar(1));
}

}  // namespace rspt
