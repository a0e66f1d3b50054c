#include <doctest.h>

#include "rspt/prediction.hpp"
#include "support/oracles.hpp"

using namespace rspt;
using nn::Binder;
using nn::Tape;
using nn::Var;

namespace {

EgoGrid all_free_grid() {
    EgoGrid g;
    g.explored.setConstant(1);
    g.prob.setConstant(0.02);
    return g;
}

/// Straight-line constant-velocity window plus its true future.
PredictionSample cv_sample(RandomStream& rng, int history, int horizon) {
    PredictionSample s;
    s.grid = GridSnapshot::of(all_free_grid());
    const Scalar speed = rng.uniform(0.1, 0.4);
    const Scalar dir = rng.uniform(-kPi, kPi);
    const Vec2 v{speed * std::cos(dir), speed * std::sin(dir)};
    const Vec2 p0{rng.uniform(-2, 2), rng.uniform(1, 4)};
    s.window = TrajectoryWindow::empty(history);
    for (int i = 0; i < history; ++i) {
        const Vec2 p = p0 + static_cast<Scalar>(i - (history - 1)) * v;
        s.window.samples(i, 0) = p.x();
        s.window.samples(i, 1) = p.y();
        s.window.valid[i] = true;
    }
    s.future.resize(horizon, 2);
    s.future_valid = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(horizon, true);
    for (int f = 1; f <= horizon; ++f) {
        const Vec2 p = p0 + static_cast<Scalar>(f) * v;
        s.future(f - 1, 0) = p.x();
        s.future(f - 1, 1) = p.y();
    }
    return s;
}

}  // namespace

TEST_CASE("nll_loss: closed-form 2D Gaussian at its mean") {
    MixtureForecast m;
    m.weights = Mat::Ones(1, 1);
    m.mean_x = Mat::Constant(1, 1, 0.7);
    m.mean_y = Mat::Constant(1, 1, -0.2);
    m.std_x = Mat::Ones(1, 1);
    m.std_y = Mat::Ones(1, 1);
    Mat truth(1, 2);
    truth << 0.7, -0.2;
    Eigen::Array<bool, Eigen::Dynamic, 1> mask(1);
    mask << true;
    CHECK(nll_loss(m, truth, mask) == doctest::Approx(std::log(2 * kPi)).epsilon(1e-12));
}

TEST_CASE("nll_loss: fully masked future costs zero") {
    MixtureForecast m = MixtureForecast::zeros(5, 3);
    Mat truth = Mat::Constant(5, 2, 123.0);
    Eigen::Array<bool, Eigen::Dynamic, 1> mask =
        Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(5, false);
    CHECK(nll_loss(m, truth, mask) == 0);
}

TEST_CASE("nll_loss: matches a long-double reference within 1e-9 relative") {
    RandomStream rng(41);
    for (int trial = 0; trial < 300; ++trial) {
        const int f = 1 + rng.uniform_int(5);
        const int k = 1 + rng.uniform_int(5);
        MixtureForecast m;
        m.weights.resize(f, k);
        m.mean_x.resize(f, k);
        m.mean_y.resize(f, k);
        m.std_x.resize(f, k);
        m.std_y.resize(f, k);
        for (int i = 0; i < f; ++i) {
            Scalar sum = 0;
            for (int j = 0; j < k; ++j) {
                m.weights(i, j) = rng.uniform(0.05, 1.0);
                sum += m.weights(i, j);
                m.mean_x(i, j) = rng.uniform(-5, 5);
                m.mean_y(i, j) = rng.uniform(-5, 5);
                m.std_x(i, j) = rng.uniform(0.05, 2.0);
                m.std_y(i, j) = rng.uniform(0.05, 2.0);
            }
            for (int j = 0; j < k; ++j) m.weights(i, j) /= sum;
        }
        Mat truth(f, 2);
        for (int i = 0; i < f; ++i) {
            truth(i, 0) = rng.uniform(-5, 5);
            truth(i, 1) = rng.uniform(-5, 5);
        }
        Eigen::Array<bool, Eigen::Dynamic, 1> mask(f);
        for (int i = 0; i < f; ++i) mask[i] = rng.uniform() < 0.8;
        const Scalar got = nll_loss(m, truth, mask);
        const long double want = oracle::nll_reference(m, truth, mask);
        CHECK(std::abs(got - static_cast<Scalar>(want)) <=
              1e-9 * std::max<Scalar>(1, std::abs(static_cast<Scalar>(want))));
    }
}

TEST_CASE("predict: mixture weights always sum to one") {
    PredictorConfig cfg;
    RandomStream rng(42);
    for (uint64_t seed = 0; seed < 5; ++seed) {
        PredictorConfig c = cfg;
        c.seed = seed;
        const PredictorParams params = PredictorParams::init(c);
        PredictionSample s = cv_sample(rng, cfg.history, cfg.horizon);
        const MixtureForecast m = predict(params, s.grid.to_grid(), s.window);
        CHECK(m.valid(1e-6));
        for (int f = 0; f < m.horizon(); ++f)
            CHECK(m.weights.row(f).sum() == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("predict: zeroed mixture head gives exactly uniform weights") {
    PredictorConfig cfg;
    PredictorParams params = PredictorParams::init(cfg);
    const auto& block = params.store.layout.find("head.pi.w");
    params.store.values.segment(block.offset, block.rows * block.cols).setZero();
    const auto& bias = params.store.layout.find("head.pi.b");
    params.store.values.segment(bias.offset, bias.rows * bias.cols).setZero();

    RandomStream rng(43);
    PredictionSample s = cv_sample(rng, cfg.history, cfg.horizon);
    const MixtureForecast m = predict(params, s.grid.to_grid(), s.window);
    for (int f = 0; f < m.horizon(); ++f)
        for (int k = 0; k < m.mixtures(); ++k)
            CHECK(m.weights(f, k) == doctest::Approx(1.0 / cfg.mixtures).epsilon(1e-12));
}

TEST_CASE("predict: rejects non-finite parameters") {
    PredictorConfig cfg;
    PredictorParams params = PredictorParams::init(cfg);
    params.store.values[10] = std::numeric_limits<Scalar>::quiet_NaN();
    RandomStream rng(44);
    PredictionSample s = cv_sample(rng, cfg.history, cfg.horizon);
    CHECK_THROWS_AS(predict(params, s.grid.to_grid(), s.window), Error);
}

TEST_CASE("mdn gradients match central finite differences") {
    PredictorConfig cfg;
    cfg.map_embed = 16;
    cfg.traj_embed = 12;
    cfg.decoder_hidden = 12;
    cfg.mixtures = 3;
    const PredictorParams params = PredictorParams::init(cfg);

    RandomStream rng(45);
    const int n = 4;
    Mat grid_in(n, kGridInputSize), win_in(n, 3 * cfg.history);
    Mat tx(n, cfg.horizon), ty(n, cfg.horizon), mask(n, cfg.horizon);
    Eigen::RowVectorXd row(kGridInputSize);
    for (int i = 0; i < n; ++i) {
        PredictionSample s = cv_sample(rng, cfg.history, cfg.horizon);
        s.grid.write_input(row);
        grid_in.row(i) = row;
        win_in.row(i) = window_to_input(s.window);
        for (int f = 0; f < cfg.horizon; ++f) {
            tx(i, f) = s.future(f, 0);
            ty(i, f) = s.future(f, 1);
            mask(i, f) = (i + f) % 7 == 0 ? 0 : 1;
        }
    }

    auto eval = [&](const nn::ParamStore& store, Vec* grad) {
        PredictorParams p;
        p.config = cfg;
        p.store = store;
        Tape t;
        Binder bind(t, p.store);
        MdnOutput out = mdn_forward(t, bind, cfg, t.constant(grid_in), t.constant(win_in));
        Var loss = mdn_nll(t, cfg, out, tx, ty, mask);
        const Scalar v = t.val(loss)(0, 0);
        if (grad) {
            t.backward(loss);
            bind.add_grads_to(*grad);
        }
        return v;
    };

    Vec grad = Vec::Zero(params.store.layout.total);
    eval(params.store, &grad);
    RandomStream probe_rng(46);
    int checked = 0;
    for (int i = 0; i < 120; ++i) {
        const int idx = probe_rng.uniform_int(params.store.layout.total);
        const Scalar fd = oracle::finite_diff(
            [&](const Vec& v) {
                nn::ParamStore s = params.store;
                s.values = v;
                return eval(s, nullptr);
            },
            params.store.values, idx);
        const Scalar denom = std::max({std::abs(grad[idx]), std::abs(fd), Scalar(1e-4)});
        CHECK(std::abs(grad[idx] - fd) / denom <= 1e-3);
        ++checked;
    }
    CHECK(checked >= 100);
}

TEST_CASE("train_predictor: learning rate zero leaves parameters bitwise unchanged") {
    RandomStream rng(47);
    PredictionDataset data;
    for (int i = 0; i < 8; ++i) data.push_back(cv_sample(rng, 10, 5));
    PredictorConfig cfg;
    PredictorTrainConfig train;
    train.epochs = 3;
    train.lr = 0;
    train.validation_fraction = 0;
    const TrainedPredictor out = train_predictor(data, cfg, train);
    const PredictorParams fresh = PredictorParams::init(cfg);
    CHECK(std::memcmp(out.params.store.values.data(), fresh.store.values.data(),
                      sizeof(Scalar) * static_cast<size_t>(fresh.store.values.size())) == 0);
}

TEST_CASE("train_predictor: deterministic for a fixed seed") {
    RandomStream rng(48);
    PredictionDataset data;
    for (int i = 0; i < 64; ++i) data.push_back(cv_sample(rng, 10, 5));
    PredictorConfig cfg;
    PredictorTrainConfig train;
    train.epochs = 3;
    const TrainedPredictor a = train_predictor(data, cfg, train);
    const TrainedPredictor b = train_predictor(data, cfg, train);
    CHECK(a.train_curve == b.train_curve);
    CHECK(a.params.store.values == b.params.store.values);
}

TEST_CASE("train_predictor: aborts on a poisoned dataset with finite parameters") {
    RandomStream rng(49);
    PredictionDataset data;
    for (int i = 0; i < 8; ++i) data.push_back(cv_sample(rng, 10, 5));
    data[3].future(2, 0) = std::numeric_limits<Scalar>::quiet_NaN();
    PredictorConfig cfg;
    PredictorTrainConfig train;
    train.epochs = 2;
    train.batch_size = 4;
    train.validation_fraction = 0;
    const TrainedPredictor out = train_predictor(data, cfg, train);
    CHECK(out.diverged);
    CHECK(out.params.store.finite());
}

TEST_CASE("train_predictor: overfits one sample to the bounded-sigma floor") {
    RandomStream rng(50);
    PredictionDataset data{cv_sample(rng, 10, 5)};
    PredictorConfig cfg;
    cfg.mixtures = 3;
    PredictorTrainConfig train;
    train.validation_fraction = 0;
    train.batch_size = 1;

    train.lr = 0.02;
    train.epochs = 2500;
    TrainedPredictor stage = train_predictor(data, cfg, train);
    train.lr = 0.002;
    train.epochs = 900;
    stage = train_predictor(data, cfg, train, &stage.params);
    train.lr = 3e-4;
    train.epochs = 500;
    stage = train_predictor(data, cfg, train, &stage.params);

    const MixtureForecast m = predict(stage.params, data[0].grid.to_grid(), data[0].window);
    const Scalar loss = nll_loss(m, data[0].future, data[0].future_valid);
    const Scalar floor = 5 * (std::log(2 * kPi) + 2 * kLogStdMin);
    CHECK(loss >= floor - 1e-9);
    CHECK(loss - floor <= 0.05);
}

TEST_CASE("train_predictor: loss decreases over epochs on the overfit dataset") {
    RandomStream rng(51);
    PredictionDataset data;
    for (int i = 0; i < 32; ++i) data.push_back(cv_sample(rng, 10, 5));
    PredictorConfig cfg;
    PredictorTrainConfig train;
    train.epochs = 30;
    train.validation_fraction = 0;
    const TrainedPredictor out = train_predictor(data, cfg, train);
    // Monotone under 5-epoch smoothing.
    std::vector<Scalar> smooth;
    for (size_t i = 0; i + 5 <= out.train_curve.size(); ++i) {
        Scalar s = 0;
        for (size_t j = i; j < i + 5; ++j) s += out.train_curve[j];
        smooth.push_back(s / 5);
    }
    for (size_t i = 1; i < smooth.size(); ++i) CHECK(smooth[i] <= smooth[i - 1] + 0.02);
    CHECK(smooth.back() < smooth.front());
}

TEST_CASE("trained toy predictor extrapolates constant velocity") {
    RandomStream rng(52);
    PredictionDataset train_data, test_data;
    for (int i = 0; i < 1200; ++i) train_data.push_back(cv_sample(rng, 10, 5));
    for (int i = 0; i < 50; ++i) test_data.push_back(cv_sample(rng, 10, 5));
    PredictorConfig cfg;
    PredictorTrainConfig train;
    train.epochs = 110;
    train.lr = 2e-3;
    TrainedPredictor out = train_predictor(train_data, cfg, train);
    train.epochs = 50;
    train.lr = 3e-4;
    out = train_predictor(train_data, cfg, train, &out.params);

    Scalar worst = 0;
    for (const auto& s : test_data) {
        const MixtureForecast m = predict(out.params, s.grid.to_grid(), s.window);
        for (int f = 0; f < 3; ++f) {
            const RelPos mean = m.mixture_mean(f);
            const Scalar err = std::hypot(mean.x - s.future(f, 0), mean.y - s.future(f, 1));
            worst = std::max(worst, err);
        }
    }
    CHECK(worst <= 0.25);
}

TEST_CASE("kf_predict: exact on a noiseless linear history") {
    TrajectoryWindow w = TrajectoryWindow::empty(3);
    w.samples << 0, 1, 0, 2, 0, 3;
    w.valid.setConstant(true);
    const MixtureForecast m = kf_predict(w, 5);
    CHECK(m.mean_x(0, 0) == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(m.mean_y(0, 0) == doctest::Approx(4.0).epsilon(1e-6));
    CHECK(m.mean_y(4, 0) == doctest::Approx(8.0).epsilon(1e-5));
    // Uncertainty grows with the horizon.
    for (int f = 1; f < 5; ++f) {
        CHECK(m.std_x(f, 0) > m.std_x(f - 1, 0));
        CHECK(m.std_y(f, 0) > m.std_y(f - 1, 0));
    }
}

TEST_CASE("kf_predict: stationary fallbacks") {
    TrajectoryWindow w = TrajectoryWindow::empty(6);
    const MixtureForecast none = kf_predict(w, 4);
    for (int f = 0; f < 4; ++f) {
        CHECK(none.mean_x(f, 0) == 0);
        CHECK(none.mean_y(f, 0) == 0);
        CHECK(none.std_x(f, 0) >= 1.0);
    }
    w.samples(2, 0) = 1.5;
    w.samples(2, 1) = 2.5;
    w.valid[2] = true;
    const MixtureForecast one = kf_predict(w, 4);
    for (int f = 0; f < 4; ++f) {
        CHECK(one.mean_x(f, 0) == doctest::Approx(1.5));
        CHECK(one.mean_y(f, 0) == doctest::Approx(2.5));
    }
}

TEST_CASE("kf_predict: agrees with batch least squares within covariance bounds") {
    RandomStream rng(53);
    for (int trial = 0; trial < 100; ++trial) {
        const int h = 10;
        TrajectoryWindow w = TrajectoryWindow::empty(h);
        const Vec2 p0{rng.uniform(-3, 3), rng.uniform(-3, 3)};
        const Vec2 v{rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4)};
        std::vector<std::pair<int, Vec2>> samples;
        for (int i = 0; i < h; ++i) {
            const Vec2 p = p0 + static_cast<Scalar>(i) * v +
                           Vec2(rng.normal(0, 0.05), rng.normal(0, 0.05));
            w.samples(i, 0) = p.x();
            w.samples(i, 1) = p.y();
            w.valid[i] = true;
            samples.push_back({i, p});
        }
        KfConfig cfg;
        cfg.meas_std = 0.05;
        const MixtureForecast m = kf_predict(w, 1, cfg);
        const Eigen::Vector4d fit = oracle::lsq_cv_fit(samples);
        const Scalar lsq_x = fit[0] + fit[2];
        const Scalar lsq_y = fit[1] + fit[3];
        CHECK(std::abs(m.mean_x(0, 0) - lsq_x) <= 3 * m.std_x(0, 0));
        CHECK(std::abs(m.mean_y(0, 0) - lsq_y) <= 3 * m.std_y(0, 0));
    }
}

TEST_CASE("kf_predict is rotation equivariant") {
    RandomStream rng(54);
    for (int trial = 0; trial < 50; ++trial) {
        const int h = 8;
        TrajectoryWindow w = TrajectoryWindow::empty(h);
        for (int i = 0; i < h; ++i) {
            w.samples(i, 0) = rng.uniform(-3, 3);
            w.samples(i, 1) = rng.uniform(-3, 3);
            w.valid[i] = rng.uniform() < 0.8;
        }
        TrajectoryWindow rot = w;
        for (int i = 0; i < h; ++i) {
            // Exact 90 degree rotation: (x, y) -> (y, -x).
            rot.samples(i, 0) = w.samples(i, 1);
            rot.samples(i, 1) = -w.samples(i, 0);
            if (!w.valid[i]) rot.samples.row(i).setZero();
        }
        const MixtureForecast a = kf_predict(w, 3);
        const MixtureForecast b = kf_predict(rot, 3);
        for (int f = 0; f < 3; ++f) {
            CHECK(b.mean_x(f, 0) == doctest::Approx(a.mean_y(f, 0)).epsilon(1e-9));
            CHECK(b.mean_y(f, 0) == doctest::Approx(-a.mean_x(f, 0)).epsilon(1e-9));
        }
    }
}

TEST_CASE("trajectory window advance keeps masked slots zero") {
    TrajectoryWindow w = TrajectoryWindow::empty(4);
    const TrackerMotion forward{{0, 0.4}, 0};
    w.advance(forward, RelPos{1, 2});
    w.advance(forward, std::nullopt);
    w.advance(forward, RelPos{0.5, 2.5});
    CHECK(w.valid[0] == false);
    CHECK(w.valid[1] == true);
    CHECK(w.valid[2] == false);
    CHECK(w.samples.row(2).norm() == 0);
    CHECK(w.valid[3] == true);
    // The first observation moved back by two forward steps of 0.4.
    CHECK(w.samples(1, 0) == doctest::Approx(1.0));
    CHECK(w.samples(1, 1) == doctest::Approx(2.0 - 0.8));
}
