#pragma once

#include <string>
#include <vector>

#include "rspt/nn/tape.hpp"

namespace rspt::nn {

enum class Init { zeros, xavier };

/// Named matrix blocks packed into one flat parameter vector (column-major
/// within each block). Flat storage keeps checkpointing, optimization and
/// finite-difference probing trivial.
struct ParamLayout {
    struct Block {
        std::string name;
        int rows = 0, cols = 0;
        int offset = 0;
        Init init = Init::xavier;
    };
    std::vector<Block> blocks;
    int total = 0;

    int add(const std::string& name, int rows, int cols, Init init = Init::xavier) {
        blocks.push_back({name, rows, cols, total, init});
        total += rows * cols;
        return static_cast<int>(blocks.size()) - 1;
    }

    const Block& find(const std::string& name) const {
        for (const auto& b : blocks)
            if (b.name == name) return b;
        throw Error("unknown parameter block: " + name);
    }
};

struct ParamStore {
    ParamLayout layout;
    Vec values;

    void init(RandomStream& rng) {
        values = Vec::Zero(layout.total);
        for (const auto& b : layout.blocks) {
            if (b.init == Init::zeros) continue;
            const Scalar s = std::sqrt(Scalar(6) / static_cast<Scalar>(b.rows + b.cols));
            for (int i = 0; i < b.rows * b.cols; ++i)
                values[b.offset + i] = rng.uniform(-s, s);
        }
    }

    Eigen::Map<const Mat> view(const std::string& name) const {
        const auto& b = layout.find(name);
        return {values.data() + b.offset, b.rows, b.cols};
    }

    bool finite() const { return values.allFinite(); }
};

/// Binds store blocks to tape leaves for one forward pass and scatters the
/// resulting leaf gradients back into a flat gradient vector.
class Binder {
public:
    Binder(Tape& tape, const ParamStore& store) : tape_(tape), store_(store) {}

    Var operator()(const std::string& name) {
        const auto& b = store_.layout.find(name);
        Var v = tape_.leaf(Eigen::Map<const Mat>(store_.values.data() + b.offset, b.rows, b.cols));
        bound_.push_back({b.offset, b.rows * b.cols, v});
        return v;
    }

    /// Accumulate leaf gradients into grad (sized like the parameter vector).
    void add_grads_to(Vec& grad) const {
        for (const auto& [offset, count, var] : bound_) {
            const Mat& g = tape_.grad(var);
            if (g.size() == 0) continue;
            grad.segment(offset, count) += Eigen::Map<const Vec>(g.data(), count);
        }
    }

private:
    struct Bound {
        int offset, count;
        Var var;
    };
    Tape& tape_;
    const ParamStore& store_;
    std::vector<Bound> bound_;
};

struct AdamConfig {
    Scalar lr = 1e-3;
    Scalar beta1 = 0.9;
    Scalar beta2 = 0.999;
    Scalar eps = 1e-8;
};

class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    void step(Vec& params, const Vec& grad, Scalar lr_scale = 1) {
        if (m_.size() != params.size()) {
            m_ = Vec::Zero(params.size());
            v_ = Vec::Zero(params.size());
        }
        ++t_;
        m_ = cfg_.beta1 * m_ + (1 - cfg_.beta1) * grad;
        v_ = cfg_.beta2 * v_ + (1 - cfg_.beta2) * grad.cwiseProduct(grad);
        const Scalar bias1 = 1 - std::pow(cfg_.beta1, static_cast<Scalar>(t_));
        const Scalar bias2 = 1 - std::pow(cfg_.beta2, static_cast<Scalar>(t_));
        const Scalar alpha = cfg_.lr * lr_scale / bias1;
        params.array() -=
            alpha * m_.array() / ((v_.array() / bias2).sqrt() + cfg_.eps);
    }

    const AdamConfig& config() const { return cfg_; }

private:
    AdamConfig cfg_;
    Vec m_, v_;
    int64_t t_ = 0;
};

}  // namespace rspt::nn
