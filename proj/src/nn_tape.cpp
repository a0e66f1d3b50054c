#include "rspt/nn/tape.hpp"

namespace rspt::nn {

Var Tape::add(Var a, Var b) {
    Mat out = v(a.id) + v(b.id);
    if (!any_grad(a, b)) return constant(std::move(out));
    return push(std::move(out), true, [a, b, id = size()](Tape& t) {
        const Mat& go = t.g(static_cast<int>(id));
        if (t.any_grad(a)) t.g(a.id) += go;
        if (t.any_grad(b)) t.g(b.id) += go;
    });
}

Var Tape::sub(Var a, Var b) {
    Mat out = v(a.id) - v(b.id);
    if (!any_grad(a, b)) return constant(std::move(out));
    return push(std::move(out), true, [a, b, id = size()](Tape& t) {
        const Mat& go = t.g(static_cast<int>(id));
        if (t.any_grad(a)) t.g(a.id) += go;
        if (t.any_grad(b)) t.g(b.id) -= go;
    });
}

Var Tape::mul(Var a, Var b) {
    Mat out = v(a.id).cwiseProduct(v(b.id));
    if (!any_grad(a, b)) return constant(std::move(out));
    return push(std::move(out), true, [a, b, id = size()](Tape& t) {
        const Mat& go = t.g(static_cast<int>(id));
        if (t.any_grad(a)) t.g(a.id) += go.cwiseProduct(t.v(b.id));
        if (t.any_grad(b)) t.g(b.id) += go.cwiseProduct(t.v(a.id));
    });
}

Var Tape::cdiv(Var a, Var b) {
    Mat out = v(a.id).cwiseQuotient(v(b.id));
    if (!any_grad(a, b)) return constant(std::move(out));
    return push(std::move(out), true, [a, b, id = size()](Tape& t) {
        const Mat& go = t.g(static_cast<int>(id));
        const Mat& y = t.v(static_cast<int>(id));
        if (t.any_grad(a)) t.g(a.id) += go.cwiseQuotient(t.v(b.id));
        if (t.any_grad(b)) t.g(b.id) -= go.cwiseProduct(y).cwiseQuotient(t.v(b.id));
    });
}

Var Tape::matmul(Var a, Var b) {
    Mat out = v(a.id) * v(b.id);
    if (!any_grad(a, b)) return constant(std::move(out));
    return push(std::move(out), true, [a, b, id = size()](Tape& t) {
        const Mat& go = t.g(static_cast<int>(id));
        if (t.any_grad(a)) t.g(a.id).noalias() += go * t.v(b.id).transpose();
        if (t.any_grad(b)) t.g(b.id).noalias() += t.v(a.id).transpose() * go;
    });
}

Var Tape::add_rowvec(Var a, Var r) {
    Mat out = v(a.id).rowwise() + v(r.id).row(0);
    if (!any_grad(a, r)) return constant(std::move(out));
    return push(std::move(out), true, [a, r, id = size()](Tape& t) {
        const Mat& go = t.g(static_cast<int>(id));
        if (t.any_grad(a)) t.g(a.id) += go;
        if (t.any_grad(r)) t.g(r.id) += go.colwise().sum();
    });
}

Var Tape::mul_colvec(Var a, Var c) {
    Mat out = v(a.id).array().colwise() * v(c.id).col(0).array();
    if (!any_grad(a, c)) return constant(std::move(out));
    return push(std::move(out), true, [a, c, id = size()](Tape& t) {
        const Mat& go = t.g(static_cast<int>(id));
        if (t.any_grad(a)) t.g(a.id).array() += go.array().colwise() * t.v(c.id).col(0).array();
        if (t.any_grad(c)) t.g(c.id) += go.cwiseProduct(t.v(a.id)).rowwise().sum();
    });
}

Var Tape::sub_colvec(Var a, Var c) {
    Mat out = v(a.id).array().colwise() - v(c.id).col(0).array();
    if (!any_grad(a, c)) return constant(std::move(out));
    return push(std::move(out), true, [a, c, id = size()](Tape& t) {
        const Mat& go = t.g(static_cast<int>(id));
        if (t.any_grad(a)) t.g(a.id) += go;
        if (t.any_grad(c)) t.g(c.id) -= go.rowwise().sum();
    });
}

Var Tape::scale(Var a, Scalar s) {
    Mat out = v(a.id) * s;
    if (!any_grad(a)) return constant(std::move(out));
    return push(std::move(out), true, [a, s, id = size()](Tape& t) {
        t.g(a.id) += t.g(static_cast<int>(id)) * s;
    });
}

Var Tape::add_scalar(Var a, Scalar s) {
    Mat out = v(a.id).array() + s;
    if (!any_grad(a)) return constant(std::move(out));
    return push(std::move(out), true, [a, id = size()](Tape& t) {
        t.g(a.id) += t.g(static_cast<int>(id));
    });
}

Var Tape::cmul_const(Var a, const Mat& c) {
    Mat out = v(a.id).cwiseProduct(c);
    if (!any_grad(a)) return constant(std::move(out));
    return push(std::move(out), true, [a, c, id = size()](Tape& t) {
        t.g(a.id) += t.g(static_cast<int>(id)).cwiseProduct(c);
    });
}

Var Tape::neg(Var a) { return scale(a, -1); }

Var Tape::tanh_(Var a) {
    Mat out = v(a.id).array().tanh();
    if (!any_grad(a)) return constant(std::move(out));
    return push(std::move(out), true, [a, id = size()](Tape& t) {
        const Mat& y = t.v(static_cast<int>(id));
        t.g(a.id).array() +=
            t.g(static_cast<int>(id)).array() * (1 - y.array().square());
    });
}

Var Tape::sigmoid_(Var a) {
    Mat out = (1 / (1 + (-v(a.id).array()).exp())).matrix();
    if (!any_grad(a)) return constant(std::move(out));
    return push(std::move(out), true, [a, id = size()](Tape& t) {
        const Mat& y = t.v(static_cast<int>(id));
        t.g(a.id).array() +=
            t.g(static_cast<int>(id)).array() * y.array() * (1 - y.array());
    });
}

Var Tape::exp_(Var a) {
    Mat out = v(a.id).array().exp();
    if (!any_grad(a)) return constant(std::move(out));
    return push(std::move(out), true, [a, id = size()](Tape& t) {
        t.g(a.id).array() +=
            t.g(static_cast<int>(id)).array() * t.v(static_cast<int>(id)).array();
    });
}

Var Tape::log_(Var a) {
    Mat out = v(a.id).array().log();
    if (!any_grad(a)) return constant(std::move(out));
    return push(std::move(out), true, [a, id = size()](Tape& t) {
        t.g(a.id).array() += t.g(static_cast<int>(id)).array() / t.v(a.id).array();
    });
}

Var Tape::sum_all(Var a) {
    Mat out(1, 1);
    out(0, 0) = v(a.id).sum();
    if (!any_grad(a)) return constant(std::move(out));
    return push(std::move(out), true, [a, id = size()](Tape& t) {
        t.g(a.id).array() += t.g(static_cast<int>(id))(0, 0);
    });
}

Var Tape::rowsum(Var a) {
    Mat out = v(a.id).rowwise().sum();
    if (!any_grad(a)) return constant(std::move(out));
    return push(std::move(out), true, [a, id = size()](Tape& t) {
        const Mat& go = t.g(static_cast<int>(id));
        t.g(a.id).array().colwise() += go.col(0).array();
    });
}

Var Tape::hcat(std::span<const Var> parts) {
    Eigen::Index rows = v(parts[0].id).rows(), cols = 0;
    bool needs = false;
    for (Var p : parts) {
        cols += v(p.id).cols();
        needs = needs || any_grad(p);
    }
    Mat out(rows, cols);
    Eigen::Index at = 0;
    for (Var p : parts) {
        out.middleCols(at, v(p.id).cols()) = v(p.id);
        at += v(p.id).cols();
    }
    if (!needs) return constant(std::move(out));
    std::vector<Var> ps(parts.begin(), parts.end());
    return push(std::move(out), true, [ps, id = size()](Tape& t) {
        const Mat& go = t.g(static_cast<int>(id));
        Eigen::Index at = 0;
        for (Var p : ps) {
            const Eigen::Index w = t.v(p.id).cols();
            if (t.any_grad(p)) t.g(p.id) += go.middleCols(at, w);
            at += w;
        }
    });
}

Var Tape::slice(Var a, int row0, int col0, int rows, int cols) {
    Mat out = v(a.id).block(row0, col0, rows, cols);
    if (!any_grad(a)) return constant(std::move(out));
    return push(std::move(out), true, [a, row0, col0, rows, cols, id = size()](Tape& t) {
        t.g(a.id).block(row0, col0, rows, cols) += t.g(static_cast<int>(id));
    });
}

Var Tape::gather_cols(Var a, std::vector<int> idx) {
    Mat out(v(a.id).rows(), static_cast<Eigen::Index>(idx.size()));
    for (size_t k = 0; k < idx.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = v(a.id).col(idx[k]);
    if (!any_grad(a)) return constant(std::move(out));
    return push(std::move(out), true, [a, idx = std::move(idx), id = size()](Tape& t) {
        const Mat& go = t.g(static_cast<int>(id));
        Mat& ga = t.g(a.id);
        for (size_t k = 0; k < idx.size(); ++k)
            ga.col(idx[k]) += go.col(static_cast<Eigen::Index>(k));
    });
}

Var Tape::softmax_rows(Var a) {
    const Mat& x = v(a.id);
    Mat out(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const Scalar m = x.row(i).maxCoeff();
        Eigen::ArrayXd e = (x.row(i).array() - m).exp();
        out.row(i) = (e / e.sum()).matrix();
    }
    if (!any_grad(a)) return constant(std::move(out));
    return push(std::move(out), true, [a, id = size()](Tape& t) {
        const Mat& y = t.v(static_cast<int>(id));
        const Mat& go = t.g(static_cast<int>(id));
        Mat& ga = t.g(a.id);
        for (Eigen::Index i = 0; i < y.rows(); ++i) {
            const Scalar dot = go.row(i).dot(y.row(i));
            ga.row(i).array() += y.row(i).array() * (go.row(i).array() - dot);
        }
    });
}

Var Tape::logsumexp_rows(Var a) {
    const Mat& x = v(a.id);
    Mat out(x.rows(), 1);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const Scalar m = x.row(i).maxCoeff();
        out(i, 0) = m + std::log((x.row(i).array() - m).exp().sum());
    }
    if (!any_grad(a)) return constant(std::move(out));
    return push(std::move(out), true, [a, id = size()](Tape& t) {
        const Mat& x = t.v(a.id);
        const Mat& lse = t.v(static_cast<int>(id));
        const Mat& go = t.g(static_cast<int>(id));
        Mat& ga = t.g(a.id);
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            ga.row(i).array() += go(i, 0) * (x.row(i).array() - lse(i, 0)).exp();
    });
}

void Tape::backward(Var loss) {
    auto& ln = nodes_[static_cast<size_t>(loss.id)];
    if (ln.val.rows() != 1 || ln.val.cols() != 1)
        throw Error("backward target must be a 1x1 node");
    g(loss.id)(0, 0) = 1;
    for (int i = loss.id; i >= 0; --i) {
        auto& n = nodes_[static_cast<size_t>(i)];
        if (n.needs_grad && n.back && n.grad.size() != 0) n.back(*this);
    }
}

}  // namespace rspt::nn
