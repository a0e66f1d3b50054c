#pragma once

#include <functional>
#include <span>
#include <vector>

#include "rspt/common.hpp"

namespace rspt::nn {

struct Var {
    int id = -1;
};

/// Reverse-mode autodiff over dense matrices. Build a forward expression,
/// call backward(loss) on a 1x1 node, then read gradients of leaves.
/// Row convention throughout: rows = batch samples, columns = features.
class Tape {
public:
    Var constant(Mat v) { return push(std::move(v), false, {}); }
    Var leaf(Mat v) { return push(std::move(v), true, {}); }

    const Mat& val(Var v) const { return nodes_[static_cast<size_t>(v.id)].val; }
    const Mat& grad(Var v) const { return nodes_[static_cast<size_t>(v.id)].grad; }

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);          // elementwise
    Var cdiv(Var a, Var b);         // elementwise a / b
    Var matmul(Var a, Var b);
    Var add_rowvec(Var a, Var r);   // broadcast a (n,m) + r (1,m)
    Var mul_colvec(Var a, Var c);   // broadcast a (n,m) * c (n,1)
    Var sub_colvec(Var a, Var c);   // broadcast a (n,m) - c (n,1)
    Var scale(Var a, Scalar s);
    Var add_scalar(Var a, Scalar s);
    Var cmul_const(Var a, const Mat& c);
    Var neg(Var a);
    Var tanh_(Var a);
    Var sigmoid_(Var a);
    Var exp_(Var a);
    Var log_(Var a);
    Var sum_all(Var a);             // -> 1x1
    Var rowsum(Var a);              // -> (n,1)
    Var hcat(std::span<const Var> parts);
    Var slice(Var a, int row0, int col0, int rows, int cols);
    Var gather_cols(Var a, std::vector<int> idx);
    Var softmax_rows(Var a);
    Var logsumexp_rows(Var a);      // -> (n,1)

    /// Accumulate d(loss)/d(node) for every node up to loss. loss must be 1x1.
    void backward(Var loss);

    void clear() { nodes_.clear(); }
    size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Mat val;
        Mat grad;
        std::function<void(Tape&)> back;
        bool needs_grad = false;
    };

    Var push(Mat v, bool needs_grad, std::function<void(Tape&)> back) {
        Node n;
        n.val = std::move(v);
        n.needs_grad = needs_grad;
        n.back = std::move(back);
        nodes_.push_back(std::move(n));
        return {static_cast<int>(nodes_.size()) - 1};
    }

    bool any_grad(Var a) const { return nodes_[static_cast<size_t>(a.id)].needs_grad; }
    bool any_grad(Var a, Var b) const { return any_grad(a) || any_grad(b); }

    Mat& g(int id) {
        auto& n = nodes_[static_cast<size_t>(id)];
        if (n.grad.size() == 0) n.grad = Mat::Zero(n.val.rows(), n.val.cols());
        return n.grad;
    }
    const Mat& v(int id) const { return nodes_[static_cast<size_t>(id)].val; }

    std::vector<Node> nodes_;
};

}  // namespace rspt::nn
