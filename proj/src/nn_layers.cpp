#include "rspt/nn/layers.hpp"

#include "rspt/mapping.hpp"

namespace rspt::nn {

void register_gru(ParamLayout& layout, const std::string& prefix, int in, int hidden) {
    for (const char* gate : {"z", "r", "n"}) {
        layout.add(prefix + ".w" + gate, in, hidden);
        layout.add(prefix + ".u" + gate, hidden, hidden);
        layout.add(prefix + ".b" + gate, 1, hidden, Init::zeros);
    }
}

Var gru_cell(Tape& t, Binder& bind, Var x, Var h, const std::string& prefix) {
    auto gate = [&](const char* name) {
        return t.add_rowvec(t.add(t.matmul(x, bind(prefix + ".w" + name)),
                                  t.matmul(h, bind(prefix + ".u" + name))),
                            bind(prefix + ".b" + name));
    };
    Var z = t.sigmoid_(gate("z"));
    Var r = t.sigmoid_(gate("r"));
    Var n = t.tanh_(t.add_rowvec(
        t.add(t.matmul(x, bind(prefix + ".wn")),
              t.mul(r, t.matmul(h, bind(prefix + ".un")))),
        bind(prefix + ".bn")));
    // h' = n + z * (h - n)
    return t.add(n, t.mul(z, t.sub(h, n)));
}

PatchConvPlan PatchConvPlan::make(int in_channels, int in_size, int kernel, int out_channels,
                                  Layout in_layout) {
    PatchConvPlan plan;
    plan.in_channels = in_channels;
    plan.in_size = in_size;
    plan.kernel = kernel;
    plan.out_channels = out_channels;
    plan.out_size = in_size / kernel;
    auto flat = [&](int ch, int row, int col) {
        if (in_layout == Layout::plane_major)
            return ch * in_size * in_size + row * in_size + col;
        return (row * in_size + col) * in_channels + ch;
    };
    for (int pr = 0; pr < plan.out_size; ++pr) {
        for (int pc = 0; pc < plan.out_size; ++pc) {
            std::vector<int> idx;
            idx.reserve(static_cast<size_t>(plan.patch_dim()));
            for (int kr = 0; kr < kernel; ++kr)
                for (int kc = 0; kc < kernel; ++kc)
                    for (int ch = 0; ch < in_channels; ++ch)
                        idx.push_back(flat(ch, pr * kernel + kr, pc * kernel + kc));
            plan.patch_indices.push_back(std::move(idx));
        }
    }
    return plan;
}

void register_patch_conv(ParamLayout& layout, const std::string& prefix,
                         const PatchConvPlan& plan) {
    layout.add(prefix + ".w", plan.patch_dim(), plan.out_channels);
    layout.add(prefix + ".b", 1, plan.out_channels, Init::zeros);
}

Var patch_conv(Tape& t, Binder& bind, Var x, const PatchConvPlan& plan,
               const std::string& prefix) {
    Var w = bind(prefix + ".w");
    Var b = bind(prefix + ".b");
    std::vector<Var> parts;
    parts.reserve(plan.patch_indices.size());
    for (const auto& idx : plan.patch_indices)
        parts.push_back(t.add_rowvec(t.matmul(t.gather_cols(x, idx), w), b));
    return t.hcat(parts);
}

namespace {

// 40x40x2 -> (2x2 stride 2) 20x20x6 -> (2x2 stride 2) 10x10x12 ->
// (5x5 stride 5) 2x2x16 -> affine. The fine first level keeps the cells
// around the tracker distinct instead of pooling 2.5 m blocks.
const PatchConvPlan& conv1_plan() {
    static const PatchConvPlan plan = PatchConvPlan::make(
        2, EgoGrid::kSize, 2, 6, PatchConvPlan::Layout::plane_major);
    return plan;
}

const PatchConvPlan& conv2_plan() {
    static const PatchConvPlan plan =
        PatchConvPlan::make(6, 20, 2, 12, PatchConvPlan::Layout::position_major);
    return plan;
}

const PatchConvPlan& conv3_plan() {
    static const PatchConvPlan plan =
        PatchConvPlan::make(12, 10, 5, 16, PatchConvPlan::Layout::position_major);
    return plan;
}

}  // namespace

void register_grid_encoder(ParamLayout& layout, const std::string& prefix, int embed) {
    register_patch_conv(layout, prefix + ".c1", conv1_plan());
    register_patch_conv(layout, prefix + ".c2", conv2_plan());
    register_patch_conv(layout, prefix + ".c3", conv3_plan());
    register_affine(layout, prefix + ".fc", conv3_plan().out_dim(), embed);
}

Var grid_encoder(Tape& t, Binder& bind, Var grid_input, const std::string& prefix) {
    Var h1 = t.tanh_(patch_conv(t, bind, grid_input, conv1_plan(), prefix + ".c1"));
    Var h2 = t.tanh_(patch_conv(t, bind, h1, conv2_plan(), prefix + ".c2"));
    Var h3 = t.tanh_(patch_conv(t, bind, h2, conv3_plan(), prefix + ".c3"));
    return t.tanh_(affine(t, bind, h3, prefix + ".fc"));
}

}  // namespace rspt::nn
