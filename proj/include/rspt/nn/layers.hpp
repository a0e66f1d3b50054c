#pragma once

#include "rspt/nn/params.hpp"

namespace rspt::nn {

inline void register_affine(ParamLayout& layout, const std::string& prefix, int in, int out) {
    layout.add(prefix + ".w", in, out);
    layout.add(prefix + ".b", 1, out, Init::zeros);
}

inline Var affine(Tape& tape, Binder& bind, Var x, const std::string& prefix) {
    return tape.add_rowvec(tape.matmul(x, bind(prefix + ".w")), bind(prefix + ".b"));
}

/// Gated recurrent cell (GRU). State update:
///   z = sig(x Wz + h Uz + bz), r = sig(x Wr + h Ur + br)
///   n = tanh(x Wn + r * (h Un) + bn), h' = (1 - z) * n + z * h
void register_gru(ParamLayout& layout, const std::string& prefix, int in, int hidden);
Var gru_cell(Tape& tape, Binder& bind, Var x, Var h, const std::string& prefix);

/// Strided local-filter layer: non-overlapping kernel x kernel patches share
/// one linear filter per output channel. Output layout is position-major
/// (row-major positions, channel minor).
struct PatchConvPlan {
    enum class Layout { plane_major, position_major };
    int in_channels, in_size, kernel, out_channels;
    int out_size = 0;
    std::vector<std::vector<int>> patch_indices;

    static PatchConvPlan make(int in_channels, int in_size, int kernel, int out_channels,
                              Layout in_layout);
    int patch_dim() const { return kernel * kernel * in_channels; }
    int out_dim() const { return out_size * out_size * out_channels; }
};

void register_patch_conv(ParamLayout& layout, const std::string& prefix,
                         const PatchConvPlan& plan);
Var patch_conv(Tape& tape, Binder& bind, Var x, const PatchConvPlan& plan,
               const std::string& prefix);

/// Grid encoder over the 40x40 two-plane ego-grid input: two local-filter
/// layers then an affine projection, tanh throughout.
void register_grid_encoder(ParamLayout& layout, const std::string& prefix, int embed);
Var grid_encoder(Tape& tape, Binder& bind, Var grid_input, const std::string& prefix);

}  // namespace rspt::nn
