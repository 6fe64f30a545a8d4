#pragma once

#include "arsp/tensor.hpp"
#include "arsp/util.hpp"

namespace arsp {

// Channel-then-spatial attention block. The channel gate squeezes with both
// global average and global max pooling through one shared two-layer MLP;
// the spatial gate convolves the stacked channel mean/max maps with a single
// odd same-padded kernel. Both gates are sigmoid-bounded and multiplicative.
struct CbamParams {
    Tensor mlp_w1, mlp_b1; // [C, C/r], [C/r]
    Tensor mlp_w2, mlp_b2; // [C/r, C], [C]
    Tensor spatial_weight; // [1, 2, k, k]
    Tensor spatial_bias;   // [1]
    int channels = 0;
    int reduction = 0;
    int spatial_kernel = 0;
};

CbamParams make_cbam_params(int channels, int reduction, int spatial_kernel, Rng& rng,
                            bool trainable);

// [N,C,H,W] -> gate [N,C,1,1], values in (0,1). C must be divisible by the
// reduction ratio.
Tensor channel_attention(const Tensor& x, const CbamParams& params);

// [N,C,H,W] -> gate [N,1,H,W]. Kernel must be odd (same padding).
Tensor spatial_attention(const Tensor& x, const CbamParams& params);

// y = spatial_gate(x') * x' with x' = channel_gate(x) * x. Shape preserved.
Tensor cbam(const Tensor& x, const CbamParams& params);

long long cbam_param_count(int channels, int reduction, int spatial_kernel);

} // namespace arsp
