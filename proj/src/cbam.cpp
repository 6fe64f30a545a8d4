#include "arsp/cbam.hpp"

#include <cmath>
#include <string>

#include "arsp/errors.hpp"
#include "arsp/ops.hpp"

namespace arsp {

namespace {

Tensor he_uniform(Rng& rng, std::vector<int> shape, int fan_in, bool trainable) {
    const double limit = std::sqrt(6.0 / fan_in);
    size_t n = shape_numel(shape);
    std::vector<double> d(n);
    for (double& v : d) {
        v = quantized(rng.uniform(-limit, limit));
    }
    return Tensor(std::move(shape), std::move(d), trainable);
}

void validate(const Tensor& x, const CbamParams& p, const char* op) {
    if (x.rank() != 4) {
        throw dimension_error(std::string(op) + ": input must be [N,C,H,W]");
    }
    if (x.dim(1) != p.channels) {
        throw dimension_error(std::string(op) + ": input channel axis is " +
                              std::to_string(x.dim(1)) + ", params expect " +
                              std::to_string(p.channels));
    }
}

} // namespace

CbamParams make_cbam_params(int channels, int reduction, int spatial_kernel, Rng& rng,
                            bool trainable) {
    if (reduction <= 0 || channels % reduction != 0) {
        throw parameter_error("cbam: reduction ratio must divide channel count");
    }
    if (spatial_kernel % 2 == 0 || spatial_kernel <= 0) {
        throw parameter_error("cbam: spatial kernel must be odd");
    }
    const int hidden = channels / reduction;
    CbamParams p;
    p.channels = channels;
    p.reduction = reduction;
    p.spatial_kernel = spatial_kernel;
    p.mlp_w1 = he_uniform(rng, {channels, hidden}, channels, trainable);
    p.mlp_b1 = Tensor::zeros({hidden}, trainable);
    p.mlp_w2 = he_uniform(rng, {hidden, channels}, hidden, trainable);
    p.mlp_b2 = Tensor::zeros({channels}, trainable);
    p.spatial_weight =
        he_uniform(rng, {1, 2, spatial_kernel, spatial_kernel},
                   2 * spatial_kernel * spatial_kernel, trainable);
    p.spatial_bias = Tensor::zeros({1}, trainable);
    return p;
}

Tensor channel_attention(const Tensor& x, const CbamParams& p) {
    validate(x, p, "channel_attention");
    const int N = x.dim(0), C = x.dim(1);
    auto squeeze = [&](const Tensor& pooled) {
        Tensor flat = reshape(pooled, {N, C});
        Tensor hidden = relu(fully_connected(flat, p.mlp_w1, p.mlp_b1));
        return fully_connected(hidden, p.mlp_w2, p.mlp_b2);
    };
    Tensor avg_branch = squeeze(avg_pool_global(x));
    Tensor max_branch = squeeze(max_pool_global(x));
    Tensor gate = sigmoid(add(avg_branch, max_branch));
    return reshape(gate, {N, C, 1, 1});
}

Tensor spatial_attention(const Tensor& x, const CbamParams& p) {
    validate(x, p, "spatial_attention");
    if (p.spatial_kernel % 2 == 0) {
        throw parameter_error("spatial_attention: kernel must be odd");
    }
    const int pad = (p.spatial_kernel - 1) / 2;
    Tensor stacked = concat_channel(channel_mean(x), channel_max(x));
    Tensor conv = conv2d(stacked, p.spatial_weight, p.spatial_bias, {1, 1}, {pad, pad});
    return sigmoid(conv);
}

Tensor cbam(const Tensor& x, const CbamParams& p) {
    Tensor channel_gated = mul(x, channel_attention(x, p));
    return mul(channel_gated, spatial_attention(channel_gated, p));
}

long long cbam_param_count(int channels, int reduction, int spatial_kernel) {
    const long long hidden = channels / reduction;
    long long n = 0;
    n += static_cast<long long>(channels) * hidden + hidden;  // mlp layer 1
    n += hidden * channels + channels;                        // mlp layer 2
    n += 2ll * spatial_kernel * spatial_kernel + 1;           // spatial conv
    return n;
}

} // namespace arsp
