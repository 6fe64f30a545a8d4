#include "arsp/network.hpp"

#include <algorithm>
#include <cmath>

#include "arsp/errors.hpp"
#include "arsp/ops.hpp"

namespace arsp {

std::string preset_name(Preset p) { return p == Preset::full ? "full" : "tiny"; }

Preset preset_from_name(const std::string& name) {
    if (name == "full") {
        return Preset::full;
    }
    if (name == "tiny") {
        return Preset::tiny;
    }
    throw input_error("unknown preset: " + name);
}

Tensor apply_linear(const LinearLayer& layer, const Tensor& x) {
    return fully_connected(x, layer.weight, layer.bias);
}

// ---------------------------------------------------------------------------
// symbolic trace
// ---------------------------------------------------------------------------

namespace {

std::string dims_str(const std::vector<int>& d) {
    std::string s = "(";
    for (size_t i = 0; i < d.size(); ++i) {
        s += std::to_string(d[i]);
        if (i + 1 < d.size()) {
            s += ",";
        }
    }
    return s + ")";
}

[[noreturn]] void trace_fail(const LayerDesc& layer, const std::string& why) {
    throw dimension_error("layer '" + layer.name + "': " + why);
}

std::vector<int> trace_layer(const LayerDesc& l, const std::vector<int>& in) {
    const bool spatial = in.size() == 3;
    switch (l.kind) {
        case LayerKind::conv: {
            if (!spatial) trace_fail(l, "conv applied to non-spatial dims " + dims_str(in));
            if (in[0] != l.in_channels)
                trace_fail(l, "expected " + std::to_string(l.in_channels) + " channels, got " +
                                  std::to_string(in[0]));
            const int h = in[1] + 2 * l.padding.first - l.kernel.first;
            const int w = in[2] + 2 * l.padding.second - l.kernel.second;
            if (h < 0)
                trace_fail(l, "kernel height " + std::to_string(l.kernel.first) +
                                  " exceeds padded input height " +
                                  std::to_string(in[1] + 2 * l.padding.first));
            if (w < 0)
                trace_fail(l, "kernel width " + std::to_string(l.kernel.second) +
                                  " exceeds padded input width " +
                                  std::to_string(in[2] + 2 * l.padding.second));
            return {l.out_channels, h / l.stride.first + 1, w / l.stride.second + 1};
        }
        case LayerKind::conv_transpose: {
            if (!spatial) trace_fail(l, "conv_transpose applied to non-spatial dims");
            if (in[0] != l.in_channels)
                trace_fail(l, "expected " + std::to_string(l.in_channels) + " channels, got " +
                                  std::to_string(in[0]));
            const int h = conv_transpose_out_dim(in[1], l.kernel.first, l.stride.first,
                                                 l.padding.first, l.out_padding.first);
            const int w = conv_transpose_out_dim(in[2], l.kernel.second, l.stride.second,
                                                 l.padding.second, l.out_padding.second);
            if (h <= 0 || w <= 0) trace_fail(l, "non-positive output extent");
            return {l.out_channels, h, w};
        }
        case LayerKind::max_pool: {
            if (!spatial) trace_fail(l, "pool applied to non-spatial dims");
            if (l.kernel.first > in[1])
                trace_fail(l, "kernel height " + std::to_string(l.kernel.first) +
                                  " exceeds input height " + std::to_string(in[1]));
            if (l.kernel.second > in[2])
                trace_fail(l, "kernel width " + std::to_string(l.kernel.second) +
                                  " exceeds input width " + std::to_string(in[2]));
            return {in[0], (in[1] - l.kernel.first) / l.stride.first + 1,
                    (in[2] - l.kernel.second) / l.stride.second + 1};
        }
        case LayerKind::avg_pool_global: {
            if (!spatial) trace_fail(l, "pool applied to non-spatial dims");
            return {in[0], 1, 1};
        }
        case LayerKind::flatten: {
            if (!spatial) trace_fail(l, "flatten applied to non-spatial dims");
            return {in[0] * in[1] * in[2]};
        }
        case LayerKind::linear: {
            if (spatial) trace_fail(l, "linear applied to spatial dims " + dims_str(in));
            if (in[0] != l.in_features)
                trace_fail(l, "expected " + std::to_string(l.in_features) + " features, got " +
                                  std::to_string(in[0]));
            return {l.out_features};
        }
        case LayerKind::reshape: {
            const long long n = spatial ? 1ll * in[0] * in[1] * in[2] : in[0];
            const long long m =
                1ll * l.target_chw[0] * l.target_chw[1] * l.target_chw[2];
            if (n != m)
                trace_fail(l, "cannot reshape " + std::to_string(n) + " elements into " +
                                  std::to_string(m));
            return {l.target_chw[0], l.target_chw[1], l.target_chw[2]};
        }
        case LayerKind::cbam: {
            if (!spatial) trace_fail(l, "cbam applied to non-spatial dims");
            if (l.reduction <= 0 || in[0] % l.reduction != 0)
                trace_fail(l, "reduction ratio does not divide channel count");
            return in;
        }
    }
    trace_fail(l, "unknown layer kind");
}

} // namespace

std::vector<std::vector<int>> shape_trace(const NetworkSpec& spec,
                                          const std::vector<int>& input_dims) {
    std::vector<std::vector<int>> rows;
    rows.reserve(spec.layers.size());
    std::vector<int> cur = input_dims;
    for (const LayerDesc& l : spec.layers) {
        cur = trace_layer(l, cur);
        rows.push_back(cur);
    }
    return rows;
}

long long param_count(const NetworkSpec& spec) {
    long long n = 0;
    for (const LayerDesc& l : spec.layers) {
        switch (l.kind) {
            case LayerKind::conv:
            case LayerKind::conv_transpose:
                n += 1ll * l.in_channels * l.out_channels * l.kernel.first * l.kernel.second +
                     l.out_channels;
                break;
            case LayerKind::linear:
                n += 1ll * l.in_features * l.out_features + l.out_features;
                break;
            case LayerKind::cbam:
                n += cbam_param_count(l.in_channels, l.reduction, l.spatial_kernel);
                break;
            default:
                break;
        }
    }
    return n;
}

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

namespace {

Tensor init_he_uniform(Rng& rng, std::vector<int> shape, int fan_in, bool trainable) {
    const double limit = std::sqrt(6.0 / fan_in);
    size_t n = shape_numel(shape);
    std::vector<double> d(n);
    for (double& v : d) {
        v = quantized(rng.uniform(-limit, limit));
    }
    return Tensor(std::move(shape), std::move(d), trainable);
}

Tensor apply_act(Act act, const Tensor& x) {
    switch (act) {
        case Act::relu:
            return relu(x);
        case Act::sigmoid:
            return sigmoid(x);
        case Act::none:
            return x;
    }
    return x;
}

} // namespace

Network::Network(NetworkSpec spec, uint64_t seed, bool trainable) : spec_(std::move(spec)) {
    Rng rng(seed);
    for (const LayerDesc& l : spec_.layers) {
        layer_param_offset_.push_back(params_.size());
        switch (l.kind) {
            case LayerKind::conv: {
                const int fan_in = l.in_channels * l.kernel.first * l.kernel.second;
                params_.push_back({l.name + ".weight",
                                   init_he_uniform(rng,
                                                   {l.out_channels, l.in_channels,
                                                    l.kernel.first, l.kernel.second},
                                                   fan_in, trainable),
                                   false});
                params_.push_back({l.name + ".bias", Tensor::zeros({l.out_channels}, trainable),
                                   false});
                break;
            }
            case LayerKind::conv_transpose: {
                // Striding spreads the kernel taps over s*s output cells, so
                // each output sees roughly k*k/(s*s) contributions per input
                // channel.
                const int fan_in =
                    std::max(1, l.in_channels * l.kernel.first * l.kernel.second /
                                    (l.stride.first * l.stride.second));
                params_.push_back({l.name + ".weight",
                                   init_he_uniform(rng,
                                                   {l.in_channels, l.out_channels,
                                                    l.kernel.first, l.kernel.second},
                                                   fan_in, trainable),
                                   false});
                params_.push_back({l.name + ".bias", Tensor::zeros({l.out_channels}, trainable),
                                   false});
                break;
            }
            case LayerKind::linear: {
                params_.push_back({l.name + ".weight",
                                   init_he_uniform(rng, {l.in_features, l.out_features},
                                                   l.in_features, trainable),
                                   false});
                params_.push_back({l.name + ".bias", Tensor::zeros({l.out_features}, trainable),
                                   false});
                break;
            }
            case LayerKind::cbam: {
                CbamParams p =
                    make_cbam_params(l.in_channels, l.reduction, l.spatial_kernel, rng, trainable);
                params_.push_back({l.name + ".mlp1.weight", p.mlp_w1, false});
                params_.push_back({l.name + ".mlp1.bias", p.mlp_b1, false});
                params_.push_back({l.name + ".mlp2.weight", p.mlp_w2, false});
                params_.push_back({l.name + ".mlp2.bias", p.mlp_b2, false});
                params_.push_back({l.name + ".spatial.weight", p.spatial_weight, false});
                params_.push_back({l.name + ".spatial.bias", p.spatial_bias, false});
                break;
            }
            default:
                break;
        }
    }
    if (!trainable) {
        set_frozen(true);
    }
}

Param& Network::param(const std::string& name) {
    for (Param& p : params_) {
        if (p.name == name) {
            return p;
        }
    }
    throw state_error("network '" + spec_.tag + "' has no parameter named '" + name + "'");
}

const Param& Network::param(const std::string& name) const {
    return const_cast<Network*>(this)->param(name);
}

LinearLayer Network::linear_layer(const std::string& layer_name) const {
    return {param(layer_name + ".weight").value, param(layer_name + ".bias").value};
}

void Network::set_frozen(bool frozen) {
    frozen_ = frozen;
    for (Param& p : params_) {
        p.frozen = frozen;
        p.value.set_requires_grad(!frozen);
    }
}

uint64_t Network::params_hash() const {
    uint64_t h = 1469598103934665603ull;
    for (const Param& p : params_) {
        h = fnv1a64(p.name.data(), p.name.size(), h);
        h = fnv1a64(p.value.data().data(), p.value.numel() * sizeof(double), h);
    }
    return h;
}

CbamParams Network::cbam_view(size_t layer_index) const {
    const LayerDesc& l = spec_.layers[layer_index];
    const size_t o = layer_param_offset_[layer_index];
    CbamParams p;
    p.channels = l.in_channels;
    p.reduction = l.reduction;
    p.spatial_kernel = l.spatial_kernel;
    p.mlp_w1 = params_[o + 0].value;
    p.mlp_b1 = params_[o + 1].value;
    p.mlp_w2 = params_[o + 2].value;
    p.mlp_b2 = params_[o + 3].value;
    p.spatial_weight = params_[o + 4].value;
    p.spatial_bias = params_[o + 5].value;
    return p;
}

Tensor Network::forward(const Tensor& x) const {
    Tensor cur = x;
    for (size_t i = 0; i < spec_.layers.size(); ++i) {
        const LayerDesc& l = spec_.layers[i];
        const size_t o = layer_param_offset_[i];
        switch (l.kind) {
            case LayerKind::conv:
                cur = conv2d(cur, params_[o].value, params_[o + 1].value, l.stride, l.padding);
                break;
            case LayerKind::conv_transpose:
                cur = conv_transpose2d(cur, params_[o].value, params_[o + 1].value, l.stride,
                                       l.padding, l.out_padding);
                break;
            case LayerKind::max_pool:
                cur = max_pool2d(cur, l.kernel, l.stride);
                break;
            case LayerKind::avg_pool_global:
                cur = avg_pool_global(cur);
                break;
            case LayerKind::flatten:
                cur = reshape(cur, {cur.dim(0), cur.dim(1) * cur.dim(2) * cur.dim(3)});
                break;
            case LayerKind::linear:
                cur = fully_connected(cur, params_[o].value, params_[o + 1].value);
                break;
            case LayerKind::reshape:
                cur = reshape(cur, {cur.dim(0), l.target_chw[0], l.target_chw[1],
                                    l.target_chw[2]});
                break;
            case LayerKind::cbam:
                cur = cbam(cur, cbam_view(i));
                break;
        }
        cur = apply_act(l.act, cur);
    }
    return cur;
}

} // namespace arsp
