#include "arsp/losses.hpp"

#include <cmath>
#include <string>

#include "arsp/errors.hpp"
#include "arsp/ops.hpp"
#include "arsp/presets.hpp"

namespace arsp {

LossWeights LossWeights::defaults(Preset preset) {
    LossWeights w;
    // Standard five-scale weight set, renormalized to sum exactly to one.
    const std::vector<double> base{0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
    const size_t scales = preset == Preset::full ? 5 : 3;
    double sum = 0.0;
    for (size_t i = 0; i < scales; ++i) {
        sum += base[i];
    }
    for (size_t i = 0; i < scales; ++i) {
        w.scale_weights.push_back(base[i] / sum);
        w.scale_sigmas.push_back(1.5);
    }
    w.window = preset == Preset::full ? 11 : 7;
    return w;
}

void LossWeights::validate() const {
    if (!(alpha > 0.0) || !(alpha < 1.0)) {
        throw parameter_error("loss weights: alpha must lie in (0,1)");
    }
    if (lambda1 <= 0.0 || lambda2 <= 0.0 || lambda3 <= 0.0) {
        throw parameter_error("loss weights: lambdas must be positive");
    }
    if (scale_weights.empty() || scale_weights.size() != scale_sigmas.size()) {
        throw parameter_error("loss weights: scale weights and sigmas must align");
    }
    double sum = 0.0;
    for (double v : scale_weights) {
        if (v <= 0.0) {
            throw parameter_error("loss weights: scale weights must be positive");
        }
        sum += v;
    }
    if (std::fabs(sum - 1.0) > 1e-6) {
        throw parameter_error("loss weights: scale weights must sum to 1");
    }
    for (double s : scale_sigmas) {
        if (s <= 0.0) {
            throw parameter_error("loss weights: sigmas must be positive");
        }
    }
    if (window <= 0 || window % 2 == 0) {
        throw parameter_error("loss weights: window must be odd and positive");
    }
}

Tensor gaussian_kernel(int window, double sigma) {
    std::vector<double> k(static_cast<size_t>(window) * window);
    const double c = (window - 1) / 2.0;
    double sum = 0.0;
    for (int i = 0; i < window; ++i) {
        for (int j = 0; j < window; ++j) {
            const double dy = i - c, dx = j - c;
            const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            k[static_cast<size_t>(i) * window + j] = v;
            sum += v;
        }
    }
    for (double& v : k) {
        v /= sum;
    }
    return Tensor({1, 1, window, window}, std::move(k));
}

namespace {

constexpr double kC1 = 0.01 * 0.01; // (K1 * L)^2 with L = 1
constexpr double kC2 = 0.03 * 0.03;

Tensor promote(const Tensor& t, const char* op) {
    if (t.rank() == 3) {
        return reshape(t, {1, t.dim(0), t.dim(1), t.dim(2)});
    }
    if (t.rank() == 4) {
        return t;
    }
    throw dimension_error(std::string(op) + ": images must be [3,H,W] or [N,3,H,W]");
}

// Per-channel filter: collapse channels into the batch axis, run one
// single-channel conv, restore.
Tensor filter_per_channel(const Tensor& x, const Tensor& kernel, std::pair<int, int> padding) {
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    static thread_local Tensor zero_bias = Tensor::zeros({1});
    Tensor grouped = reshape(x, {N * C, 1, H, W});
    Tensor filtered = conv2d(grouped, kernel, zero_bias, {1, 1}, padding);
    return reshape(filtered, {N, C, filtered.dim(2), filtered.dim(3)});
}

struct ScaleStats {
    Tensor contrast; // scalar mean of the contrast-structure map
    Tensor ssim;     // scalar mean of the full l*cs map (coarsest scale)
};

ScaleStats ssim_scale(const Tensor& x, const Tensor& y, const Tensor& kernel) {
    Tensor mu_x = filter_per_channel(x, kernel, {0, 0});
    Tensor mu_y = filter_per_channel(y, kernel, {0, 0});
    Tensor xx = filter_per_channel(mul(x, x), kernel, {0, 0});
    Tensor yy = filter_per_channel(mul(y, y), kernel, {0, 0});
    Tensor xy = filter_per_channel(mul(x, y), kernel, {0, 0});

    Tensor var_x = sub(xx, mul(mu_x, mu_x));
    Tensor var_y = sub(yy, mul(mu_y, mu_y));
    Tensor cov = sub(xy, mul(mu_x, mu_y));

    Tensor l_num = add_scalar(mul_scalar(mul(mu_x, mu_y), 2.0), kC1);
    Tensor l_den = add_scalar(add(mul(mu_x, mu_x), mul(mu_y, mu_y)), kC1);
    Tensor cs_map = div(add_scalar(mul_scalar(cov, 2.0), kC2),
                        add_scalar(add(var_x, var_y), kC2));

    return {mean_all(cs_map), mean_all(mul(div(l_num, l_den), cs_map))};
}

} // namespace

Tensor ms_ssim(const Tensor& x_in, const Tensor& y_in, const LossWeights& w) {
    w.validate();
    Tensor x = promote(x_in, "ms_ssim");
    Tensor y = promote(y_in, "ms_ssim");
    if (x.shape() != y.shape()) {
        throw dimension_error("ms_ssim: image shapes must match");
    }
    const size_t scales = w.scale_weights.size();
    int min_dim = std::min(x.dim(2), x.dim(3));
    for (size_t j = 0; j + 1 < scales; ++j) {
        min_dim /= 2;
    }
    if (min_dim < w.window) {
        throw parameter_error("ms_ssim: image too small for " + std::to_string(scales) +
                              " scales with window " + std::to_string(w.window));
    }

    Tensor result;
    for (size_t j = 0; j < scales; ++j) {
        Tensor kernel = gaussian_kernel(w.window, w.scale_sigmas[j]);
        ScaleStats stats = ssim_scale(x, y, kernel);
        Tensor factor;
        if (j + 1 == scales) {
            // luminance enters at the coarsest scale only
            factor = pow_scalar(relu(stats.ssim), w.scale_weights[j]);
        } else {
            factor = pow_scalar(relu(stats.contrast), w.scale_weights[j]);
            x = avg_pool2d(x, {2, 2}, {2, 2});
            y = avg_pool2d(y, {2, 2}, {2, 2});
        }
        result = result.defined() ? mul(result, factor) : factor;
    }
    return result;
}

Tensor image_loss(const Tensor& x_in, const Tensor& y_in, const LossWeights& w) {
    Tensor x = promote(x_in, "image_loss");
    Tensor y = promote(y_in, "image_loss");
    if (x.shape() != y.shape()) {
        throw dimension_error("image_loss: image shapes must match");
    }
    Tensor ssim_term = add_scalar(mul_scalar(ms_ssim(x, y, w), -1.0), 1.0);
    const int pad = (w.window - 1) / 2;
    Tensor kernel = gaussian_kernel(w.window, w.scale_sigmas.front());
    Tensor weighted_l1 = mean_all(filter_per_channel(abs(sub(x, y)), kernel, {pad, pad}));
    return add(mul_scalar(ssim_term, w.alpha), mul_scalar(weighted_l1, 1.0 - w.alpha));
}

Tensor cosine_loss(const Tensor& a, const Tensor& b) {
    if (a.numel() != b.numel()) {
        throw dimension_error("cosine_loss: vector lengths differ");
    }
    Tensor a2 = sum_all(mul(a, a));
    Tensor b2 = sum_all(mul(b, b));
    if (a2.value() == 0.0 || b2.value() == 0.0) {
        throw input_error("cosine_loss: zero vector");
    }
    Tensor dot = sum_all(mul(a, b));
    Tensor denom = mul(pow_scalar(a2, 0.5), pow_scalar(b2, 0.5));
    return add_scalar(mul_scalar(div(dot, denom), -1.0), 1.0);
}

Tensor cosine_loss_rows(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || a.shape() != b.shape()) {
        throw dimension_error("cosine_loss_rows: inputs must be matching [N,D]");
    }
    Tensor a2 = sum_cols(mul(a, a));
    Tensor b2 = sum_cols(mul(b, b));
    for (size_t i = 0; i < a2.numel(); ++i) {
        if (a2.at(i) == 0.0 || b2.at(i) == 0.0) {
            throw input_error("cosine_loss_rows: zero vector at row " + std::to_string(i));
        }
    }
    Tensor dots = sum_cols(mul(a, b));
    Tensor denom = mul(pow_scalar(a2, 0.5), pow_scalar(b2, 0.5));
    Tensor cos_mean = mean_all(div(dots, denom));
    return add_scalar(mul_scalar(cos_mean, -1.0), 1.0);
}

FdLossParts fd_total_loss_parts(const Tensor& gen_in, const Tensor& orig_in,
                                const FaceEmbedder& embedder, const LossWeights& w) {
    if (embedder.net().params().empty() || !embedder.net().frozen()) {
        throw state_error("fd_total_loss: embedder must be frozen");
    }
    Tensor gen = promote(gen_in, "fd_total_loss");
    Tensor orig = promote(orig_in, "fd_total_loss").detach();
    FdLossParts parts;
    parts.image = image_loss(gen, orig, w);
    parts.cs = cosine_loss_rows(embedder.embed(gen), embedder.embed(orig));
    parts.total = add(parts.image, parts.cs);
    return parts;
}

Tensor fd_total_loss(const FaceImage& gen, const FaceImage& orig, const FaceEmbedder& embedder,
                     const LossWeights& w) {
    return fd_total_loss_parts(gen.pixels, orig.pixels, embedder, w).total;
}

TriLossParts se_tri_loss_parts(const Tensor& f_f, const Tensor& s_f,
                               const LinearLayer& decoder_fc1, const LinearLayer& embed_fc3,
                               const LossWeights& w) {
    if (decoder_fc1.weight.requires_grad() || embed_fc3.weight.requires_grad()) {
        throw state_error("se_tri_loss: tap layers must be frozen");
    }
    if (f_f.rank() != 1 || s_f.rank() != 1 || f_f.numel() != s_f.numel()) {
        throw dimension_error("se_tri_loss: features must be matching 1-d vectors");
    }
    Tensor target = f_f.detach();

    Tensor t2 = sum_all(mul(target, target));
    Tensor s2 = sum_all(mul(s_f, s_f));
    if (t2.value() == 0.0 || s2.value() == 0.0) {
        throw input_error("se_tri_loss: zero-norm feature");
    }
    Tensor target_hat = div(target, pow_scalar(t2, 0.5));
    Tensor s_hat = div(s_f, pow_scalar(s2, 0.5));
    Tensor diff = sub(target_hat, s_hat);

    const int d = static_cast<int>(s_f.numel());
    Tensor target_row = reshape(target, {1, d});
    Tensor s_row = reshape(s_f, {1, d});
    Tensor hidden_diff = sub(apply_linear(decoder_fc1, target_row),
                             apply_linear(decoder_fc1, s_row));
    Tensor id_target = apply_linear(embed_fc3, target_row);
    Tensor id_s = apply_linear(embed_fc3, s_row);

    TriLossParts parts;
    parts.unit_l2 = sum_all(mul(diff, diff));
    parts.hidden_l1 = sum_all(abs(hidden_diff));
    parts.id_cos = cosine_loss(reshape(id_target, {id_target.dim(1)}),
                               reshape(id_s, {id_s.dim(1)}));
    parts.total = add(add(mul_scalar(parts.unit_l2, w.lambda1),
                          mul_scalar(parts.hidden_l1, w.lambda2)),
                      mul_scalar(parts.id_cos, w.lambda3));
    return parts;
}

Tensor se_tri_loss(const Tensor& f_f, const Tensor& s_f, const LinearLayer& decoder_fc1,
                   const LinearLayer& embed_fc3, const LossWeights& w) {
    return se_tri_loss_parts(f_f, s_f, decoder_fc1, embed_fc3, w).total;
}

} // namespace arsp
