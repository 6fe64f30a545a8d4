#include "arsp/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "arsp/errors.hpp"

namespace arsp {

namespace {

using Impl = std::shared_ptr<TensorImpl>;

bool recording(std::initializer_list<const Tensor*> inputs) {
    if (!grad_enabled()) {
        return false;
    }
    for (const Tensor* t : inputs) {
        if (t->requires_grad()) {
            return true;
        }
    }
    return false;
}

Tensor finish(std::vector<int> shape, std::vector<double> data, const char* op) {
    quantize_inplace(data);
    Tensor out(std::move(shape), std::move(data));
    check_finite(*out.impl(), op);
    return out;
}

void require_rank(const Tensor& t, int rank, const char* op, const char* role) {
    if (!t.defined() || t.rank() != rank) {
        throw dimension_error(std::string(op) + ": " + role + " must have rank " +
                              std::to_string(rank));
    }
}

// Upstream grad of `out`, or nullptr when nothing flowed into this node.
const std::vector<double>* upstream(const Impl& out) {
    if (out->grad.empty()) {
        return nullptr;
    }
    return &out->grad;
}

} // namespace

int conv_out_dim(int in, int k, int s, int p) { return (in + 2 * p - k) / s + 1; }

int conv_transpose_out_dim(int in, int k, int s, int p, int op) {
    return (in - 1) * s - 2 * p + k + op;
}

// ---------------------------------------------------------------------------
// conv2d
// ---------------------------------------------------------------------------

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, Dim2 stride,
              Dim2 padding) {
    require_rank(input, 4, "conv2d", "input");
    require_rank(weight, 4, "conv2d", "weight");
    require_rank(bias, 1, "conv2d", "bias");
    const int N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    const int K = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
    const auto [sh, sw] = stride;
    const auto [ph, pw] = padding;
    if (weight.dim(1) != C) {
        throw dimension_error("conv2d: weight channel axis is " + std::to_string(weight.dim(1)) +
                              ", input channel axis is " + std::to_string(C));
    }
    if (bias.dim(0) != K) {
        throw dimension_error("conv2d: bias axis is " + std::to_string(bias.dim(0)) +
                              ", weight output axis is " + std::to_string(K));
    }
    if (sh <= 0 || sw <= 0) {
        throw parameter_error("conv2d: stride must be positive");
    }
    if (ph < 0 || pw < 0) {
        throw parameter_error("conv2d: padding must be non-negative");
    }
    if (kh > H + 2 * ph) {
        throw dimension_error("conv2d: kernel height " + std::to_string(kh) +
                              " exceeds padded input height " + std::to_string(H + 2 * ph));
    }
    if (kw > W + 2 * pw) {
        throw dimension_error("conv2d: kernel width " + std::to_string(kw) +
                              " exceeds padded input width " + std::to_string(W + 2 * pw));
    }
    const int Ho = conv_out_dim(H, kh, sh, ph);
    const int Wo = conv_out_dim(W, kw, sw, pw);

    const double* x = input.data().data();
    const double* w = weight.data().data();
    const double* b = bias.data().data();
    std::vector<double> out(static_cast<size_t>(N) * K * Ho * Wo);

    for (int n = 0; n < N; ++n) {
        for (int k = 0; k < K; ++k) {
            double* op = out.data() + (static_cast<size_t>(n) * K + k) * Ho * Wo;
            for (int oh = 0; oh < Ho; ++oh) {
                for (int ow = 0; ow < Wo; ++ow) {
                    double acc = b[k];
                    for (int c = 0; c < C; ++c) {
                        const double* xc = x + (static_cast<size_t>(n) * C + c) * H * W;
                        const double* wc = w + ((static_cast<size_t>(k) * C + c) * kh) * kw;
                        for (int i = 0; i < kh; ++i) {
                            const int ih = oh * sh + i - ph;
                            if (ih < 0 || ih >= H) {
                                continue;
                            }
                            const double* xrow = xc + static_cast<size_t>(ih) * W;
                            const double* wrow = wc + static_cast<size_t>(i) * kw;
                            for (int j = 0; j < kw; ++j) {
                                const int iw = ow * sw + j - pw;
                                if (iw < 0 || iw >= W) {
                                    continue;
                                }
                                acc += xrow[iw] * wrow[j];
                            }
                        }
                    }
                    op[static_cast<size_t>(oh) * Wo + ow] = acc;
                }
            }
        }
    }

    Tensor result = finish({N, K, Ho, Wo}, std::move(out), "conv2d");
    if (recording({&input, &weight, &bias})) {
        result.set_requires_grad(true);
        Impl xi = input.impl(), wi = weight.impl(), bi = bias.impl(), oi = result.impl();
        GradTape::active().record([xi, wi, bi, oi, N, C, H, W, K, kh, kw, sh, sw, ph, pw, Ho,
                                   Wo] {
            const std::vector<double>* gp = upstream(oi);
            if (!gp) {
                return;
            }
            const double* g = gp->data();
            const bool need_x = xi->requires_grad;
            const bool need_w = wi->requires_grad;
            const bool need_b = bi->requires_grad;
            if (need_x) ensure_grad(*xi);
            if (need_w) ensure_grad(*wi);
            if (need_b) ensure_grad(*bi);
            for (int n = 0; n < N; ++n) {
                for (int k = 0; k < K; ++k) {
                    const double* gk = g + (static_cast<size_t>(n) * K + k) * Ho * Wo;
                    for (int oh = 0; oh < Ho; ++oh) {
                        for (int ow = 0; ow < Wo; ++ow) {
                            const double gv = gk[static_cast<size_t>(oh) * Wo + ow];
                            if (gv == 0.0) {
                                continue;
                            }
                            if (need_b) {
                                bi->grad[static_cast<size_t>(k)] += gv;
                            }
                            for (int c = 0; c < C; ++c) {
                                const size_t xoff = (static_cast<size_t>(n) * C + c) * H * W;
                                const size_t woff = (static_cast<size_t>(k) * C + c) * kh * kw;
                                for (int i = 0; i < kh; ++i) {
                                    const int ih = oh * sh + i - ph;
                                    if (ih < 0 || ih >= H) {
                                        continue;
                                    }
                                    for (int j = 0; j < kw; ++j) {
                                        const int iw = ow * sw + j - pw;
                                        if (iw < 0 || iw >= W) {
                                            continue;
                                        }
                                        const size_t xidx = xoff + static_cast<size_t>(ih) * W + iw;
                                        const size_t widx = woff + static_cast<size_t>(i) * kw + j;
                                        if (need_w) {
                                            wi->grad[widx] += gv * xi->data[xidx];
                                        }
                                        if (need_x) {
                                            xi->grad[xidx] += gv * wi->data[widx];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        });
    }
    return result;
}

// ---------------------------------------------------------------------------
// conv_transpose2d
// ---------------------------------------------------------------------------

Tensor conv_transpose2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
                        Dim2 stride, Dim2 padding, Dim2 output_padding) {
    require_rank(input, 4, "conv_transpose2d", "input");
    require_rank(weight, 4, "conv_transpose2d", "weight");
    require_rank(bias, 1, "conv_transpose2d", "bias");
    const int N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    const int K = weight.dim(1), kh = weight.dim(2), kw = weight.dim(3);
    const auto [sh, sw] = stride;
    const auto [ph, pw] = padding;
    const auto [oph, opw] = output_padding;
    if (weight.dim(0) != C) {
        throw dimension_error("conv_transpose2d: weight input axis is " +
                              std::to_string(weight.dim(0)) + ", input channel axis is " +
                              std::to_string(C));
    }
    if (bias.dim(0) != K) {
        throw dimension_error("conv_transpose2d: bias axis is " + std::to_string(bias.dim(0)) +
                              ", weight output axis is " + std::to_string(K));
    }
    if (sh <= 0 || sw <= 0) {
        throw parameter_error("conv_transpose2d: stride must be positive");
    }
    if (oph >= sh || opw >= sw) {
        throw parameter_error("conv_transpose2d: output_padding must be < stride per axis");
    }
    const int Ho = conv_transpose_out_dim(H, kh, sh, ph, oph);
    const int Wo = conv_transpose_out_dim(W, kw, sw, pw, opw);
    if (Ho <= 0 || Wo <= 0) {
        throw dimension_error("conv_transpose2d: non-positive output extent");
    }

    const double* x = input.data().data();
    const double* w = weight.data().data();
    const double* b = bias.data().data();
    std::vector<double> out(static_cast<size_t>(N) * K * Ho * Wo);

    // Gather form: out[oh,ow] sums x[h,w]*wt[i,j] where oh = h*sh - ph + i.
    for (int n = 0; n < N; ++n) {
        for (int k = 0; k < K; ++k) {
            double* op = out.data() + (static_cast<size_t>(n) * K + k) * Ho * Wo;
            for (int oh = 0; oh < Ho; ++oh) {
                for (int ow = 0; ow < Wo; ++ow) {
                    double acc = b[k];
                    for (int i = 0; i < kh; ++i) {
                        const int hn = oh + ph - i;
                        if (hn < 0 || hn % sh != 0) {
                            continue;
                        }
                        const int h = hn / sh;
                        if (h >= H) {
                            continue;
                        }
                        for (int j = 0; j < kw; ++j) {
                            const int wn = ow + pw - j;
                            if (wn < 0 || wn % sw != 0) {
                                continue;
                            }
                            const int wsrc = wn / sw;
                            if (wsrc >= W) {
                                continue;
                            }
                            for (int c = 0; c < C; ++c) {
                                const double xv =
                                    x[((static_cast<size_t>(n) * C + c) * H + h) * W + wsrc];
                                const double wv =
                                    w[((static_cast<size_t>(c) * K + k) * kh + i) * kw + j];
                                acc += xv * wv;
                            }
                        }
                    }
                    op[static_cast<size_t>(oh) * Wo + ow] = acc;
                }
            }
        }
    }

    Tensor result = finish({N, K, Ho, Wo}, std::move(out), "conv_transpose2d");
    if (recording({&input, &weight, &bias})) {
        result.set_requires_grad(true);
        Impl xi = input.impl(), wi = weight.impl(), bi = bias.impl(), oi = result.impl();
        GradTape::active().record([xi, wi, bi, oi, N, C, H, W, K, kh, kw, sh, sw, ph, pw, Ho,
                                   Wo] {
            const std::vector<double>* gp = upstream(oi);
            if (!gp) {
                return;
            }
            const double* g = gp->data();
            const bool need_x = xi->requires_grad;
            const bool need_w = wi->requires_grad;
            const bool need_b = bi->requires_grad;
            if (need_x) ensure_grad(*xi);
            if (need_w) ensure_grad(*wi);
            if (need_b) ensure_grad(*bi);
            // Scatter form over input positions: x[h,w] contributed to
            // out[h*sh - ph + i, w*sw - pw + j].
            for (int n = 0; n < N; ++n) {
                for (int k = 0; k < K; ++k) {
                    const double* gk = g + (static_cast<size_t>(n) * K + k) * Ho * Wo;
                    if (need_b) {
                        double acc = 0.0;
                        for (size_t t = 0; t < static_cast<size_t>(Ho) * Wo; ++t) {
                            acc += gk[t];
                        }
                        bi->grad[static_cast<size_t>(k)] += acc;
                    }
                    for (int c = 0; c < C; ++c) {
                        for (int h = 0; h < H; ++h) {
                            for (int wsrc = 0; wsrc < W; ++wsrc) {
                                const size_t xidx =
                                    ((static_cast<size_t>(n) * C + c) * H + h) * W + wsrc;
                                const double xv = xi->data[xidx];
                                double xacc = 0.0;
                                for (int i = 0; i < kh; ++i) {
                                    const int oh = h * sh - ph + i;
                                    if (oh < 0 || oh >= Ho) {
                                        continue;
                                    }
                                    for (int j = 0; j < kw; ++j) {
                                        const int ow = wsrc * sw - pw + j;
                                        if (ow < 0 || ow >= Wo) {
                                            continue;
                                        }
                                        const double gv = gk[static_cast<size_t>(oh) * Wo + ow];
                                        if (gv == 0.0) {
                                            continue;
                                        }
                                        const size_t widx =
                                            ((static_cast<size_t>(c) * K + k) * kh + i) * kw + j;
                                        if (need_w) {
                                            wi->grad[widx] += gv * xv;
                                        }
                                        if (need_x) {
                                            xacc += gv * wi->data[widx];
                                        }
                                    }
                                }
                                if (need_x) {
                                    xi->grad[xidx] += xacc;
                                }
                            }
                        }
                    }
                }
            }
        });
    }
    return result;
}

// ---------------------------------------------------------------------------
// pooling
// ---------------------------------------------------------------------------

Tensor max_pool2d(const Tensor& input, Dim2 kernel, Dim2 stride) {
    require_rank(input, 4, "max_pool2d", "input");
    const int N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    const auto [kh, kw] = kernel;
    const auto [sh, sw] = stride;
    if (kh <= 0 || kw <= 0 || sh <= 0 || sw <= 0) {
        throw parameter_error("max_pool2d: kernel and stride must be positive");
    }
    if (kh > H) {
        throw dimension_error("max_pool2d: kernel height " + std::to_string(kh) +
                              " exceeds input height " + std::to_string(H));
    }
    if (kw > W) {
        throw dimension_error("max_pool2d: kernel width " + std::to_string(kw) +
                              " exceeds input width " + std::to_string(W));
    }
    const int Ho = (H - kh) / sh + 1;
    const int Wo = (W - kw) / sw + 1;

    const double* x = input.data().data();
    std::vector<double> out(static_cast<size_t>(N) * C * Ho * Wo);
    std::vector<size_t> argmax(out.size());

    size_t t = 0;
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            const double* xc = x + (static_cast<size_t>(n) * C + c) * H * W;
            const size_t plane = (static_cast<size_t>(n) * C + c) * H * W;
            for (int oh = 0; oh < Ho; ++oh) {
                for (int ow = 0; ow < Wo; ++ow, ++t) {
                    double best = -1.0 / 0.0;
                    size_t best_idx = 0;
                    for (int i = 0; i < kh; ++i) {
                        const size_t row = static_cast<size_t>(oh * sh + i) * W;
                        for (int j = 0; j < kw; ++j) {
                            const size_t idx = row + static_cast<size_t>(ow * sw + j);
                            // strict > keeps the lowest linear index on ties
                            if (xc[idx] > best) {
                                best = xc[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    out[t] = best;
                    argmax[t] = plane + best_idx;
                }
            }
        }
    }

    Tensor result = finish({N, C, Ho, Wo}, std::move(out), "max_pool2d");
    if (recording({&input})) {
        result.set_requires_grad(true);
        Impl xi = input.impl(), oi = result.impl();
        GradTape::active().record([xi, oi, argmax = std::move(argmax)] {
            const std::vector<double>* gp = upstream(oi);
            if (!gp || !xi->requires_grad) {
                return;
            }
            ensure_grad(*xi);
            for (size_t t2 = 0; t2 < argmax.size(); ++t2) {
                xi->grad[argmax[t2]] += (*gp)[t2];
            }
        });
    }
    return result;
}

Tensor avg_pool2d(const Tensor& input, Dim2 kernel, Dim2 stride) {
    require_rank(input, 4, "avg_pool2d", "input");
    const int N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    const auto [kh, kw] = kernel;
    const auto [sh, sw] = stride;
    if (kh <= 0 || kw <= 0 || sh <= 0 || sw <= 0) {
        throw parameter_error("avg_pool2d: kernel and stride must be positive");
    }
    if (kh > H || kw > W) {
        throw dimension_error("avg_pool2d: kernel exceeds input extent");
    }
    const int Ho = (H - kh) / sh + 1;
    const int Wo = (W - kw) / sw + 1;
    const double inv = 1.0 / (static_cast<double>(kh) * kw);

    const double* x = input.data().data();
    std::vector<double> out(static_cast<size_t>(N) * C * Ho * Wo);
    size_t t = 0;
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            const double* xc = x + (static_cast<size_t>(n) * C + c) * H * W;
            for (int oh = 0; oh < Ho; ++oh) {
                for (int ow = 0; ow < Wo; ++ow, ++t) {
                    double acc = 0.0;
                    for (int i = 0; i < kh; ++i) {
                        const size_t row = static_cast<size_t>(oh * sh + i) * W;
                        for (int j = 0; j < kw; ++j) {
                            acc += xc[row + static_cast<size_t>(ow * sw + j)];
                        }
                    }
                    out[t] = acc * inv;
                }
            }
        }
    }

    Tensor result = finish({N, C, Ho, Wo}, std::move(out), "avg_pool2d");
    if (recording({&input})) {
        result.set_requires_grad(true);
        Impl xi = input.impl(), oi = result.impl();
        GradTape::active().record([xi, oi, N, C, H, W, kh, kw, sh, sw, Ho, Wo, inv] {
            const std::vector<double>* gp = upstream(oi);
            if (!gp || !xi->requires_grad) {
                return;
            }
            ensure_grad(*xi);
            size_t t2 = 0;
            for (int n = 0; n < N; ++n) {
                for (int c = 0; c < C; ++c) {
                    double* gx = xi->grad.data() + (static_cast<size_t>(n) * C + c) * H * W;
                    for (int oh = 0; oh < Ho; ++oh) {
                        for (int ow = 0; ow < Wo; ++ow, ++t2) {
                            const double gv = (*gp)[t2] * inv;
                            for (int i = 0; i < kh; ++i) {
                                const size_t row = static_cast<size_t>(oh * sh + i) * W;
                                for (int j = 0; j < kw; ++j) {
                                    gx[row + static_cast<size_t>(ow * sw + j)] += gv;
                                }
                            }
                        }
                    }
                }
            }
        });
    }
    return result;
}

Tensor avg_pool_global(const Tensor& input) {
    require_rank(input, 4, "avg_pool_global", "input");
    const int N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    const double inv = 1.0 / (static_cast<double>(H) * W);
    const double* x = input.data().data();
    std::vector<double> out(static_cast<size_t>(N) * C);
    for (size_t nc = 0; nc < out.size(); ++nc) {
        const double* xc = x + nc * static_cast<size_t>(H) * W;
        double acc = 0.0;
        for (size_t i = 0; i < static_cast<size_t>(H) * W; ++i) {
            acc += xc[i];
        }
        out[nc] = acc * inv;
    }
    Tensor result = finish({N, C, 1, 1}, std::move(out), "avg_pool_global");
    if (recording({&input})) {
        result.set_requires_grad(true);
        Impl xi = input.impl(), oi = result.impl();
        GradTape::active().record([xi, oi, N, C, H, W, inv] {
            const std::vector<double>* gp = upstream(oi);
            if (!gp || !xi->requires_grad) {
                return;
            }
            ensure_grad(*xi);
            for (size_t nc = 0; nc < gp->size(); ++nc) {
                const double gv = (*gp)[nc] * inv;
                double* gx = xi->grad.data() + nc * static_cast<size_t>(H) * W;
                for (size_t i = 0; i < static_cast<size_t>(H) * W; ++i) {
                    gx[i] += gv;
                }
            }
        });
    }
    return result;
}

Tensor max_pool_global(const Tensor& input) {
    require_rank(input, 4, "max_pool_global", "input");
    const int N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    const double* x = input.data().data();
    std::vector<double> out(static_cast<size_t>(N) * C);
    std::vector<size_t> argmax(out.size());
    for (size_t nc = 0; nc < out.size(); ++nc) {
        const double* xc = x + nc * static_cast<size_t>(H) * W;
        double best = xc[0];
        size_t bi = 0;
        for (size_t i = 1; i < static_cast<size_t>(H) * W; ++i) {
            if (xc[i] > best) {
                best = xc[i];
                bi = i;
            }
        }
        out[nc] = best;
        argmax[nc] = nc * static_cast<size_t>(H) * W + bi;
    }
    Tensor result = finish({N, C, 1, 1}, std::move(out), "max_pool_global");
    if (recording({&input})) {
        result.set_requires_grad(true);
        Impl xi = input.impl(), oi = result.impl();
        GradTape::active().record([xi, oi, argmax = std::move(argmax)] {
            const std::vector<double>* gp = upstream(oi);
            if (!gp || !xi->requires_grad) {
                return;
            }
            ensure_grad(*xi);
            for (size_t t = 0; t < argmax.size(); ++t) {
                xi->grad[argmax[t]] += (*gp)[t];
            }
        });
    }
    return result;
}

Tensor channel_mean(const Tensor& input) {
    require_rank(input, 4, "channel_mean", "input");
    const int N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    const size_t hw = static_cast<size_t>(H) * W;
    const double inv = 1.0 / C;
    const double* x = input.data().data();
    std::vector<double> out(static_cast<size_t>(N) * hw);
    for (int n = 0; n < N; ++n) {
        double* on = out.data() + static_cast<size_t>(n) * hw;
        for (size_t i = 0; i < hw; ++i) {
            double acc = 0.0;
            for (int c = 0; c < C; ++c) {
                acc += x[(static_cast<size_t>(n) * C + c) * hw + i];
            }
            on[i] = acc * inv;
        }
    }
    Tensor result = finish({N, 1, H, W}, std::move(out), "channel_mean");
    if (recording({&input})) {
        result.set_requires_grad(true);
        Impl xi = input.impl(), oi = result.impl();
        GradTape::active().record([xi, oi, N, C, hw, inv] {
            const std::vector<double>* gp = upstream(oi);
            if (!gp || !xi->requires_grad) {
                return;
            }
            ensure_grad(*xi);
            for (int n = 0; n < N; ++n) {
                for (size_t i = 0; i < hw; ++i) {
                    const double gv = (*gp)[static_cast<size_t>(n) * hw + i] * inv;
                    for (int c = 0; c < C; ++c) {
                        xi->grad[(static_cast<size_t>(n) * C + c) * hw + i] += gv;
                    }
                }
            }
        });
    }
    return result;
}

Tensor channel_max(const Tensor& input) {
    require_rank(input, 4, "channel_max", "input");
    const int N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    const size_t hw = static_cast<size_t>(H) * W;
    const double* x = input.data().data();
    std::vector<double> out(static_cast<size_t>(N) * hw);
    std::vector<size_t> argmax(out.size());
    for (int n = 0; n < N; ++n) {
        for (size_t i = 0; i < hw; ++i) {
            double best = x[static_cast<size_t>(n) * C * hw + i];
            int bc = 0;
            for (int c = 1; c < C; ++c) {
                const double v = x[(static_cast<size_t>(n) * C + c) * hw + i];
                if (v > best) {
                    best = v;
                    bc = c;
                }
            }
            out[static_cast<size_t>(n) * hw + i] = best;
            argmax[static_cast<size_t>(n) * hw + i] = (static_cast<size_t>(n) * C + bc) * hw + i;
        }
    }
    Tensor result = finish({N, 1, H, W}, std::move(out), "channel_max");
    if (recording({&input})) {
        result.set_requires_grad(true);
        Impl xi = input.impl(), oi = result.impl();
        GradTape::active().record([xi, oi, argmax = std::move(argmax)] {
            const std::vector<double>* gp = upstream(oi);
            if (!gp || !xi->requires_grad) {
                return;
            }
            ensure_grad(*xi);
            for (size_t t = 0; t < argmax.size(); ++t) {
                xi->grad[argmax[t]] += (*gp)[t];
            }
        });
    }
    return result;
}

// ---------------------------------------------------------------------------
// fully connected
// ---------------------------------------------------------------------------

Tensor fully_connected(const Tensor& input, const Tensor& weight, const Tensor& bias) {
    require_rank(input, 2, "fully_connected", "input");
    require_rank(weight, 2, "fully_connected", "weight");
    require_rank(bias, 1, "fully_connected", "bias");
    const int N = input.dim(0), D = input.dim(1);
    const int E = weight.dim(1);
    if (weight.dim(0) != D) {
        throw dimension_error("fully_connected: weight rows " + std::to_string(weight.dim(0)) +
                              " do not match input features " + std::to_string(D));
    }
    if (bias.dim(0) != E) {
        throw dimension_error("fully_connected: bias axis " + std::to_string(bias.dim(0)) +
                              " does not match output features " + std::to_string(E));
    }
    const double* x = input.data().data();
    const double* w = weight.data().data();
    const double* b = bias.data().data();
    std::vector<double> out(static_cast<size_t>(N) * E);
    for (int n = 0; n < N; ++n) {
        double* on = out.data() + static_cast<size_t>(n) * E;
        for (int e = 0; e < E; ++e) {
            on[e] = b[e];
        }
        const double* xn = x + static_cast<size_t>(n) * D;
        for (int d = 0; d < D; ++d) {
            const double xv = xn[d];
            if (xv == 0.0) {
                continue;
            }
            const double* wr = w + static_cast<size_t>(d) * E;
            for (int e = 0; e < E; ++e) {
                on[e] += xv * wr[e];
            }
        }
    }
    Tensor result = finish({N, E}, std::move(out), "fully_connected");
    if (recording({&input, &weight, &bias})) {
        result.set_requires_grad(true);
        Impl xi = input.impl(), wi = weight.impl(), bi = bias.impl(), oi = result.impl();
        GradTape::active().record([xi, wi, bi, oi, N, D, E] {
            const std::vector<double>* gp = upstream(oi);
            if (!gp) {
                return;
            }
            const double* g = gp->data();
            if (bi->requires_grad) {
                ensure_grad(*bi);
                for (int n = 0; n < N; ++n) {
                    for (int e = 0; e < E; ++e) {
                        bi->grad[static_cast<size_t>(e)] += g[static_cast<size_t>(n) * E + e];
                    }
                }
            }
            if (wi->requires_grad) {
                ensure_grad(*wi);
                for (int n = 0; n < N; ++n) {
                    const double* gn = g + static_cast<size_t>(n) * E;
                    const double* xn = xi->data.data() + static_cast<size_t>(n) * D;
                    for (int d = 0; d < D; ++d) {
                        const double xv = xn[d];
                        if (xv == 0.0) {
                            continue;
                        }
                        double* wr = wi->grad.data() + static_cast<size_t>(d) * E;
                        for (int e = 0; e < E; ++e) {
                            wr[e] += xv * gn[e];
                        }
                    }
                }
            }
            if (xi->requires_grad) {
                ensure_grad(*xi);
                for (int n = 0; n < N; ++n) {
                    const double* gn = g + static_cast<size_t>(n) * E;
                    double* gx = xi->grad.data() + static_cast<size_t>(n) * D;
                    for (int d = 0; d < D; ++d) {
                        const double* wr = wi->data.data() + static_cast<size_t>(d) * E;
                        double acc = 0.0;
                        for (int e = 0; e < E; ++e) {
                            acc += gn[e] * wr[e];
                        }
                        gx[d] += acc;
                    }
                }
            }
        });
    }
    return result;
}

// ---------------------------------------------------------------------------
// elementwise unary
// ---------------------------------------------------------------------------

namespace {

template <typename Fwd, typename Bwd>
Tensor unary_op(const Tensor& x, const char* name, Fwd fwd, Bwd grad_coeff) {
    std::vector<double> out(x.numel());
    const double* xd = x.data().data();
    for (size_t i = 0; i < out.size(); ++i) {
        out[i] = fwd(xd[i]);
    }
    Tensor result = finish(x.shape(), std::move(out), name);
    if (recording({&x})) {
        result.set_requires_grad(true);
        Impl xi = x.impl(), oi = result.impl();
        GradTape::active().record([xi, oi, grad_coeff] {
            const std::vector<double>* gp = upstream(oi);
            if (!gp || !xi->requires_grad) {
                return;
            }
            ensure_grad(*xi);
            for (size_t i = 0; i < gp->size(); ++i) {
                xi->grad[i] += (*gp)[i] * grad_coeff(xi->data[i], oi->data[i]);
            }
        });
    }
    return result;
}

} // namespace

Tensor relu(const Tensor& x) {
    return unary_op(
        x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
        [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
    return unary_op(
        x, "sigmoid", [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor abs(const Tensor& x) {
    return unary_op(
        x, "abs", [](double v) { return std::fabs(v); },
        [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor pow_scalar(const Tensor& x, double p) {
    for (double v : x.data()) {
        if (v < 0.0) {
            throw numeric_error("pow_scalar: negative base");
        }
    }
    return unary_op(
        x, "pow_scalar", [p](double v) { return std::pow(v, p); },
        [p](double v, double) { return v == 0.0 ? 0.0 : p * std::pow(v, p - 1.0); });
}

Tensor add_scalar(const Tensor& x, double c) {
    return unary_op(
        x, "add_scalar", [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& x, double c) {
    return unary_op(
        x, "mul_scalar", [c](double v) { return v * c; }, [c](double, double) { return c; });
}

// ---------------------------------------------------------------------------
// elementwise binary with same-rank broadcasting
// ---------------------------------------------------------------------------

namespace {

struct BroadcastPlan {
    std::vector<int> out_shape;
    std::vector<size_t> a_strides, b_strides, out_strides;
    size_t total = 1;
};

BroadcastPlan make_plan(const Tensor& a, const Tensor& b, const char* op) {
    if (a.rank() != b.rank()) {
        throw dimension_error(std::string(op) + ": rank mismatch " + std::to_string(a.rank()) +
                              " vs " + std::to_string(b.rank()));
    }
    const int r = a.rank();
    BroadcastPlan plan;
    plan.out_shape.resize(static_cast<size_t>(r));
    for (int i = 0; i < r; ++i) {
        const int da = a.dim(i), db = b.dim(i);
        if (da != db && da != 1 && db != 1) {
            throw dimension_error(std::string(op) + ": axis " + std::to_string(i) +
                                  " has incompatible extents " + std::to_string(da) + " and " +
                                  std::to_string(db));
        }
        plan.out_shape[static_cast<size_t>(i)] = std::max(da, db);
        plan.total *= static_cast<size_t>(plan.out_shape[static_cast<size_t>(i)]);
    }
    auto strides_of = [r](const std::vector<int>& shape, const std::vector<int>& out_shape) {
        std::vector<size_t> s(static_cast<size_t>(r));
        size_t acc = 1;
        for (int i = r - 1; i >= 0; --i) {
            s[static_cast<size_t>(i)] = (shape[static_cast<size_t>(i)] == 1 &&
                                         out_shape[static_cast<size_t>(i)] != 1)
                                            ? 0
                                            : acc;
            acc *= static_cast<size_t>(shape[static_cast<size_t>(i)]);
        }
        return s;
    };
    plan.a_strides = strides_of(a.shape(), plan.out_shape);
    plan.b_strides = strides_of(b.shape(), plan.out_shape);
    plan.out_strides.resize(static_cast<size_t>(r));
    size_t acc = 1;
    for (int i = r - 1; i >= 0; --i) {
        plan.out_strides[static_cast<size_t>(i)] = acc;
        acc *= static_cast<size_t>(plan.out_shape[static_cast<size_t>(i)]);
    }
    return plan;
}

// Walks the output index space, exposing the matching flat offsets.
template <typename F>
void broadcast_walk(const BroadcastPlan& plan, F&& fn) {
    const int r = static_cast<int>(plan.out_shape.size());
    std::vector<int> idx(static_cast<size_t>(r), 0);
    size_t ai = 0, bi = 0;
    for (size_t t = 0; t < plan.total; ++t) {
        fn(t, ai, bi);
        for (int i = r - 1; i >= 0; --i) {
            ++idx[static_cast<size_t>(i)];
            ai += plan.a_strides[static_cast<size_t>(i)];
            bi += plan.b_strides[static_cast<size_t>(i)];
            if (idx[static_cast<size_t>(i)] < plan.out_shape[static_cast<size_t>(i)]) {
                break;
            }
            idx[static_cast<size_t>(i)] = 0;
            ai -= plan.a_strides[static_cast<size_t>(i)] *
                  static_cast<size_t>(plan.out_shape[static_cast<size_t>(i)]);
            bi -= plan.b_strides[static_cast<size_t>(i)] *
                  static_cast<size_t>(plan.out_shape[static_cast<size_t>(i)]);
        }
    }
}

template <typename Fwd, typename DA, typename DB>
Tensor binary_op(const Tensor& a, const Tensor& b, const char* name, Fwd fwd, DA da_fn, DB db_fn) {
    BroadcastPlan plan = make_plan(a, b, name);
    std::vector<double> out(plan.total);
    const double* ad = a.data().data();
    const double* bd = b.data().data();
    broadcast_walk(plan, [&](size_t t, size_t ai, size_t bi) { out[t] = fwd(ad[ai], bd[bi]); });
    Tensor result = finish(plan.out_shape, std::move(out), name);
    if (recording({&a, &b})) {
        result.set_requires_grad(true);
        Impl aimpl = a.impl(), bimpl = b.impl(), oi = result.impl();
        GradTape::active().record([aimpl, bimpl, oi, plan, da_fn, db_fn] {
            const std::vector<double>* gp = upstream(oi);
            if (!gp) {
                return;
            }
            const bool need_a = aimpl->requires_grad;
            const bool need_b = bimpl->requires_grad;
            if (need_a) ensure_grad(*aimpl);
            if (need_b) ensure_grad(*bimpl);
            broadcast_walk(plan, [&](size_t t, size_t ai, size_t bi) {
                const double g = (*gp)[t];
                if (g == 0.0) {
                    return;
                }
                const double av = aimpl->data[ai];
                const double bv = bimpl->data[bi];
                if (need_a) {
                    aimpl->grad[ai] += g * da_fn(av, bv);
                }
                if (need_b) {
                    bimpl->grad[bi] += g * db_fn(av, bv);
                }
            });
        });
    }
    return result;
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "add", [](double x, double y) { return x + y; },
        [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "sub", [](double x, double y) { return x - y; },
        [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "mul", [](double x, double y) { return x * y; },
        [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "div", [](double x, double y) { return x / y; },
        [](double, double y) { return 1.0 / y; },
        [](double x, double y) { return -x / (y * y); });
}

// ---------------------------------------------------------------------------
// reductions, reshape, concat
// ---------------------------------------------------------------------------

Tensor sum_all(const Tensor& a) {
    double acc = 0.0;
    for (double v : a.data()) {
        acc += v;
    }
    Tensor result = finish({1}, {acc}, "sum_all");
    if (recording({&a})) {
        result.set_requires_grad(true);
        Impl ai = a.impl(), oi = result.impl();
        GradTape::active().record([ai, oi] {
            const std::vector<double>* gp = upstream(oi);
            if (!gp || !ai->requires_grad) {
                return;
            }
            ensure_grad(*ai);
            const double g = (*gp)[0];
            for (double& gv : ai->grad) {
                gv += g;
            }
        });
    }
    return result;
}

Tensor mean_all(const Tensor& a) {
    const double inv = 1.0 / static_cast<double>(a.numel());
    double acc = 0.0;
    for (double v : a.data()) {
        acc += v;
    }
    Tensor result = finish({1}, {acc * inv}, "mean_all");
    if (recording({&a})) {
        result.set_requires_grad(true);
        Impl ai = a.impl(), oi = result.impl();
        GradTape::active().record([ai, oi, inv] {
            const std::vector<double>* gp = upstream(oi);
            if (!gp || !ai->requires_grad) {
                return;
            }
            ensure_grad(*ai);
            const double g = (*gp)[0] * inv;
            for (double& gv : ai->grad) {
                gv += g;
            }
        });
    }
    return result;
}

Tensor sum_cols(const Tensor& a) {
    require_rank(a, 2, "sum_cols", "input");
    const int N = a.dim(0), D = a.dim(1);
    const double* x = a.data().data();
    std::vector<double> out(static_cast<size_t>(N));
    for (int n = 0; n < N; ++n) {
        double acc = 0.0;
        const double* xn = x + static_cast<size_t>(n) * D;
        for (int d = 0; d < D; ++d) {
            acc += xn[d];
        }
        out[static_cast<size_t>(n)] = acc;
    }
    Tensor result = finish({N, 1}, std::move(out), "sum_cols");
    if (recording({&a})) {
        result.set_requires_grad(true);
        Impl ai = a.impl(), oi = result.impl();
        GradTape::active().record([ai, oi, N, D] {
            const std::vector<double>* gp = upstream(oi);
            if (!gp || !ai->requires_grad) {
                return;
            }
            ensure_grad(*ai);
            for (int n = 0; n < N; ++n) {
                const double g = (*gp)[static_cast<size_t>(n)];
                double* ga = ai->grad.data() + static_cast<size_t>(n) * D;
                for (int d = 0; d < D; ++d) {
                    ga[d] += g;
                }
            }
        });
    }
    return result;
}

Tensor reshape(const Tensor& a, std::vector<int> shape) {
    if (shape_numel(shape) != a.numel()) {
        throw dimension_error("reshape: element count mismatch");
    }
    Tensor result(std::move(shape), std::vector<double>(a.data().begin(), a.data().end()));
    if (recording({&a})) {
        result.set_requires_grad(true);
        Impl ai = a.impl(), oi = result.impl();
        GradTape::active().record([ai, oi] {
            const std::vector<double>* gp = upstream(oi);
            if (!gp || !ai->requires_grad) {
                return;
            }
            ensure_grad(*ai);
            for (size_t i = 0; i < gp->size(); ++i) {
                ai->grad[i] += (*gp)[i];
            }
        });
    }
    return result;
}

Tensor concat_channel(const Tensor& a, const Tensor& b) {
    require_rank(a, 4, "concat_channel", "lhs");
    require_rank(b, 4, "concat_channel", "rhs");
    if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
        throw dimension_error("concat_channel: non-channel axes must agree");
    }
    const int N = a.dim(0), Ca = a.dim(1), Cb = b.dim(1), H = a.dim(2), W = a.dim(3);
    const size_t hw = static_cast<size_t>(H) * W;
    std::vector<double> out(static_cast<size_t>(N) * (Ca + Cb) * hw);
    const double* ad = a.data().data();
    const double* bd = b.data().data();
    for (int n = 0; n < N; ++n) {
        double* dst = out.data() + static_cast<size_t>(n) * (Ca + Cb) * hw;
        std::memcpy(dst, ad + static_cast<size_t>(n) * Ca * hw, Ca * hw * sizeof(double));
        std::memcpy(dst + static_cast<size_t>(Ca) * hw, bd + static_cast<size_t>(n) * Cb * hw,
                    Cb * hw * sizeof(double));
    }
    Tensor result = finish({N, Ca + Cb, H, W}, std::move(out), "concat_channel");
    if (recording({&a, &b})) {
        result.set_requires_grad(true);
        Impl ai = a.impl(), bi = b.impl(), oi = result.impl();
        GradTape::active().record([ai, bi, oi, N, Ca, Cb, hw] {
            const std::vector<double>* gp = upstream(oi);
            if (!gp) {
                return;
            }
            if (ai->requires_grad) {
                ensure_grad(*ai);
                for (int n = 0; n < N; ++n) {
                    const double* src = gp->data() + static_cast<size_t>(n) * (Ca + Cb) * hw;
                    double* dst = ai->grad.data() + static_cast<size_t>(n) * Ca * hw;
                    for (size_t i = 0; i < static_cast<size_t>(Ca) * hw; ++i) {
                        dst[i] += src[i];
                    }
                }
            }
            if (bi->requires_grad) {
                ensure_grad(*bi);
                for (int n = 0; n < N; ++n) {
                    const double* src = gp->data() + static_cast<size_t>(n) * (Ca + Cb) * hw +
                                        static_cast<size_t>(Ca) * hw;
                    double* dst = bi->grad.data() + static_cast<size_t>(n) * Cb * hw;
                    for (size_t i = 0; i < static_cast<size_t>(Cb) * hw; ++i) {
                        dst[i] += src[i];
                    }
                }
            }
        });
    }
    return result;
}

// ---------------------------------------------------------------------------
// classification head
// ---------------------------------------------------------------------------

Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    require_rank(logits, 2, "softmax_cross_entropy", "logits");
    const int N = logits.dim(0), K = logits.dim(1);
    if (static_cast<int>(labels.size()) != N) {
        throw dimension_error("softmax_cross_entropy: label count does not match batch axis");
    }
    const double* x = logits.data().data();
    std::vector<double> probs(static_cast<size_t>(N) * K);
    double loss = 0.0;
    for (int n = 0; n < N; ++n) {
        const int y = labels[static_cast<size_t>(n)];
        if (y < 0 || y >= K) {
            throw input_error("softmax_cross_entropy: label out of range");
        }
        const double* xn = x + static_cast<size_t>(n) * K;
        double m = xn[0];
        for (int k = 1; k < K; ++k) {
            m = std::max(m, xn[k]);
        }
        double z = 0.0;
        for (int k = 0; k < K; ++k) {
            z += std::exp(xn[k] - m);
        }
        for (int k = 0; k < K; ++k) {
            probs[static_cast<size_t>(n) * K + k] = std::exp(xn[k] - m) / z;
        }
        loss -= (xn[y] - m) - std::log(z);
    }
    loss /= N;
    Tensor result = finish({1}, {loss}, "softmax_cross_entropy");
    if (recording({&logits})) {
        result.set_requires_grad(true);
        Impl xi = logits.impl(), oi = result.impl();
        GradTape::active().record([xi, oi, probs = std::move(probs), labels, N, K] {
            const std::vector<double>* gp = upstream(oi);
            if (!gp || !xi->requires_grad) {
                return;
            }
            ensure_grad(*xi);
            const double g = (*gp)[0] / N;
            for (int n = 0; n < N; ++n) {
                for (int k = 0; k < K; ++k) {
                    const double onehot = (k == labels[static_cast<size_t>(n)]) ? 1.0 : 0.0;
                    xi->grad[static_cast<size_t>(n) * K + k] +=
                        g * (probs[static_cast<size_t>(n) * K + k] - onehot);
                }
            }
        });
    }
    return result;
}

std::vector<double> softmax_rows(const Tensor& logits) {
    require_rank(logits, 2, "softmax_rows", "logits");
    const int N = logits.dim(0), K = logits.dim(1);
    const double* x = logits.data().data();
    std::vector<double> probs(static_cast<size_t>(N) * K);
    for (int n = 0; n < N; ++n) {
        const double* xn = x + static_cast<size_t>(n) * K;
        double m = xn[0];
        for (int k = 1; k < K; ++k) {
            m = std::max(m, xn[k]);
        }
        double z = 0.0;
        for (int k = 0; k < K; ++k) {
            z += std::exp(xn[k] - m);
        }
        for (int k = 0; k < K; ++k) {
            probs[static_cast<size_t>(n) * K + k] = std::exp(xn[k] - m) / z;
        }
    }
    return probs;
}

} // namespace arsp
