#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "arsp/embedder.hpp"
#include "arsp/errors.hpp"
#include "arsp/losses.hpp"
#include "arsp/ops.hpp"
#include "gradcheck.hpp"

using namespace arsp;
using namespace arsp::testing;

namespace {

LossWeights small_weights(int scales, int window) {
    LossWeights w = LossWeights::defaults(Preset::tiny);
    const std::vector<double> base{0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
    w.scale_weights.assign(base.begin(), base.begin() + scales);
    double sum = 0.0;
    for (double v : w.scale_weights) {
        sum += v;
    }
    for (double& v : w.scale_weights) {
        v /= sum;
    }
    w.scale_sigmas.assign(static_cast<size_t>(scales), 1.5);
    w.window = window;
    return w;
}

// Plain-loop single-scale SSIM (mean of the l*cs map over valid positions),
// independent of the tensor stack.
double ssim_oracle(const Tensor& x, const Tensor& y, int win, double sigma) {
    const double c1 = 1e-4, c2 = 9e-4;
    const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
    std::vector<double> g(static_cast<size_t>(win) * win);
    const double c = (win - 1) / 2.0;
    double gs = 0.0;
    for (int i = 0; i < win; ++i) {
        for (int j = 0; j < win; ++j) {
            const double dy = i - c, dx = j - c;
            g[static_cast<size_t>(i) * win + j] =
                std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            gs += g[static_cast<size_t>(i) * win + j];
        }
    }
    for (double& v : g) {
        v /= gs;
    }
    double acc = 0.0;
    size_t count = 0;
    for (int ch = 0; ch < C; ++ch) {
        for (int oy = 0; oy + win <= H; ++oy) {
            for (int ox = 0; ox + win <= W; ++ox) {
                double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
                for (int i = 0; i < win; ++i) {
                    for (int j = 0; j < win; ++j) {
                        const double wv = g[static_cast<size_t>(i) * win + j];
                        const double xv =
                            x.at((static_cast<size_t>(ch) * H + oy + i) * W + ox + j);
                        const double yv =
                            y.at((static_cast<size_t>(ch) * H + oy + i) * W + ox + j);
                        mx += wv * xv;
                        my += wv * yv;
                        sxx += wv * xv * xv;
                        syy += wv * yv * yv;
                        sxy += wv * xv * yv;
                    }
                }
                const double vx = sxx - mx * mx;
                const double vy = syy - my * my;
                const double cov = sxy - mx * my;
                const double l = (2.0 * mx * my + c1) / (mx * mx + my * my + c1);
                const double cs = (2.0 * cov + c2) / (vx + vy + c2);
                acc += l * cs;
                ++count;
            }
        }
    }
    return acc / static_cast<double>(count);
}

} // namespace

TEST_CASE("paper constants are wired into the defaults") {
    LossWeights w = LossWeights::defaults(Preset::full);
    CHECK(w.alpha == 0.84);
    CHECK(w.lambda1 == 1.0);
    CHECK(w.lambda2 == 0.04);
    CHECK(w.lambda3 == 1.2);
    REQUIRE(w.scale_weights.size() == 5);
    double sum = 0.0;
    for (double v : w.scale_weights) {
        sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    w.validate();
    LossWeights tiny = LossWeights::defaults(Preset::tiny);
    REQUIRE(tiny.scale_weights.size() == 3);
    tiny.validate();

    LossWeights bad = w;
    bad.alpha = 1.5;
    CHECK_THROWS_AS(bad.validate(), parameter_error);
    bad = w;
    bad.scale_weights[0] += 0.1;
    CHECK_THROWS_AS(bad.validate(), parameter_error);
    bad = w;
    bad.window = 8;
    CHECK_THROWS_AS(bad.validate(), parameter_error);
}

TEST_CASE("ms_ssim self-similarity is exactly one") {
    Rng rng(3);
    NoGradGuard ng;
    Tensor x = random_tensor(rng, {3, 32, 32}, 0.0, 1.0);
    Tensor v = ms_ssim(x, x, LossWeights::defaults(Preset::tiny));
    CHECK(v.value() == 1.0);
}

TEST_CASE("ms_ssim is symmetric to the bit") {
    Rng rng(5);
    NoGradGuard ng;
    Tensor x = random_tensor(rng, {3, 32, 32}, 0.0, 1.0);
    Tensor y = random_tensor(rng, {3, 32, 32}, 0.0, 1.0);
    const LossWeights w = LossWeights::defaults(Preset::tiny);
    CHECK(std::fabs(ms_ssim(x, y, w).value() - ms_ssim(y, x, w).value()) <= 1e-12);
}

TEST_CASE("ms_ssim matches the plain-loop single-scale oracle") {
    Rng rng(7);
    NoGradGuard ng;
    LossWeights w = small_weights(1, 11);
    for (int trial = 0; trial < 3; ++trial) {
        Tensor x = random_tensor(rng, {3, 20, 20}, 0.0, 1.0);
        // correlated pair keeps cs well inside the positive region
        std::vector<double> yd(x.data().begin(), x.data().end());
        for (double& v : yd) {
            v = std::clamp(v + rng.uniform(-0.2, 0.2), 0.0, 1.0);
        }
        Tensor y({3, 20, 20}, std::move(yd));
        const double got = ms_ssim(x, y, w).value();
        const double want = ssim_oracle(x, y, 11, 1.5);
        CHECK(got == doctest::Approx(want).epsilon(1e-10));
    }
}

TEST_CASE("ms_ssim of a binary image against its inverse is small") {
    NoGradGuard ng;
    const int s = 32;
    Rng rng(9);
    std::vector<double> xd(3ull * s * s);
    for (size_t i = 0; i < xd.size(); ++i) {
        xd[i] = rng.uniform() < 0.5 ? 0.0 : 1.0; // no mid-gray anywhere
    }
    Tensor x({3, s, s}, xd);
    std::vector<double> yd(xd.size());
    for (size_t i = 0; i < xd.size(); ++i) {
        yd[i] = 1.0 - xd[i];
    }
    Tensor y({3, s, s}, std::move(yd));
    CHECK(ms_ssim(x, y, LossWeights::defaults(Preset::tiny)).value() < 0.5);
}

TEST_CASE("ms_ssim rejects images too small for the scale count") {
    NoGradGuard ng;
    Tensor x = Tensor::full({3, 16, 16}, 0.5);
    CHECK_THROWS_AS(ms_ssim(x, x, LossWeights::defaults(Preset::tiny)), parameter_error);
    Tensor big = Tensor::full({3, 20, 24}, 0.5);
    CHECK_THROWS_AS(ms_ssim(big, Tensor::full({3, 24, 20}, 0.5),
                            LossWeights::defaults(Preset::tiny)),
                    dimension_error);
}

TEST_CASE("image_loss identities") {
    Rng rng(11);
    NoGradGuard ng;
    Tensor x = random_tensor(rng, {3, 32, 32}, 0.0, 1.0);
    const LossWeights w = LossWeights::defaults(Preset::tiny);
    CHECK(image_loss(x, x, w).value() == 0.0);

    // alpha -> 1 degenerates to the pure structural term
    Tensor y = random_tensor(rng, {3, 32, 32}, 0.0, 1.0);
    LossWeights w1 = w;
    w1.alpha = 1.0 - 1e-12;
    const double pure = 1.0 - ms_ssim(x, y, w).value();
    CHECK(image_loss(x, y, w1).value() == doctest::Approx(pure).epsilon(1e-9));
}

TEST_CASE("image_loss gradient matches finite differences") {
    Rng rng(13);
    LossWeights w = small_weights(2, 7);
    double worst = 0.0;
    for (int trial = 0; trial < 3; ++trial) {
        Tensor x = random_tensor(rng, {1, 3, 16, 16}, 0.05, 0.95);
        std::vector<double> yd(x.data().begin(), x.data().end());
        for (double& v : yd) {
            v = std::clamp(v + rng.uniform(-0.1, 0.1), 0.0, 1.0);
        }
        Tensor y({1, 3, 16, 16}, std::move(yd));
        auto fn = [&](const std::vector<Tensor>& in) { return image_loss(in[0], in[1], w); };
        auto res = gradcheck_directional(fn, {x, y}, rng);
        worst = std::max(worst, res.max_rel_err);
    }
    CHECK(worst <= 1e-4);
}

TEST_CASE("cosine_loss fixtures and range") {
    NoGradGuard ng;
    Tensor a({3}, {1.0, 2.0, -0.5});
    Tensor na({3}, {-1.0, -2.0, 0.5});
    CHECK(std::fabs(cosine_loss(a, a).value()) <= 1e-12);
    CHECK(cosine_loss(a, na).value() == doctest::Approx(2.0).epsilon(1e-12));
    Tensor e1({2}, {1.0, 0.0});
    Tensor e2({2}, {0.0, 1.0});
    CHECK(cosine_loss(e1, e2).value() == doctest::Approx(1.0).epsilon(1e-12));

    Rng rng(17);
    for (int i = 0; i < 50; ++i) {
        Tensor u = random_tensor(rng, {8}, -2.0, 2.0);
        Tensor v = random_tensor(rng, {8}, -2.0, 2.0);
        const double loss = cosine_loss(u, v).value();
        CHECK(loss >= 0.0);
        CHECK(loss <= 2.0);
    }

    Tensor zero = Tensor::zeros({3});
    CHECK_THROWS_AS(cosine_loss(a, zero), input_error);
    CHECK_THROWS_AS(cosine_loss(zero, a), input_error);
}

TEST_CASE("cosine_loss gradient matches finite differences") {
    Rng rng(19);
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        auto fn = [](const std::vector<Tensor>& in) { return cosine_loss(in[0], in[1]); };
        auto res = gradcheck_elementwise(fn, {random_tensor(rng, {6}, 0.2, 2.0),
                                              random_tensor(rng, {6}, 0.2, 2.0)});
        worst = std::max(worst, res.max_rel_err);
    }
    CHECK(worst <= 1e-4);
}

TEST_CASE("se_tri_loss identities and the term-by-term oracle") {
    Rng rng(23);
    NoGradGuard ng;
    const int d = 16, h = 8, e = 12;
    LinearLayer fc1{random_tensor(rng, {d, h}), random_tensor(rng, {h})};
    // the identity head is linear (zero bias), like the embedder's fc3
    LinearLayer fc3{random_tensor(rng, {d, e}), Tensor::zeros({e})};
    LossWeights w = LossWeights::defaults(Preset::tiny);

    Tensor f = random_tensor(rng, {d}, 0.1, 1.0);
    CHECK(std::fabs(se_tri_loss(f, f, fc1, fc3, w).value()) <= 1e-12);

    // positive rescaling kills the unitized and cosine terms
    Tensor scaled = mul_scalar(f, 3.5);
    TriLossParts parts = se_tri_loss_parts(f, scaled, fc1, fc3, w);
    CHECK(parts.unit_l2.value() <= 1e-12);
    CHECK(parts.id_cos.value() <= 1e-12);
    CHECK(parts.hidden_l1.value() > 0.0);

    // random pair: total equals an independent recomputation
    Tensor s = random_tensor(rng, {d}, -1.0, 1.0);
    parts = se_tri_loss_parts(f, s, fc1, fc3, w);
    auto dot = [&](const Tensor& u, const Tensor& v) {
        double acc = 0;
        for (size_t i = 0; i < u.numel(); ++i) {
            acc += u.at(i) * v.at(i);
        }
        return acc;
    };
    auto linear = [&](const LinearLayer& l, const Tensor& v) {
        std::vector<double> out(static_cast<size_t>(l.bias.numel()));
        for (size_t j = 0; j < out.size(); ++j) {
            double acc = l.bias.at(j);
            for (size_t i = 0; i < v.numel(); ++i) {
                acc += v.at(i) * l.weight.at(i * out.size() + j);
            }
            out[j] = acc;
        }
        return out;
    };
    const double nf = std::sqrt(dot(f, f)), ns = std::sqrt(dot(s, s));
    double term1 = 0.0;
    for (size_t i = 0; i < f.numel(); ++i) {
        const double diff = f.at(i) / nf - s.at(i) / ns;
        term1 += diff * diff;
    }
    auto hf = linear(fc1, f), hs = linear(fc1, s);
    double term2 = 0.0;
    for (size_t i = 0; i < hf.size(); ++i) {
        term2 += std::fabs(hf[i] - hs[i]);
    }
    auto idf = linear(fc3, f), ids = linear(fc3, s);
    double dd = 0, n1 = 0, n2 = 0;
    for (size_t i = 0; i < idf.size(); ++i) {
        dd += idf[i] * ids[i];
        n1 += idf[i] * idf[i];
        n2 += ids[i] * ids[i];
    }
    const double term3 = 1.0 - dd / (std::sqrt(n1) * std::sqrt(n2));
    const double expected = 1.0 * term1 + 0.04 * term2 + 1.2 * term3;
    CHECK(std::fabs(parts.total.value() - expected) <= 1e-12);

    CHECK_THROWS_AS(se_tri_loss(Tensor::zeros({d}), s, fc1, fc3, w), input_error);
    LinearLayer live{random_tensor(rng, {d, h}).set_requires_grad(true),
                     random_tensor(rng, {h})};
    CHECK_THROWS_AS(se_tri_loss(f, s, live, fc3, w), state_error);
}

TEST_CASE("se_tri_loss gradient reaches s_f only") {
    Rng rng(29);
    const int d = 10, h = 6, e = 8;
    LinearLayer fc1{random_tensor(rng, {d, h}), random_tensor(rng, {h})};
    LinearLayer fc3{random_tensor(rng, {d, e}), random_tensor(rng, {e})};
    LossWeights w = LossWeights::defaults(Preset::tiny);

    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
        Tensor f = random_tensor(rng, {d}, 0.2, 1.5);
        Tensor s = random_tensor(rng, {d}, -1.5, -0.2);
        auto fn = [&](const std::vector<Tensor>& in) {
            return se_tri_loss(f, in[0], fc1, fc3, w);
        };
        auto res = gradcheck_elementwise(fn, {s});
        worst = std::max(worst, res.max_rel_err);
    }
    CHECK(worst <= 1e-4);

    // target side stays gradient-free even when it nominally requires grad
    Tensor f = random_tensor(rng, {d}, 0.2, 1.0);
    f.set_requires_grad(true);
    Tensor s = random_tensor(rng, {d}, 0.2, 1.0);
    s.set_requires_grad(true);
    GradTape::active().clear();
    backward(se_tri_loss(f, s, fc1, fc3, w));
    CHECK(!f.has_grad());
    CHECK(s.has_grad());
}

TEST_CASE("fd_total_loss identities and frozen embedder") {
    FaceEmbedder embedder(Preset::tiny);
    const LossWeights w = LossWeights::defaults(Preset::tiny);
    Rng rng(31);
    Tensor x = random_tensor(rng, {1, 3, 32, 32}, 0.05, 0.95);
    {
        NoGradGuard ng;
        FdLossParts parts = fd_total_loss_parts(x, x, embedder, w);
        CHECK(std::fabs(parts.total.value()) <= 1e-12);
        Tensor y = random_tensor(rng, {1, 3, 32, 32}, 0.05, 0.95);
        CHECK(fd_total_loss_parts(x, y, embedder, w).total.value() >= 0.0);
    }

    // gradient flows to gen, never to embedder parameters
    Tensor gen = random_tensor(rng, {1, 3, 32, 32}, 0.05, 0.95);
    gen.set_requires_grad(true);
    Tensor orig = random_tensor(rng, {1, 3, 32, 32}, 0.05, 0.95);
    GradTape::active().clear();
    backward(fd_total_loss_parts(gen, orig, embedder, w).total);
    CHECK(gen.has_grad());
    for (const Param& p : embedder.net().params()) {
        CHECK(!p.value.has_grad());
    }
}

TEST_CASE("fd_total_loss gradient matches finite differences") {
    FaceEmbedder embedder(Preset::tiny);
    const LossWeights w = LossWeights::defaults(Preset::tiny);
    Rng rng(37);
    double worst = 0.0;
    for (int trial = 0; trial < 3; ++trial) {
        Tensor gen = random_tensor(rng, {1, 3, 32, 32}, 0.1, 0.9);
        Tensor orig = random_tensor(rng, {1, 3, 32, 32}, 0.1, 0.9);
        auto fn = [&](const std::vector<Tensor>& in) {
            return fd_total_loss_parts(in[0], orig, embedder, w).total;
        };
        auto res = gradcheck_directional(fn, {gen}, rng);
        worst = std::max(worst, res.max_rel_err);
    }
    CHECK(worst <= 1e-4);
}
