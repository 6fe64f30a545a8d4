#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "arsp/cbam.hpp"
#include "arsp/errors.hpp"
#include "arsp/ops.hpp"
#include "gradcheck.hpp"

using namespace arsp;
using namespace arsp::testing;

namespace {

CbamParams zero_weight_params(int channels, int reduction, int spatial_kernel) {
    Rng rng(1);
    CbamParams p = make_cbam_params(channels, reduction, spatial_kernel, rng, false);
    p.mlp_w1 = Tensor::zeros(p.mlp_w1.shape());
    p.mlp_w2 = Tensor::zeros(p.mlp_w2.shape());
    p.spatial_weight = Tensor::zeros(p.spatial_weight.shape());
    return p;
}

} // namespace

TEST_CASE("zero weights give uniform 0.5 gates") {
    Rng rng(5);
    Tensor x = random_tensor(rng, {2, 4, 5, 5});
    CbamParams p = zero_weight_params(4, 2, 3);
    Tensor cg = channel_attention(x, p);
    REQUIRE(cg.shape() == std::vector<int>({2, 4, 1, 1}));
    for (size_t i = 0; i < cg.numel(); ++i) {
        CHECK(cg.at(i) == 0.5);
    }
    Tensor sg = spatial_attention(x, p);
    REQUIRE(sg.shape() == std::vector<int>({2, 1, 5, 5}));
    for (size_t i = 0; i < sg.numel(); ++i) {
        CHECK(sg.at(i) == 0.5);
    }
}

TEST_CASE("gates stay strictly inside (0,1)") {
    Rng rng(7);
    CbamParams p = make_cbam_params(8, 2, 3, rng, false);
    Tensor x = random_tensor(rng, {1, 8, 6, 6}, -5.0, 5.0);
    Tensor cg = channel_attention(x, p);
    for (size_t i = 0; i < cg.numel(); ++i) {
        CHECK(cg.at(i) > 0.0);
        CHECK(cg.at(i) < 1.0);
    }
    Tensor sg = spatial_attention(x, p);
    for (size_t i = 0; i < sg.numel(); ++i) {
        CHECK(sg.at(i) > 0.0);
        CHECK(sg.at(i) < 1.0);
    }
}

TEST_CASE("constant input yields a spatially constant gate") {
    Rng rng(11);
    CbamParams p = make_cbam_params(4, 2, 3, rng, false);
    Tensor x = Tensor::full({1, 4, 6, 6}, 0.7);
    Tensor sg = spatial_attention(x, p);
    // interior cells see identical same-padded neighborhoods
    const double ref = sg.at(1 * 6 + 1);
    for (int i = 1; i < 5; ++i) {
        for (int j = 1; j < 5; ++j) {
            CHECK(sg.at(static_cast<size_t>(i) * 6 + j) == doctest::Approx(ref).epsilon(1e-12));
        }
    }
}

TEST_CASE("saturated gates pass the input through") {
    Rng rng(13);
    CbamParams p = zero_weight_params(4, 2, 3);
    p.mlp_b2 = Tensor::full({4}, 25.0);     // channel gate -> sigmoid(25+25)
    p.spatial_bias = Tensor::full({1}, 25.0);
    Tensor x = random_tensor(rng, {1, 4, 5, 5});
    Tensor y = cbam(x, p);
    for (size_t i = 0; i < x.numel(); ++i) {
        CHECK(std::fabs(y.at(i) - x.at(i)) <= 1e-6 * std::max(1.0, std::fabs(x.at(i))));
    }
}

TEST_CASE("output magnitude never exceeds input magnitude") {
    Rng rng(17);
    CbamParams p = make_cbam_params(8, 4, 5, rng, false);
    Tensor x = random_tensor(rng, {2, 8, 7, 7}, -3.0, 3.0);
    Tensor y = cbam(x, p);
    REQUIRE(y.shape() == x.shape());
    for (size_t i = 0; i < x.numel(); ++i) {
        CHECK(std::fabs(y.at(i)) <= std::fabs(x.at(i)));
    }
}

TEST_CASE("channel-then-spatial differs from spatial-then-channel") {
    Rng rng(19);
    CbamParams p = make_cbam_params(4, 2, 3, rng, false);
    Tensor x = random_tensor(rng, {1, 4, 6, 6});
    Tensor tandem = cbam(x, p);
    // reversed order, same parameters
    Tensor spatial_first = mul(x, spatial_attention(x, p));
    Tensor reversed = mul(spatial_first, channel_attention(spatial_first, p));
    double max_diff = 0.0;
    for (size_t i = 0; i < x.numel(); ++i) {
        max_diff = std::max(max_diff, std::fabs(tandem.at(i) - reversed.at(i)));
    }
    CHECK(max_diff > 1e-6);
}

TEST_CASE("parameter validation") {
    Rng rng(23);
    CHECK_THROWS_AS(make_cbam_params(6, 4, 3, rng, false), parameter_error);
    CHECK_THROWS_AS(make_cbam_params(8, 2, 4, rng, false), parameter_error);
    CbamParams p = make_cbam_params(8, 2, 3, rng, false);
    Tensor wrong = Tensor::zeros({1, 4, 5, 5});
    CHECK_THROWS_AS(channel_attention(wrong, p), dimension_error);
}

TEST_CASE("cbam end-to-end gradient check") {
    Rng rng(29);
    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
        CbamParams p = make_cbam_params(4, 2, 3, rng, true);
        Tensor x = random_tensor(rng, {1, 4, 5, 5});
        auto fn = [](const std::vector<Tensor>& in) {
            CbamParams q;
            q.channels = 4;
            q.reduction = 2;
            q.spatial_kernel = 3;
            q.mlp_w1 = in[1];
            q.mlp_b1 = in[2];
            q.mlp_w2 = in[3];
            q.mlp_b2 = in[4];
            q.spatial_weight = in[5];
            q.spatial_bias = in[6];
            Tensor y = cbam(in[0], q);
            return sum_all(mul(y, y));
        };
        auto res = gradcheck_elementwise(
            fn, {x, p.mlp_w1, p.mlp_b1, p.mlp_w2, p.mlp_b2, p.spatial_weight, p.spatial_bias});
        worst = std::max(worst, res.max_rel_err);
    }
    CHECK(worst <= 1e-4);
}
