#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <thread>

#include "arsp/errors.hpp"
#include "arsp/ops.hpp"
#include "arsp/tensor.hpp"
#include "arsp/util.hpp"
#include "gradcheck.hpp"

using namespace arsp;
using namespace arsp::testing;

namespace {

// Draws a tensor whose values are pairwise separated enough that max-pool /
// relu finite differences never straddle a kink.
Tensor separated_tensor(Rng& rng, std::vector<int> shape) {
    while (true) {
        Tensor t = random_tensor(rng, shape, -2.0, 2.0);
        bool ok = true;
        auto d = t.data();
        for (size_t i = 0; i < d.size() && ok; ++i) {
            if (std::fabs(d[i]) < 1e-3) {
                ok = false;
            }
            for (size_t j = i + 1; j < d.size() && ok; ++j) {
                if (std::fabs(d[i] - d[j]) < 1e-3) {
                    ok = false;
                }
            }
        }
        if (ok) {
            return t;
        }
    }
}

} // namespace

TEST_CASE("conv2d identity kernel") {
    Rng rng(7);
    Tensor x = random_tensor(rng, {1, 1, 3, 3});
    Tensor w({1, 1, 1, 1}, {1.0});
    Tensor b({1}, {0.0});
    Tensor y = conv2d(x, w, b, {1, 1}, {0, 0});
    REQUIRE(y.shape() == std::vector<int>({1, 1, 3, 3}));
    for (size_t i = 0; i < x.numel(); ++i) {
        CHECK(y.at(i) == x.at(i));
    }
}

TEST_CASE("conv2d output extents follow the floor rule") {
    // 257x598 input through a 7x7 stride-2 pad-1 kernel
    CHECK(conv_out_dim(257, 7, 2, 1) == 127);
    CHECK(conv_out_dim(598, 7, 2, 1) == 297);
    Rng rng(3);
    Tensor x = random_tensor(rng, {1, 1, 19, 23});
    Tensor w = random_tensor(rng, {4, 1, 7, 7});
    Tensor b = random_tensor(rng, {4});
    Tensor y = conv2d(x, w, b, {2, 2}, {1, 1});
    CHECK(y.dim(2) == conv_out_dim(19, 7, 2, 1));
    CHECK(y.dim(3) == conv_out_dim(23, 7, 2, 1));
}

TEST_CASE("conv2d shape errors name the offending axis") {
    Tensor x = Tensor::zeros({1, 2, 4, 4});
    Tensor w = Tensor::zeros({3, 1, 3, 3}); // wrong input-channel axis
    Tensor b = Tensor::zeros({3});
    CHECK_THROWS_AS(conv2d(x, w, b, {1, 1}, {0, 0}), dimension_error);
    try {
        conv2d(x, w, b, {1, 1}, {0, 0});
    } catch (const dimension_error& e) {
        CHECK(std::string(e.what()).find("channel") != std::string::npos);
    }
    Tensor w2 = Tensor::zeros({3, 2, 9, 3});
    CHECK_THROWS_AS(conv2d(x, w2, b, {1, 1}, {0, 0}), dimension_error);
}

TEST_CASE("conv2d gradient matches central finite differences") {
    Rng rng(11);
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        Tensor x = random_tensor(rng, {2, 3, 8, 8});
        Tensor w = random_tensor(rng, {4, 3, 3, 3});
        Tensor b = random_tensor(rng, {4});
        auto fn = [](const std::vector<Tensor>& in) {
            return sum_all(mul(conv2d(in[0], in[1], in[2], {2, 2}, {1, 1}),
                               conv2d(in[0], in[1], in[2], {2, 2}, {1, 1})));
        };
        auto res = gradcheck_elementwise(fn, {x, w, b});
        worst = std::max(worst, res.max_rel_err);
    }
    CHECK(worst <= 1e-4);
}

TEST_CASE("conv_transpose2d matches the transposed-extent rule") {
    CHECK(conv_transpose_out_dim(7, 5, 2, 2, 1) == 14);
    Rng rng(5);
    Tensor x = random_tensor(rng, {1, 3, 7, 7});
    Tensor w = random_tensor(rng, {3, 2, 5, 5});
    Tensor b = random_tensor(rng, {2});
    Tensor y = conv_transpose2d(x, w, b, {2, 2}, {2, 2}, {1, 1});
    CHECK(y.shape() == std::vector<int>({1, 2, 14, 14}));
}

TEST_CASE("conv_transpose2d identity kernel") {
    Rng rng(9);
    Tensor x = random_tensor(rng, {1, 1, 4, 5});
    Tensor w({1, 1, 1, 1}, {1.0});
    Tensor b({1}, {0.0});
    Tensor y = conv_transpose2d(x, w, b, {1, 1}, {0, 0}, {0, 0});
    REQUIRE(y.shape() == x.shape());
    for (size_t i = 0; i < x.numel(); ++i) {
        CHECK(y.at(i) == x.at(i));
    }
}

TEST_CASE("conv_transpose2d rejects output_padding >= stride") {
    Tensor x = Tensor::zeros({1, 1, 4, 4});
    Tensor w = Tensor::zeros({1, 1, 3, 3});
    Tensor b = Tensor::zeros({1});
    CHECK_THROWS_AS(conv_transpose2d(x, w, b, {2, 2}, {0, 0}, {2, 0}), parameter_error);
}

TEST_CASE("conv_transpose2d gradient matches central finite differences") {
    Rng rng(13);
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        Tensor x = random_tensor(rng, {2, 2, 5, 5});
        Tensor w = random_tensor(rng, {2, 3, 4, 4});
        Tensor b = random_tensor(rng, {3});
        auto fn = [](const std::vector<Tensor>& in) {
            Tensor y = conv_transpose2d(in[0], in[1], in[2], {2, 2}, {1, 1}, {1, 1});
            return sum_all(mul(y, y));
        };
        auto res = gradcheck_elementwise(fn, {x, w, b});
        worst = std::max(worst, res.max_rel_err);
    }
    CHECK(worst <= 1e-4);
}

TEST_CASE("max_pool2d brute-force window max") {
    std::vector<double> vals(16);
    for (int i = 0; i < 16; ++i) {
        vals[static_cast<size_t>(i)] = i + 1;
    }
    Tensor x({1, 1, 4, 4}, vals);
    Tensor y = max_pool2d(x, {2, 2}, {2, 2});
    REQUIRE(y.shape() == std::vector<int>({1, 1, 2, 2}));
    CHECK(y.at(0) == 6);
    CHECK(y.at(1) == 8);
    CHECK(y.at(2) == 14);
    CHECK(y.at(3) == 16);
}

TEST_CASE("max_pool2d constant input stays constant") {
    Tensor x = Tensor::full({1, 2, 5, 5}, 3.25);
    Tensor y = max_pool2d(x, {3, 3}, {2, 2});
    for (size_t i = 0; i < y.numel(); ++i) {
        CHECK(y.at(i) == 3.25);
    }
}

TEST_CASE("max_pool2d routes gradient to the argmax only") {
    Rng rng(17);
    Tensor x = separated_tensor(rng, {1, 1, 4, 4});
    x.set_requires_grad(true);
    GradTape::active().clear();
    Tensor y = max_pool2d(x, {2, 2}, {2, 2});
    backward(sum_all(y));
    int nonzero = 0;
    for (size_t i = 0; i < x.numel(); ++i) {
        if (x.grad_at(i) != 0.0) {
            ++nonzero;
            CHECK(x.grad_at(i) == 1.0);
        }
    }
    CHECK(nonzero == 4);

    auto fn = [](const std::vector<Tensor>& in) {
        Tensor p = max_pool2d(in[0], {2, 2}, {2, 2});
        return sum_all(mul(p, p));
    };
    auto res = gradcheck_elementwise(fn, {separated_tensor(rng, {1, 2, 6, 6})});
    CHECK(res.max_rel_err <= 1e-4);
}

TEST_CASE("max_pool2d ties break to the lowest linear index") {
    Tensor x({1, 1, 2, 2}, {5.0, 5.0, 5.0, 5.0});
    x.set_requires_grad(true);
    GradTape::active().clear();
    backward(sum_all(max_pool2d(x, {2, 2}, {1, 1})));
    CHECK(x.grad_at(0) == 1.0);
    CHECK(x.grad_at(1) == 0.0);
    CHECK(x.grad_at(2) == 0.0);
    CHECK(x.grad_at(3) == 0.0);
}

TEST_CASE("max_pool2d oversized kernel is a dimension error") {
    Tensor x = Tensor::zeros({1, 1, 2, 2});
    CHECK_THROWS_AS(max_pool2d(x, {3, 3}, {1, 1}), dimension_error);
}

TEST_CASE("avg_pool_global basics") {
    Tensor ones = Tensor::full({2, 3, 4, 4}, 1.0);
    Tensor y = avg_pool_global(ones);
    REQUIRE(y.shape() == std::vector<int>({2, 3, 1, 1}));
    for (size_t i = 0; i < y.numel(); ++i) {
        CHECK(y.at(i) == 1.0);
    }
    Tensor q({1, 1, 2, 2}, {1.0, 2.0, 3.0, 4.0});
    CHECK(avg_pool_global(q).at(0) == 2.5);

    q.set_requires_grad(true);
    GradTape::active().clear();
    backward(sum_all(avg_pool_global(q)));
    for (size_t i = 0; i < 4; ++i) {
        CHECK(q.grad_at(i) == doctest::Approx(0.25).epsilon(1e-12));
    }
}

TEST_CASE("fully_connected identity and shapes") {
    std::vector<double> eye(9, 0.0);
    eye[0] = eye[4] = eye[8] = 1.0;
    Tensor w({3, 3}, eye);
    Tensor b = Tensor::zeros({3});
    Rng rng(23);
    Tensor x = random_tensor(rng, {2, 3});
    Tensor y = fully_connected(x, w, b);
    for (size_t i = 0; i < x.numel(); ++i) {
        CHECK(y.at(i) == x.at(i));
    }

    // A 4096-feature row maps to 1000 outputs.
    Tensor big = Tensor::zeros({1, 4096});
    Tensor bw = Tensor::zeros({4096, 1000});
    Tensor bb = Tensor::zeros({1000});
    CHECK(fully_connected(big, bw, bb).shape() == std::vector<int>({1, 1000}));

    Tensor badw = Tensor::zeros({5, 3});
    CHECK_THROWS_AS(fully_connected(x, badw, b), dimension_error);
}

TEST_CASE("fully_connected gradient matches central finite differences") {
    Rng rng(29);
    auto fn = [](const std::vector<Tensor>& in) {
        Tensor y = fully_connected(in[0], in[1], in[2]);
        return sum_all(mul(y, y));
    };
    auto res = gradcheck_elementwise(fn, {random_tensor(rng, {3, 5}), random_tensor(rng, {5, 4}),
                                          random_tensor(rng, {4})});
    CHECK(res.max_rel_err <= 1e-4);
}

TEST_CASE("relu and sigmoid pointwise contracts") {
    Tensor x({3}, {-1.0, 0.0, 2.0});
    Tensor r = relu(x);
    CHECK(r.at(0) == 0.0);
    CHECK(r.at(1) == 0.0);
    CHECK(r.at(2) == 2.0);

    CHECK(sigmoid(Tensor({1}, {0.0})).at(0) == 0.5);
    Rng rng(31);
    Tensor z = random_tensor(rng, {64}, -30.0, 30.0);
    Tensor s = sigmoid(z);
    for (size_t i = 0; i < s.numel(); ++i) {
        CHECK(s.at(i) > 0.0);
        CHECK(s.at(i) < 1.0);
    }

    // relu subgradient at 0 is 0
    Tensor zero({1}, {0.0});
    zero.set_requires_grad(true);
    GradTape::active().clear();
    backward(sum_all(relu(zero)));
    CHECK(zero.grad_at(0) == 0.0);
}

TEST_CASE("backward on simple graphs") {
    Rng rng(37);
    Tensor x = random_tensor(rng, {6});
    x.set_requires_grad(true);
    GradTape::active().clear();
    backward(sum_all(x));
    for (size_t i = 0; i < x.numel(); ++i) {
        CHECK(x.grad_at(i) == 1.0);
    }

    Tensor y = random_tensor(rng, {5});
    y.set_requires_grad(true);
    GradTape::active().clear();
    backward(sum_all(mul(y, y)));
    for (size_t i = 0; i < y.numel(); ++i) {
        CHECK(y.grad_at(i) == doctest::Approx(2.0 * y.at(i)).epsilon(1e-12));
    }
}

TEST_CASE("backward rejects non-scalar loss and clears the tape") {
    Tensor x = Tensor::full({3}, 1.0, true);
    GradTape::active().clear();
    Tensor y = mul(x, x);
    CHECK_THROWS_AS(backward(y), contract_error);
    CHECK(GradTape::active().size() == 1);
    auto stats = backward(sum_all(y));
    CHECK(stats.ops_visited == 2);
    CHECK(GradTape::active().size() == 0);
    Tensor detached;
    {
        NoGradGuard ng;
        detached = sum_all(x);
    }
    CHECK_THROWS_AS(backward(detached), contract_error); // empty tape
}

TEST_CASE("composed conv-pool-fc graph matches finite differences") {
    Rng rng(41);
    double worst = 0.0;
    for (int trial = 0; trial < 3; ++trial) {
        Tensor x = separated_tensor(rng, {1, 1, 6, 6});
        Tensor w = random_tensor(rng, {2, 1, 3, 3});
        Tensor b = random_tensor(rng, {2});
        Tensor fw = random_tensor(rng, {8, 3});
        Tensor fb = random_tensor(rng, {3});
        auto fn = [](const std::vector<Tensor>& in) {
            Tensor c = relu(conv2d(in[0], in[1], in[2], {1, 1}, {1, 1}));
            Tensor p = max_pool2d(c, {3, 3}, {3, 3});
            Tensor f = reshape(p, {1, 8});
            Tensor o = fully_connected(f, in[3], in[4]);
            return sum_all(mul(o, o));
        };
        auto res = gradcheck_elementwise(fn, {x, w, b, fw, fb});
        worst = std::max(worst, res.max_rel_err);
    }
    CHECK(worst <= 1e-4);
}

TEST_CASE("forward determinism is bit exact") {
    Rng rng(43);
    Tensor x = random_tensor(rng, {2, 3, 8, 8});
    Tensor w = random_tensor(rng, {4, 3, 3, 3});
    Tensor b = random_tensor(rng, {4});
    NoGradGuard ng;
    Tensor y1 = conv2d(x, w, b, {1, 1}, {1, 1});
    Tensor y2 = conv2d(x, w, b, {1, 1}, {1, 1});
    for (size_t i = 0; i < y1.numel(); ++i) {
        CHECK(y1.at(i) == y2.at(i));
    }
}

TEST_CASE("table row compositions type-check symbolically") {
    // Encoder rows on a 257x598 input.
    int h = 257, w = 598;
    h = conv_out_dim(h, 7, 2, 1), w = conv_out_dim(w, 7, 2, 1);
    CHECK(h == 127);
    CHECK(w == 297);
    h = conv_out_dim(h, 3, 2, 0), w = conv_out_dim(w, 3, 2, 0);
    h = conv_out_dim(h, 5, 2, 1), w = conv_out_dim(w, 5, 2, 1);
    h = conv_out_dim(h, 3, 2, 0), w = conv_out_dim(w, 3, 2, 0);
    CHECK(h == 15);
    CHECK(w == 36);
    h = conv_out_dim(h, 5, 3, 0), w = conv_out_dim(w, 3, 2, 0);
    CHECK(h == 4);
    CHECK(w == 17);

    // Decoder rows on a 7x7 seed map: four stride-2 rows reach 112.
    int d = 7;
    d = conv_transpose_out_dim(d, 5, 2, 2, 1);
    CHECK(d == 14);
    CHECK(conv_transpose_out_dim(14, 5, 1, 2, 0) == 14);
    d = conv_transpose_out_dim(d, 5, 2, 2, 1);
    d = conv_transpose_out_dim(d, 5, 2, 2, 1);
    d = conv_transpose_out_dim(d, 5, 2, 2, 1);
    CHECK(d == 112);
    CHECK(conv_transpose_out_dim(d, 5, 2, 2, 1) == 224);
}

TEST_CASE("nan surfacing is an error, never silent") {
    Tensor x({2}, {1.0, -1.0});
    CHECK_THROWS_AS(pow_scalar(x, 0.5), numeric_error);
    Tensor a({1}, {1.0});
    Tensor z({1}, {0.0});
    CHECK_THROWS_AS(div(a, z), numeric_error);
}

TEST_CASE("f32 scalar mode narrows kernel outputs") {
    Tensor x({1}, {0.1});
    {
        ScalarModeGuard guard(ScalarMode::f32);
        Tensor y = add_scalar(x, 0.2);
        CHECK(y.at(0) == static_cast<double>(static_cast<float>(0.1 + 0.2)));
    }
    Tensor y64 = add_scalar(x, 0.2);
    CHECK(y64.at(0) == 0.1 + 0.2);
}

TEST_CASE("independent tapes on distinct threads") {
    double g1 = 0.0, g2 = 0.0;
    std::thread t1([&] {
        Tensor x = Tensor::full({4}, 2.0, true);
        GradTape::active().clear();
        backward(sum_all(mul(x, x)));
        g1 = x.grad_at(0);
    });
    std::thread t2([&] {
        Tensor x = Tensor::full({4}, 3.0, true);
        GradTape::active().clear();
        backward(sum_all(mul(x, x)));
        g2 = x.grad_at(0);
    });
    t1.join();
    t2.join();
    CHECK(g1 == doctest::Approx(4.0));
    CHECK(g2 == doctest::Approx(6.0));
}

TEST_CASE("broadcast binary ops reduce gradients over broadcast axes") {
    Rng rng(47);
    auto fn = [](const std::vector<Tensor>& in) {
        return sum_all(mul(mul(in[0], in[1]), in[0]));
    };
    auto res = gradcheck_elementwise(fn, {random_tensor(rng, {2, 3, 2, 2}),
                                          random_tensor(rng, {2, 3, 1, 1})});
    CHECK(res.max_rel_err <= 1e-4);

    auto res2 = gradcheck_elementwise(fn, {random_tensor(rng, {2, 3, 2, 2}),
                                           random_tensor(rng, {2, 1, 2, 2})});
    CHECK(res2.max_rel_err <= 1e-4);
}
