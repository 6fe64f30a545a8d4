#pragma once

// Finite-difference gradient checking, test-side only. Independent of the
// autodiff path it verifies: forward passes run under NoGradGuard on
// perturbed copies of the inputs.

#include <cmath>
#include <functional>
#include <vector>

#include "arsp/tensor.hpp"
#include "arsp/util.hpp"

namespace arsp::testing {

inline double rel_err(double a, double b) {
    const double denom = std::max({std::fabs(a), std::fabs(b), 1e-7});
    return std::fabs(a - b) / denom;
}

// Scalar-valued function of a set of input tensors. The callable must build
// its graph from exactly the tensors passed in.
using ScalarFn = std::function<Tensor(const std::vector<Tensor>&)>;

struct GradCheckResult {
    double max_rel_err = 0.0;
    size_t checked = 0;
};

// Central differences, element by element, h = 1e-5. Returns the worst
// relative error over every element of every input.
inline GradCheckResult gradcheck_elementwise(const ScalarFn& fn, std::vector<Tensor> inputs,
                                             double h = 1e-5) {
    for (auto& t : inputs) {
        t.set_requires_grad(true);
        t.zero_grad();
    }
    GradTape::active().clear();
    Tensor loss = fn(inputs);
    backward(loss);

    std::vector<std::vector<double>> analytic;
    analytic.reserve(inputs.size());
    for (auto& t : inputs) {
        std::vector<double> g(t.numel(), 0.0);
        for (size_t i = 0; i < t.numel(); ++i) {
            g[i] = t.grad_at(i);
        }
        analytic.push_back(std::move(g));
    }

    GradCheckResult res;
    NoGradGuard ng;
    for (size_t which = 0; which < inputs.size(); ++which) {
        const Tensor& t = inputs[which];
        for (size_t i = 0; i < t.numel(); ++i) {
            auto eval_at = [&](double delta) {
                std::vector<Tensor> probe;
                probe.reserve(inputs.size());
                for (size_t k = 0; k < inputs.size(); ++k) {
                    if (k == which) {
                        std::vector<double> d(inputs[k].data().begin(), inputs[k].data().end());
                        d[i] += delta;
                        probe.emplace_back(inputs[k].shape(), std::move(d));
                    } else {
                        probe.push_back(inputs[k].detach());
                    }
                }
                return fn(probe).value();
            };
            const double fd = (eval_at(h) - eval_at(-h)) / (2.0 * h);
            res.max_rel_err = std::max(res.max_rel_err, rel_err(fd, analytic[which][i]));
            ++res.checked;
        }
    }
    return res;
}

// Central differences along one random unit direction spanning all inputs.
// Used where per-element probing is too expensive (whole networks). Piecewise
// kinks (relu, max) inject O(h) noise whenever the probe interval straddles
// one, so the step shrinks until agreement stabilizes; a genuinely wrong
// analytic gradient disagrees at every step size.
inline GradCheckResult gradcheck_directional(const ScalarFn& fn, std::vector<Tensor> inputs,
                                             Rng& rng, double h = 1e-5) {
    for (auto& t : inputs) {
        t.set_requires_grad(true);
        t.zero_grad();
    }
    GradTape::active().clear();
    Tensor loss = fn(inputs);
    backward(loss);

    std::vector<std::vector<double>> dirs;
    double norm2 = 0.0;
    for (auto& t : inputs) {
        std::vector<double> v(t.numel());
        for (double& x : v) {
            x = rng.gaussian();
            norm2 += x * x;
        }
        dirs.push_back(std::move(v));
    }
    const double inv_norm = 1.0 / std::sqrt(norm2);
    double analytic = 0.0;
    for (size_t k = 0; k < inputs.size(); ++k) {
        for (size_t i = 0; i < dirs[k].size(); ++i) {
            dirs[k][i] *= inv_norm;
            analytic += dirs[k][i] * inputs[k].grad_at(i);
        }
    }

    NoGradGuard ng;
    auto eval_at = [&](double delta) {
        std::vector<Tensor> probe;
        probe.reserve(inputs.size());
        for (size_t k = 0; k < inputs.size(); ++k) {
            std::vector<double> d(inputs[k].data().begin(), inputs[k].data().end());
            for (size_t i = 0; i < d.size(); ++i) {
                d[i] += delta * dirs[k][i];
            }
            probe.emplace_back(inputs[k].shape(), std::move(d));
        }
        return fn(probe).value();
    };

    GradCheckResult res;
    res.max_rel_err = 1.0 / 0.0;
    res.checked = 1;
    for (double step = h; step >= h * 1e-3; step *= 0.1) {
        const double fd = (eval_at(step) - eval_at(-step)) / (2.0 * step);
        res.max_rel_err = std::min(res.max_rel_err, rel_err(fd, analytic));
        if (res.max_rel_err <= 1e-6) {
            break;
        }
    }
    return res;
}

inline Tensor random_tensor(Rng& rng, std::vector<int> shape, double lo = -1.0, double hi = 1.0) {
    size_t n = shape_numel(shape);
    std::vector<double> d(n);
    for (double& v : d) {
        v = rng.uniform(lo, hi);
    }
    return Tensor(std::move(shape), std::move(d));
}

} // namespace arsp::testing
