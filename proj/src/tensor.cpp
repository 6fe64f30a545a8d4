#include "arsp/tensor.hpp"

#include <atomic>
#include <cmath>
#include <string>

#include "arsp/errors.hpp"

namespace arsp {

namespace {

std::atomic<int> g_scalar_mode{static_cast<int>(ScalarMode::f64)};
thread_local int g_no_grad_depth = 0;

} // namespace

void set_scalar_mode(ScalarMode m) { g_scalar_mode.store(static_cast<int>(m)); }

ScalarMode scalar_mode() { return static_cast<ScalarMode>(g_scalar_mode.load()); }

size_t shape_numel(const std::vector<int>& shape) {
    size_t n = 1;
    for (int d : shape) {
        if (d <= 0) {
            throw dimension_error("tensor shape has non-positive dim " + std::to_string(d));
        }
        n *= static_cast<size_t>(d);
    }
    return n;
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data, bool requires_grad) {
    if (shape_numel(shape) != data.size()) {
        throw dimension_error("tensor data length " + std::to_string(data.size()) +
                              " does not match shape product " +
                              std::to_string(shape_numel(shape)));
    }
    impl_ = std::make_shared<TensorImpl>();
    impl_->shape = std::move(shape);
    impl_->data = std::move(data);
    impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    size_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
    size_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, quantized(value)), requires_grad);
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {quantized(value)}); }

const std::vector<int>& Tensor::shape() const { return impl_->shape; }

int Tensor::rank() const { return static_cast<int>(impl_->shape.size()); }

int Tensor::dim(int axis) const {
    if (axis < 0 || axis >= rank()) {
        throw dimension_error("axis " + std::to_string(axis) + " out of range for rank " +
                              std::to_string(rank()));
    }
    return impl_->shape[static_cast<size_t>(axis)];
}

size_t Tensor::numel() const { return impl_->data.size(); }

std::span<const double> Tensor::data() const { return impl_->data; }

double Tensor::at(size_t i) const { return impl_->data[i]; }

double Tensor::value() const {
    if (!defined() || numel() != 1) {
        throw contract_error("value() requires a scalar tensor");
    }
    return impl_->data[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool v) {
    impl_->requires_grad = v;
    return *this;
}

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

std::span<const double> Tensor::grad() const {
    if (!has_grad()) {
        return {};
    }
    return impl_->grad;
}

double Tensor::grad_at(size_t i) const {
    if (!has_grad()) {
        return 0.0;
    }
    return impl_->grad[i];
}

void Tensor::zero_grad() {
    if (impl_) {
        impl_->grad.clear();
    }
}

Tensor Tensor::detach() const {
    return Tensor(impl_->shape, impl_->data, false);
}

GradTape& GradTape::active() {
    thread_local GradTape tape;
    return tape;
}

void GradTape::record(std::function<void()> backward_fn) {
    nodes_.push_back(std::move(backward_fn));
}

bool grad_enabled() { return g_no_grad_depth == 0; }

NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }

BackwardStats backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1) {
        throw contract_error("backward() requires a scalar loss tensor");
    }
    GradTape& tape = GradTape::active();
    if (tape.size() == 0) {
        throw contract_error("backward() on an empty tape");
    }
    TensorImpl& li = *loss.impl();
    ensure_grad(li);
    li.grad[0] = 1.0;

    BackwardStats stats;
    auto& nodes = tape.nodes();
    for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
        (*it)();
        ++stats.ops_visited;
    }
    tape.clear();
    return stats;
}

void quantize_inplace(std::vector<double>& v) {
    if (scalar_mode() != ScalarMode::f32) {
        return;
    }
    for (double& x : v) {
        x = static_cast<double>(static_cast<float>(x));
    }
}

void ensure_grad(TensorImpl& t) {
    if (t.grad.empty()) {
        t.grad.assign(t.data.size(), 0.0);
    }
}

void check_finite(const TensorImpl& t, const char* op) {
    for (double v : t.data) {
        if (!std::isfinite(v)) {
            throw numeric_error(std::string("non-finite value produced by ") + op);
        }
    }
}

} // namespace arsp
