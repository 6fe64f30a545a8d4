#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace arsp {

// Runtime scalar precision. f64 is the default and is mandatory for gradient
// checking; f32 narrows every kernel result (and parameter update) to float
// precision, which makes the f32 checkpoint format lossless for models that
// trained in this mode. A runtime switch, never a compile-time fork.
enum class ScalarMode { f64, f32 };

void set_scalar_mode(ScalarMode m);
ScalarMode scalar_mode();

struct ScalarModeGuard {
    explicit ScalarModeGuard(ScalarMode m) : prev_(scalar_mode()) { set_scalar_mode(m); }
    ~ScalarModeGuard() { set_scalar_mode(prev_); }
    ScalarModeGuard(const ScalarModeGuard&) = delete;
    ScalarModeGuard& operator=(const ScalarModeGuard&) = delete;

  private:
    ScalarMode prev_;
};

struct TensorImpl {
    std::vector<int> shape;
    std::vector<double> data;
    std::vector<double> grad; // empty until the first backward accumulation
    bool requires_grad = false;
};

// Dense n-d array. Values are immutable once created; only the grad buffer
// mutates. Copying a Tensor copies a handle, not the storage.
class Tensor {
  public:
    Tensor() = default;
    Tensor(std::vector<int> shape, std::vector<double> data, bool requires_grad = false);

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    static Tensor full(std::vector<int> shape, double value, bool requires_grad = false);
    static Tensor scalar(double value);

    bool defined() const { return impl_ != nullptr; }
    const std::vector<int>& shape() const;
    int rank() const;
    int dim(int axis) const;
    size_t numel() const;

    std::span<const double> data() const;
    double at(size_t i) const;
    // Scalar fetch; contract_error when numel() != 1.
    double value() const;

    bool requires_grad() const;
    Tensor& set_requires_grad(bool v);

    bool has_grad() const;
    std::span<const double> grad() const; // empty span when no grad accumulated
    double grad_at(size_t i) const;
    void zero_grad();

    // Same values, detached from any graph.
    Tensor detach() const;

    std::shared_ptr<TensorImpl> impl() const { return impl_; }

  private:
    std::shared_ptr<TensorImpl> impl_;
};

// Ordered record of executed primitives. Thread-local, so independent graphs
// on different threads never interact. backward() replays it once, in
// reverse execution order, then clears it.
class GradTape {
  public:
    static GradTape& active();

    void record(std::function<void()> backward_fn);
    size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }
    std::vector<std::function<void()>>& nodes() { return nodes_; }

  private:
    std::vector<std::function<void()>> nodes_;
};

// True when ops should record onto the tape. NoGradGuard disables recording
// for its scope (inference paths).
bool grad_enabled();

struct NoGradGuard {
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

struct BackwardStats {
    size_t ops_visited = 0;
};

// Seeds d(loss)/d(loss) = 1, replays the active tape in reverse and clears
// it. Every requires_grad leaf reachable from `loss` ends up with its grad
// populated. contract_error on non-scalar loss or an empty tape.
BackwardStats backward(const Tensor& loss);

// --- kernel support -------------------------------------------------------

inline double quantized(double v) {
    return scalar_mode() == ScalarMode::f32 ? static_cast<double>(static_cast<float>(v)) : v;
}

void quantize_inplace(std::vector<double>& v);

// Allocates a zeroed grad buffer on demand.
void ensure_grad(TensorImpl& t);

// Throws numeric_error when t holds NaN/Inf. Called by every kernel on its
// output so bad values surface at the op that produced them.
void check_finite(const TensorImpl& t, const char* op);

size_t shape_numel(const std::vector<int>& shape);

} // namespace arsp
