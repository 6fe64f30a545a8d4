#pragma once

#include <stdexcept>
#include <string>

namespace arsp {

// Error taxonomy shared by the whole library. Each contract failure maps
// onto exactly one of these so callers (and tests) can distinguish them.

// Tensor/layer shape disagreements. Messages name the offending axis.
struct dimension_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Illegal hyperparameter (even spatial kernel, output_padding >= stride, ...).
struct parameter_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad user-supplied data (empty audio, zero vector into a cosine, ...).
struct input_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Object not in the required lifecycle state (untrained model, missing prior).
struct state_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// API misuse that violates a documented precondition (non-scalar loss, ...).
struct contract_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// NaN/Inf surfaced by a kernel. Never silent.
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File format / filesystem failures.
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace arsp
