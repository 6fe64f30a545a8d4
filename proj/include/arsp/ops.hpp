#pragma once

#include <utility>
#include <vector>

#include "arsp/tensor.hpp"

namespace arsp {

using Dim2 = std::pair<int, int>;

// Output-extent arithmetic, shared by the kernels and the symbolic shape
// traces so they cannot drift apart.
int conv_out_dim(int in, int k, int s, int p);
int conv_transpose_out_dim(int in, int k, int s, int p, int op);

// input [N,C,H,W], weight [K,C,kh,kw], bias [K].
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, Dim2 stride,
              Dim2 padding);

// input [N,C,H,W], weight [C,K,kh,kw], bias [K]. output_padding < stride.
Tensor conv_transpose2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
                        Dim2 stride, Dim2 padding, Dim2 output_padding);

// No implicit padding; gradient routes to the argmax cell, ties broken to
// the lowest linear index.
Tensor max_pool2d(const Tensor& input, Dim2 kernel, Dim2 stride);
Tensor avg_pool2d(const Tensor& input, Dim2 kernel, Dim2 stride);

// [N,C,H,W] -> [N,C,1,1]
Tensor avg_pool_global(const Tensor& input);
Tensor max_pool_global(const Tensor& input);

// [N,C,H,W] -> [N,1,H,W]
Tensor channel_mean(const Tensor& input);
Tensor channel_max(const Tensor& input);

// input [N,D], weight [D,E], bias [E] -> [N,E]
Tensor fully_connected(const Tensor& input, const Tensor& weight, const Tensor& bias);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// Elementwise with same-rank broadcasting (each axis equal or 1).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);
Tensor abs(const Tensor& a);

// Elementwise a^p for a >= 0. The subgradient at a == 0 is defined as 0.
Tensor pow_scalar(const Tensor& a, double p);

Tensor sum_all(const Tensor& a);  // -> shape {1}
Tensor mean_all(const Tensor& a); // -> shape {1}
Tensor sum_cols(const Tensor& a); // [N,D] -> [N,1]

Tensor reshape(const Tensor& a, std::vector<int> shape);

// Concatenate along axis 1; all other dims must agree.
Tensor concat_channel(const Tensor& a, const Tensor& b);

// logits [N,K], labels in [0,K). Returns mean cross-entropy, shape {1}.
Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels);

// Row-wise softmax probabilities, inference only (never recorded).
std::vector<double> softmax_rows(const Tensor& logits);

} // namespace arsp
