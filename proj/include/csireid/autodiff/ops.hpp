#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "csireid/autodiff/tensor.hpp"
#include "csireid/rng.hpp"

namespace csireid::ad {

// Shape rules: elementwise binary ops take equal shapes, or a right-hand
// operand of shape 1 x n (row broadcast) or 1 x 1 (scalar broadcast).

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

/// axis 0 stacks rows, axis 1 stacks columns.
Tensor concat(std::span<const Tensor> parts, int axis);
Tensor slice(const Tensor& x, int axis, std::size_t start, std::size_t length);
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows);
Tensor transpose(const Tensor& x);

/// axis 0 -> 1 x cols, axis 1 -> rows x 1.
Tensor mean_axis(const Tensor& x, int axis);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);

Tensor softmax(const Tensor& x, int axis = 1);

/// Normalizes each row over the last axis, then applies gain and bias (1 x n).
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

/// Inverted dropout. Identity (the same tensor) when !training or keep_prob == 1.
Tensor dropout(const Tensor& x, double keep_prob, Rng& rng, bool training);

/// Divides each row (axis 1) or column (axis 0) by its l2 norm. Throws
/// NumericError on a zero norm.
Tensor l2_normalize(const Tensor& x, int axis = 1);

}  // namespace csireid::ad
