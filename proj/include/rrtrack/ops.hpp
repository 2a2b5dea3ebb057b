#pragma once

// Differentiable operations. Every function computes its result immediately
// and, when the graph is recording and some input requires a gradient, tapes
// the matching backward rule.

#include <cstddef>
#include <span>
#include <vector>

#include "rrtrack/autodiff.hpp"

namespace rrtrack::ops {

/// Direct 2-D convolution with zero padding.
/// input [N,C,H,W], kernel [K,C,kh,kw], bias [K] -> [N,K,H',W'].
Tensor conv2d(Graph& g, const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride,
              std::size_t pad);

/// Non-overlapping 2x2 max pool. Ties route the gradient to the first
/// element of the window in row-major order.
Tensor maxpool2x2(Graph& g, const Tensor& input);

/// input [N,D] * weight [D,M] + bias [M].
Tensor fully_connected(Graph& g, const Tensor& input, const Tensor& weight, const Tensor& bias);

/// input [N,D] * weight [D,M] without bias.
Tensor matmul(Graph& g, const Tensor& input, const Tensor& weight);

/// Parametric ReLU with one learnable slope per channel (axis 1).
Tensor prelu(Graph& g, const Tensor& input, const Tensor& slope);

Tensor tanh(Graph& g, const Tensor& x);
Tensor sigmoid(Graph& g, const Tensor& x);

/// Elementwise sum. `b` may also be a vector matching the last axis of `a`,
/// in which case it is broadcast over the leading axes.
Tensor add(Graph& g, const Tensor& a, const Tensor& b);

/// Elementwise product, with the same broadcast rule as add().
Tensor mul(Graph& g, const Tensor& a, const Tensor& b);

Tensor scale(Graph& g, const Tensor& x, double factor);

/// Concatenate along `axis`; all other dims must agree.
Tensor concat(Graph& g, std::span<const Tensor> parts, std::size_t axis);

/// Same data, new dims (product must match).
Tensor reshape(Graph& g, const Tensor& x, Shape dims);

/// [N, ...] -> [N, prod(...)].
Tensor flatten(Graph& g, const Tensor& x);

Tensor sum(Graph& g, const Tensor& x);

/// Mean absolute difference over all elements; target carries no gradient.
/// The subgradient at an exact tie is 0.
Tensor l1_loss(Graph& g, const Tensor& pred, const Tensor& target);

/// Mean of scalar tensors.
Tensor mean_of(Graph& g, std::span<const Tensor> scalars);

}  // namespace rrtrack::ops
