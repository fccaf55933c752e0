#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "snn/autodiff.hpp"

namespace snn::ops {

/// [m x k] . [k x n] -> [m x n]
Var matmul(const Var& a, const Var& b);

/// Cross-correlation (no kernel flip). `input` is [c_in, h, w] or
/// [batch, c_in, h, w]; `kernels` is [c_out, c_in, kh, kw].
Var conv2d(const Var& input, const Var& kernels, std::size_t stride, std::size_t padding);

std::size_t conv_output_size(std::size_t in, std::size_t kernel, std::size_t stride,
                             std::size_t padding);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var add_scalar(const Var& a, double offset);

/// Adds a [n] row vector to every row of an [m x n] matrix.
Var add_row_vector(const Var& matrix, const Var& row);

Var reshape(const Var& a, Shape shape);
/// Stack equally-shaped values along a new leading axis.
Var stack(std::span<const Var> parts);

Var sum(const Var& a);
Var mean_over_axis(const Var& a, std::size_t axis);

/// Mean of squared differences over all elements.
Var mse_loss(const Var& pred, const Var& target);

/// Mean over the batch of -log softmax(logits)[label]; logits are [batch x classes].
Var cross_entropy_loss(const Var& logits, std::span<const std::size_t> labels);

}  // namespace snn::ops
