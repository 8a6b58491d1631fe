#pragma once

#include "rsit/autograd.hpp"

// Differentiable operations on Var. Feature maps are [C, H, W].
namespace rsit::ops {

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
/// Sum of scalars weighted by `weights` (both the same length).
Var weighted_sum(const std::vector<Var>& terms, const std::vector<double>& weights);

Var reshape(const Var& a, Shape shape);
Var mean(const Var& a);

Var relu(const Var& a);
Var leaky_relu(const Var& a, double slope);
Var tanh(const Var& a);
Var sigmoid(const Var& a);

/// bias may be undefined.
Var conv2d(const Var& x, const Var& w, const Var& bias, int stride, int pad_h, int pad_w);
Var conv_transpose2d(const Var& x, const Var& w, const Var& bias, int stride, int pad,
                     int output_pad);
Var reflection_pad2d(const Var& x, int pad);

/// Per-channel normalization over H*W with population variance; gamma/beta ([C]) optional.
Var instance_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);

Var max_pool2d(const Var& x, int k, int stride);
Var avg_pool2d(const Var& x, int k, int stride);

/// mean((a - target)^2) over all elements.
Var squared_error_to(const Var& a, double target);
/// mean(|a - b|) over all elements; subgradient 0 where a == b.
Var mean_abs_diff(const Var& a, const Var& b);

}  // namespace rsit::ops
