#pragma once

// Differentiable tensor operations. Binary elementwise ops accept equal shapes
// or a single-element operand on either side; anything else is a
// DimensionError. Images use channel-last layout: [H, W, C].

#include <cstddef>
#include <span>
#include <vector>

#include "ember/tensor.hpp"

namespace ember::ops {

enum class UnaryOp { Sigmoid, Tanh, Relu, Exp, Softplus, Log, Square, Abs, Sqrt, Neg };
enum class BinaryOp { Add, Sub, Mul, Div };
enum class ReduceOp { Sum, Mean };

Tensor apply(UnaryOp op, const Tensor& x);
Tensor apply(BinaryOp op, const Tensor& a, const Tensor& b);
/// Reduces over `axes` (all axes when empty); reduced axes are dropped.
Tensor reduce(ReduceOp op, const Tensor& x, std::span<const std::size_t> axes = {});

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
/// Throws DomainError on a zero divisor.
Tensor div(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor softplus(const Tensor& x);
/// Throws DomainError on nonpositive input.
Tensor log(const Tensor& x);
Tensor square(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor neg(const Tensor& x);

Tensor sum(const Tensor& x, std::span<const std::size_t> axes = {});
Tensor mean(const Tensor& x, std::span<const std::size_t> axes = {});

Tensor reshape(const Tensor& x, Shape shape);
/// Stacks equally shaped tensors along a new leading axis.
Tensor stack(std::span<const Tensor> parts);
/// x[index] along the leading axis.
Tensor select(const Tensor& x, std::size_t index);
/// Concatenates along the last axis; leading dims must agree.
Tensor concat_last(std::span<const Tensor> parts);
/// x[..., begin:end] along the last axis.
Tensor slice_last(const Tensor& x, std::size_t begin, std::size_t end);

/// Stride-1 convolution with zero "same" padding.
/// input [H, W, Cin], kernel [k, k, Cin, Cout] with k odd, bias [Cout].
Tensor conv2d_same(const Tensor& input, const Tensor& kernel, const Tensor& bias);

struct BatchNormState {
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.9;
  double eps = 1e-5;
};

/// Per-channel normalization of x [H, W, C] with affine gamma/beta [C].
/// Training mode normalizes with the spatial statistics of x and folds them
/// into the running averages; inference mode uses the running averages.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState& state,
                  bool training);

/// Softmax over the last axis.
Tensor softmax_last(const Tensor& x);

/// scale * A * A^T for A [T, N]; result [T, T].
Tensor gram(const Tensor& a, double scale);

/// Mean over cells of -log sum_j softmax(logits)_j * Normal(target; mu_j, sigma_j).
/// logits, mu, sigma share shape [..., k]; target has the leading shape [...].
/// Log-sum-exp stabilized. Throws DomainError if any sigma <= 0.
Tensor mixture_nll(const Tensor& logits, const Tensor& mu, const Tensor& sigma,
                   const Tensor& target);

}  // namespace ember::ops
