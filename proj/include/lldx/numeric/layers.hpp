// Copyright 2026 The lldx Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "lldx/numeric/rng.hpp"
#include "lldx/numeric/tensor.hpp"

namespace lldx {

/// A trainable tensor with its gradient accumulator. Frozen slots neither
/// accumulate gradients nor move under sgd_step.
struct ParamSlot {
  std::string name;
  Tensor2 value;
  Tensor2 grad;
  bool frozen = false;

  ParamSlot() = default;
  ParamSlot(std::string name, std::size_t rows, std::size_t cols)
      : name(std::move(name)), value(rows, cols), grad(rows, cols) {}
  ParamSlot(std::string name, Tensor2 v)
      : name(std::move(name)), value(std::move(v)), grad(value.rows(), value.cols()) {}

  std::size_t rows() const { return value.rows(); }
  std::size_t cols() const { return value.cols(); }
  bool accumulates() const { return !frozen; }
  void zero_grad() { grad.fill(0.0); }
  void append_rows(const Tensor2& extra);
};

/// Fills with uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)).
void init_uniform_fan_in(Tensor2& t, std::size_t fan_in, RngStream& rng);

/// y = W^T x (+ b) with W stored [dim_in x dim_out] and b [1 x dim_out].
Vec linear_forward(std::span<const double> x, const ParamSlot& weight,
                   const ParamSlot* bias = nullptr);

/// Accumulates W.grad += x dy^T (and b.grad += dy) unless frozen; adds W dy
/// into dx when dx is non-empty.
void linear_backward(std::span<const double> x, std::span<const double> dy,
                     ParamSlot& weight, ParamSlot* bias, std::span<double> dx);

/// Row-major classifier form: y_l = <W_l, x> with W stored [dim_out x dim_in].
Vec rows_forward(std::span<const double> x, const ParamSlot& weight);
void rows_backward(std::span<const double> x, std::span<const double> dy, ParamSlot& weight,
                   std::span<double> dx);

/// Numerically stable softmax.
Vec softmax(std::span<const double> logits);

struct CrossEntropy {
  double loss = 0.0;
  Vec grad_logits;
};

/// -log softmax(logits)[label] and its gradient softmax - onehot.
CrossEntropy softmax_cross_entropy(std::span<const double> logits, std::size_t label);

/// value -= lr * grad on non-frozen slots, then zeroes every gradient.
/// Throws DivergenceError before touching anything if a gradient is non-finite.
void sgd_step(std::span<ParamSlot* const> slots, double learning_rate);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace lldx
