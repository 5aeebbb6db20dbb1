// Copyright 2026 The lldx Authors
// SPDX-License-Identifier: Apache-2.0

#include "lldx/numeric/layers.hpp"

#include <algorithm>
#include <cmath>

#include "lldx/error.hpp"

namespace lldx {

void ParamSlot::append_rows(const Tensor2& extra) {
  value.append_rows(extra);
  grad.append_rows(Tensor2(extra.rows(), extra.cols()));
}

void init_uniform_fan_in(Tensor2& t, std::size_t fan_in, RngStream& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  for (double& v : t.flat()) v = rng.uniform(-bound, bound);
}

namespace {

void check_linear_shapes(std::size_t x_len, const ParamSlot& weight, const ParamSlot* bias) {
  if (x_len != weight.rows()) {
    throw DimensionError("linear: input of length " + std::to_string(x_len) +
                         " does not conform to weight " + weight.name + " " +
                         weight.value.shape_str());
  }
  if (bias && (bias->rows() != 1 || bias->cols() != weight.cols())) {
    throw DimensionError("linear: bias " + bias->value.shape_str() +
                         " does not conform to weight " + weight.value.shape_str());
  }
}

}  // namespace

Vec linear_forward(std::span<const double> x, const ParamSlot& weight, const ParamSlot* bias) {
  check_linear_shapes(x.size(), weight, bias);
  Vec y(weight.cols(), 0.0);
  if (bias) std::copy(bias->value.flat().begin(), bias->value.flat().end(), y.begin());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] != 0.0) axpy(x[i], weight.value.row(i), y);
  }
  return y;
}

void linear_backward(std::span<const double> x, std::span<const double> dy, ParamSlot& weight,
                     ParamSlot* bias, std::span<double> dx) {
  check_linear_shapes(x.size(), weight, bias);
  if (dy.size() != weight.cols()) {
    throw DimensionError("linear: output gradient of length " + std::to_string(dy.size()) +
                         " does not conform to weight " + weight.value.shape_str());
  }
  if (weight.accumulates()) {
    for (std::size_t i = 0; i < x.size(); ++i) axpy(x[i], dy, weight.grad.row(i));
  }
  if (bias && bias->accumulates()) axpy(1.0, dy, bias->grad.flat());
  if (!dx.empty()) {
    for (std::size_t i = 0; i < x.size(); ++i) dx[i] += dot(weight.value.row(i), dy);
  }
}

Vec rows_forward(std::span<const double> x, const ParamSlot& weight) {
  if (x.size() != weight.cols()) {
    throw DimensionError("rows_forward: input of length " + std::to_string(x.size()) +
                         " does not conform to weight " + weight.name + " " +
                         weight.value.shape_str());
  }
  Vec y(weight.rows());
  for (std::size_t l = 0; l < y.size(); ++l) y[l] = dot(weight.value.row(l), x);
  return y;
}

void rows_backward(std::span<const double> x, std::span<const double> dy, ParamSlot& weight,
                   std::span<double> dx) {
  if (x.size() != weight.cols() || dy.size() != weight.rows()) {
    throw DimensionError("rows_backward: shapes x=" + std::to_string(x.size()) +
                         " dy=" + std::to_string(dy.size()) + " do not conform to weight " +
                         weight.value.shape_str());
  }
  for (std::size_t l = 0; l < dy.size(); ++l) {
    if (dy[l] == 0.0) continue;
    if (weight.accumulates()) axpy(dy[l], x, weight.grad.row(l));
    if (!dx.empty()) axpy(dy[l], weight.value.row(l), dx);
  }
}

Vec softmax(std::span<const double> logits) {
  if (logits.empty()) throw EmptyInputError("softmax over an empty vector");
  const double m = *std::max_element(logits.begin(), logits.end());
  Vec p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

CrossEntropy softmax_cross_entropy(std::span<const double> logits, std::size_t label) {
  if (label >= logits.size()) {
    throw IndexError("label " + std::to_string(label) + " out of range for " +
                     std::to_string(logits.size()) + " logits");
  }
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double v : logits) z += std::exp(v - m);
  const double log_z = m + std::log(z);

  CrossEntropy out;
  out.loss = log_z - logits[label];
  out.grad_logits.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out.grad_logits[i] = std::exp(logits[i] - log_z);
  }
  out.grad_logits[label] -= 1.0;
  return out;
}

void sgd_step(std::span<ParamSlot* const> slots, double learning_rate) {
  for (const ParamSlot* s : slots) {
    if (!s->frozen && !s->grad.all_finite()) {
      throw DivergenceError("non-finite gradient in parameter '" + s->name + "'");
    }
  }
  for (ParamSlot* s : slots) {
    if (!s->frozen) {
      auto v = s->value.flat();
      auto g = s->grad.flat();
      for (std::size_t i = 0; i < v.size(); ++i) v[i] -= learning_rate * g[i];
    }
    s->zero_grad();
  }
}

}  // namespace lldx
