// Copyright 2026 The lldx Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "lldx/numeric/layers.hpp"

namespace lldx {

/// Standard four-gate LSTM without peepholes. Gate blocks are laid out
/// [i | f | g | o] along the 4H axis:
///   i = sigmoid(.), f = sigmoid(.), g = tanh(.), o = sigmoid(.)
///   c_t = f * c_{t-1} + i * g,  h_t = o * tanh(c_t)
struct LstmWeights {
  ParamSlot input;      // [d x 4H]
  ParamSlot recurrent;  // [H x 4H]
  ParamSlot bias;       // [1 x 4H]

  LstmWeights() = default;
  LstmWeights(const std::string& prefix, std::size_t input_dim, std::size_t hidden);

  std::size_t input_dim() const { return input.rows(); }
  std::size_t hidden() const { return recurrent.rows(); }

  /// Uniform fan-in init with the forget-gate bias set to 1.
  void initialize(RngStream& rng);
  std::vector<ParamSlot*> slots() { return {&input, &recurrent, &bias}; }
};

/// Everything a single step needs for its backward pass.
struct LstmStep {
  Vec i, f, g, o;
  Vec c;
  Vec tanh_c;
  Vec h;
};

LstmStep lstm_cell_forward(std::span<const double> x, std::span<const double> h_prev,
                           std::span<const double> c_prev, const LstmWeights& w);

/// Backward through one step. dh/dc are the gradients arriving at h_t and
/// c_t; results are added into dx, dh_prev and dc_prev (which must be sized).
void lstm_cell_backward(const LstmStep& step, std::span<const double> x,
                        std::span<const double> h_prev, std::span<const double> c_prev,
                        std::span<const double> dh, std::span<const double> dc, LstmWeights& w,
                        std::span<double> dx, std::span<double> dh_prev,
                        std::span<double> dc_prev);

/// Unidirectional pass over the rows of `inputs` ([T x d]). With reverse set
/// the sequence is consumed from the last row, but outputs stay aligned with
/// input positions: row t of the result is the state after reading x_t.
struct LstmSequence {
  bool reverse = false;
  std::vector<LstmStep> steps;  // in processing order
  Tensor2 hidden;               // [T x H], aligned with input rows
};

LstmSequence lstm_sequence_forward(const Tensor2& inputs, const LstmWeights& w, bool reverse);

/// d_hidden is [T x H] aligned with input rows; adds into d_inputs [T x d].
void lstm_sequence_backward(const LstmSequence& seq, const Tensor2& inputs,
                            const Tensor2& d_hidden, LstmWeights& w, Tensor2& d_inputs);

}  // namespace lldx
