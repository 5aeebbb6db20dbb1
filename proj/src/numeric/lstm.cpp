// Copyright 2026 The lldx Authors
// SPDX-License-Identifier: Apache-2.0

#include "lldx/numeric/lstm.hpp"

#include <cmath>

#include "lldx/error.hpp"

namespace lldx {

LstmWeights::LstmWeights(const std::string& prefix, std::size_t input_dim, std::size_t hidden)
    : input(prefix + ".input", input_dim, 4 * hidden),
      recurrent(prefix + ".recurrent", hidden, 4 * hidden),
      bias(prefix + ".bias", 1, 4 * hidden) {}

void LstmWeights::initialize(RngStream& rng) {
  const std::size_t fan_in = input_dim() + hidden();
  init_uniform_fan_in(input.value, fan_in, rng);
  init_uniform_fan_in(recurrent.value, fan_in, rng);
  bias.value.fill(0.0);
  const std::size_t h = hidden();
  for (std::size_t k = h; k < 2 * h; ++k) bias.value(0, k) = 1.0;
}

LstmStep lstm_cell_forward(std::span<const double> x, std::span<const double> h_prev,
                           std::span<const double> c_prev, const LstmWeights& w) {
  const std::size_t h = w.hidden();
  if (x.size() != w.input_dim() || h_prev.size() != h || c_prev.size() != h) {
    throw DimensionError("lstm cell: x=" + std::to_string(x.size()) + " h_prev=" +
                         std::to_string(h_prev.size()) + " c_prev=" +
                         std::to_string(c_prev.size()) + " vs input " +
                         w.input.value.shape_str() + " recurrent " +
                         w.recurrent.value.shape_str());
  }
  Vec pre(w.bias.value.flat().begin(), w.bias.value.flat().end());
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (x[j] != 0.0) axpy(x[j], w.input.value.row(j), pre);
  }
  for (std::size_t j = 0; j < h; ++j) {
    if (h_prev[j] != 0.0) axpy(h_prev[j], w.recurrent.value.row(j), pre);
  }

  LstmStep s;
  s.i.resize(h);
  s.f.resize(h);
  s.g.resize(h);
  s.o.resize(h);
  s.c.resize(h);
  s.tanh_c.resize(h);
  s.h.resize(h);
  for (std::size_t k = 0; k < h; ++k) {
    s.i[k] = sigmoid(pre[k]);
    s.f[k] = sigmoid(pre[h + k]);
    s.g[k] = std::tanh(pre[2 * h + k]);
    s.o[k] = sigmoid(pre[3 * h + k]);
    s.c[k] = s.f[k] * c_prev[k] + s.i[k] * s.g[k];
    s.tanh_c[k] = std::tanh(s.c[k]);
    s.h[k] = s.o[k] * s.tanh_c[k];
  }
  return s;
}

void lstm_cell_backward(const LstmStep& s, std::span<const double> x,
                        std::span<const double> h_prev, std::span<const double> c_prev,
                        std::span<const double> dh, std::span<const double> dc_in, LstmWeights& w,
                        std::span<double> dx, std::span<double> dh_prev,
                        std::span<double> dc_prev) {
  const std::size_t h = w.hidden();
  Vec da(4 * h);
  for (std::size_t k = 0; k < h; ++k) {
    const double d_o = dh[k] * s.tanh_c[k];
    const double dc = dc_in[k] + dh[k] * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
    const double d_i = dc * s.g[k];
    const double d_g = dc * s.i[k];
    const double d_f = dc * c_prev[k];
    dc_prev[k] += dc * s.f[k];
    da[k] = d_i * s.i[k] * (1.0 - s.i[k]);
    da[h + k] = d_f * s.f[k] * (1.0 - s.f[k]);
    da[2 * h + k] = d_g * (1.0 - s.g[k] * s.g[k]);
    da[3 * h + k] = d_o * s.o[k] * (1.0 - s.o[k]);
  }
  if (w.input.accumulates()) {
    for (std::size_t j = 0; j < x.size(); ++j) axpy(x[j], da, w.input.grad.row(j));
  }
  if (w.recurrent.accumulates()) {
    for (std::size_t j = 0; j < h; ++j) axpy(h_prev[j], da, w.recurrent.grad.row(j));
  }
  if (w.bias.accumulates()) axpy(1.0, da, w.bias.grad.flat());
  if (!dx.empty()) {
    for (std::size_t j = 0; j < x.size(); ++j) dx[j] += dot(w.input.value.row(j), da);
  }
  for (std::size_t j = 0; j < h; ++j) dh_prev[j] += dot(w.recurrent.value.row(j), da);
}

LstmSequence lstm_sequence_forward(const Tensor2& inputs, const LstmWeights& w, bool reverse) {
  const std::size_t t_len = inputs.rows();
  const std::size_t h = w.hidden();
  LstmSequence seq;
  seq.reverse = reverse;
  seq.steps.reserve(t_len);
  seq.hidden = Tensor2(t_len, h);
  Vec zeros(h, 0.0);
  for (std::size_t n = 0; n < t_len; ++n) {
    const std::size_t t = reverse ? t_len - 1 - n : n;
    std::span<const double> h_prev = n == 0 ? std::span<const double>(zeros) : seq.steps.back().h;
    std::span<const double> c_prev = n == 0 ? std::span<const double>(zeros) : seq.steps.back().c;
    seq.steps.push_back(lstm_cell_forward(inputs.row(t), h_prev, c_prev, w));
    std::copy(seq.steps.back().h.begin(), seq.steps.back().h.end(), seq.hidden.row(t).begin());
  }
  return seq;
}

void lstm_sequence_backward(const LstmSequence& seq, const Tensor2& inputs,
                            const Tensor2& d_hidden, LstmWeights& w, Tensor2& d_inputs) {
  const std::size_t t_len = inputs.rows();
  const std::size_t h = w.hidden();
  if (d_hidden.rows() != t_len || d_hidden.cols() != h || d_inputs.rows() != t_len ||
      d_inputs.cols() != inputs.cols()) {
    throw DimensionError("lstm sequence backward: gradient shapes do not match the trace");
  }
  Vec zeros(h, 0.0);
  Vec dh_next(h, 0.0);
  Vec dc_next(h, 0.0);
  for (std::size_t n = t_len; n-- > 0;) {
    const std::size_t t = seq.reverse ? t_len - 1 - n : n;
    Vec dh(h);
    const auto dh_out = d_hidden.row(t);
    for (std::size_t k = 0; k < h; ++k) dh[k] = dh_out[k] + dh_next[k];
    std::span<const double> h_prev = n == 0 ? std::span<const double>(zeros) : seq.steps[n - 1].h;
    std::span<const double> c_prev = n == 0 ? std::span<const double>(zeros) : seq.steps[n - 1].c;
    Vec dh_prev(h, 0.0);
    Vec dc_prev(h, 0.0);
    lstm_cell_backward(seq.steps[n], inputs.row(t), h_prev, c_prev, dh, dc_next, w,
                       d_inputs.row(t), dh_prev, dc_prev);
    dh_next = std::move(dh_prev);
    dc_next = std::move(dc_prev);
  }
}

}  // namespace lldx
