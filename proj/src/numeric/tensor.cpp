// Copyright 2026 The lldx Authors
// SPDX-License-Identifier: Apache-2.0

#include "lldx/numeric/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "lldx/error.hpp"

namespace lldx {

Tensor2::Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_str());
  }
}

Tensor2 Tensor2::identity(std::size_t n) {
  Tensor2 t(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

std::string Tensor2::shape_str() const {
  return "[" + std::to_string(rows_) + " x " + std::to_string(cols_) + "]";
}

void Tensor2::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Tensor2::append_rows(const Tensor2& extra) {
  if (rows_ != 0 && extra.cols_ != cols_) {
    throw DimensionError("cannot append rows of shape " + extra.shape_str() +
                         " to tensor of shape " + shape_str());
  }
  cols_ = extra.cols_;
  rows_ += extra.rows_;
  data_.insert(data_.end(), extra.data_.begin(), extra.data_.end());
}

bool Tensor2::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace lldx
