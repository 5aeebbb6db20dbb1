// Copyright 2026 The lldx Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lldx/numeric/layers.hpp"

namespace lldx {

struct GradMismatch {
  std::string slot;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct SlotGradError {
  std::string slot;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<SlotGradError> per_slot;
  std::vector<GradMismatch> failures;  // every entry above tolerance

  bool passed() const { return failures.empty(); }
  double max_rel_error() const;
};

/// Something with a scalar loss over a set of parameter slots.
struct GradCheckTarget {
  std::vector<ParamSlot*> slots;
  /// Loss at the current parameter values; must not touch gradients.
  std::function<double()> loss;
  /// Zero-initialised gradients in, analytic gradients accumulated out.
  std::function<void()> backward;
};

/// Relative error with an absolute floor so that gradients that are zero up
/// to roundoff are not reported.
double grad_relative_error(double analytic, double numeric);

/// Central differences (f(t+e) - f(t-e)) / 2e against the analytic
/// gradients, entry by entry.
GradCheckReport finite_diff_check(const GradCheckTarget& target, double epsilon,
                                  double tolerance);

}  // namespace lldx
