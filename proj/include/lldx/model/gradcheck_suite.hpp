// Copyright 2026 The lldx Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lldx/numeric/gradcheck.hpp"

namespace lldx {

enum class GradcheckScope { kLayer, kModel };

struct GradcheckOptions {
  std::uint64_t seed = 1;
  double epsilon = 1e-5;
  double tolerance = 1e-4;
  /// Test hook: perturbs one analytic gradient entry so the suite must fail.
  bool inject_fault = false;
};

struct GradcheckCase {
  std::string name;
  GradCheckReport report;
};

/// Layer scope: linear, classifier rows, softmax cross-entropy, LSTM cell
/// sequences in both directions and the alignment consolidation term.
/// Model scope: the full dual-channel model under every aggregation mode,
/// both ablations, and the consolidation objective.
std::vector<GradcheckCase> run_gradcheck_suite(GradcheckScope scope, const GradcheckOptions& options);

}  // namespace lldx
