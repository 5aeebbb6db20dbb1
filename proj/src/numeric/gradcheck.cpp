// Copyright 2026 The lldx Authors
// SPDX-License-Identifier: Apache-2.0

#include "lldx/numeric/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace lldx {

double GradCheckReport::max_rel_error() const {
  double m = 0.0;
  for (const auto& s : per_slot) m = std::max(m, s.max_rel_error);
  return m;
}

double grad_relative_error(double analytic, double numeric) {
  const double scale = std::max({std::fabs(analytic), std::fabs(numeric), 1e-6});
  return std::fabs(analytic - numeric) / scale;
}

GradCheckReport finite_diff_check(const GradCheckTarget& target, double epsilon,
                                  double tolerance) {
  GradCheckReport report;
  if (target.slots.empty()) return report;

  std::vector<bool> was_frozen;
  for (ParamSlot* s : target.slots) {
    was_frozen.push_back(s->frozen);
    s->frozen = false;
    s->zero_grad();
  }
  target.backward();

  for (ParamSlot* s : target.slots) {
    SlotGradError entry{s->name, 0.0};
    auto values = s->value.flat();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + epsilon;
      const double up = target.loss();
      values[i] = saved - epsilon;
      const double down = target.loss();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double analytic = s->grad.flat()[i];
      const double rel = grad_relative_error(analytic, numeric);
      entry.max_rel_error = std::max(entry.max_rel_error, rel);
      if (!(rel <= tolerance)) {
        report.failures.push_back({s->name, i, analytic, numeric, rel});
      }
    }
    report.per_slot.push_back(entry);
  }

  for (std::size_t k = 0; k < target.slots.size(); ++k) {
    target.slots[k]->zero_grad();
    target.slots[k]->frozen = was_frozen[k];
  }
  return report;
}

}  // namespace lldx
