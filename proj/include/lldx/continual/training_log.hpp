// Copyright 2026 The lldx Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <fstream>
#include <string>

#include "lldx/continual/e2mc.hpp"

namespace lldx {

/// Append-only CSV: stage,epoch,step,phase,loss,omega_c,omega_s.
class TrainingLog : public TrainingObserver {
 public:
  explicit TrainingLog(const std::string& path);
  void after_step(const StepEvent& event, const DualEncoderModel& model) override;

 private:
  std::ofstream out_;
};

std::string format_log_row(const StepEvent& event);

}  // namespace lldx
