// Copyright 2026 The lldx Authors
// SPDX-License-Identifier: Apache-2.0

#include "lldx/continual/training_log.hpp"

#include <cstdio>

#include "lldx/error.hpp"

namespace lldx {

std::string format_log_row(const StepEvent& e) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%d,%.17g,%.17g,%.17g", e.stage, e.epoch, e.step,
                e.phase == Phase::kPhase1 ? 1 : 2, e.loss, e.omega_c, e.omega_s);
  return buf;
}

TrainingLog::TrainingLog(const std::string& path) : out_(path, std::ios::app) {
  if (!out_) throw IoError("cannot open training log " + path);
  out_.seekp(0, std::ios::end);
  if (out_.tellp() == 0) out_ << "stage,epoch,step,phase,loss,omega_c,omega_s\n";
}

void TrainingLog::after_step(const StepEvent& event, const DualEncoderModel&) {
  out_ << format_log_row(event) << '\n';
  if (!out_) throw IoError("training log write failed");
}

}  // namespace lldx
