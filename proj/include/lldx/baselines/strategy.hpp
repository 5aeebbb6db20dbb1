// Copyright 2026 The lldx Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lldx/continual/e2mc.hpp"

namespace lldx {

struct StrategyOptions {
  /// Shared optimisation settings; finetune, multitask, ewc and agem read
  /// lr_phase1, batch_train and epochs, agem also reads budget.
  E2mcConfig train;
  double ewc_lambda = 100.0;
  /// Notes per task used to estimate the Fisher diagonal.
  std::size_t ewc_samples = 1024;
  /// Memory notes per reference gradient.
  std::size_t agem_ref_batch = 50;
};

/// A continual-learning procedure. Every strategy trains one stage at a time
/// on the same stream; the caller expands the classifier and evaluates.
class Strategy {
 public:
  virtual ~Strategy() = default;
  virtual std::string_view name() const = 0;
  /// Adjusts the architecture before the model is built (ablations).
  virtual ModelConfig model_config(ModelConfig base) const { return base; }
  /// Trains stage k (1-based) on stream.tasks[k-1].
  virtual StageTraining train_stage(DualEncoderModel& model, const TaskStream& stream,
                                    std::size_t stage, RunStreams& streams) = 0;
  /// Notes currently held in episodic memory.
  virtual std::size_t memory_size() const { return 0; }
  /// The trainer, for strategies built on the two-phase schedule.
  virtual const E2mcTrainer* e2mc() const { return nullptr; }

  void add_observer(TrainingObserver* observer) { observers_.push_back(observer); }

 protected:
  std::vector<TrainingObserver*> observers_;
};

/// Names accepted by make_strategy, in a stable order.
const std::vector<std::string>& strategy_names();

/// Throws NotImplementedError for gem and mbpa++ and ConfigError listing the
/// valid names for anything else unknown.
std::unique_ptr<Strategy> make_strategy(std::string_view name, const StrategyOptions& options);

/// (lambda / 2) sum_i F_i (theta_i - anchor_i)^2 over every slot. Anchor and
/// Fisher may have fewer rows than the parameter (classifier growth); only
/// the overlapping rows are penalised. Throws DimensionError otherwise.
double ewc_penalty(std::span<const ParamSlot* const> params, std::span<const Tensor2> fisher,
                   std::span<const Tensor2> anchor, double lambda);

/// Projects g so that it no longer conflicts with g_ref:
/// g - (g.g_ref / g_ref.g_ref) g_ref when g.g_ref < 0, else g.
Vec agem_project(std::span<const double> g, std::span<const double> g_ref);

}  // namespace lldx
