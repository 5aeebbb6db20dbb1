// Copyright 2026 The lldx Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "lldx/continual/memory.hpp"
#include "lldx/model/model.hpp"

namespace lldx {

/// When the alignment-only phase runs within a stage.
enum class Phase2Schedule {
  kInterleaved,  // one phase-2 step after every phase-1 step
  kTaskEnd,      // one pass over task data plus memory after the last epoch
  kOff,          // alignment never trained
};

std::string_view schedule_name(Phase2Schedule s);
Phase2Schedule parse_schedule(std::string_view name);

struct E2mcConfig {
  double alpha = 1.0;
  double beta = 1.0;
  double lr_phase1 = 1e-3;
  double lr_align_c = 1e-4;
  double lr_align_s = 2e-5;
  std::size_t batch_train = 50;
  std::size_t batch_phase2 = 32;
  std::size_t replay_batch = 16;
  /// B per task; 0 disables memory entirely.
  std::size_t budget = 128;
  std::size_t epochs = 1;
  Phase2Schedule schedule = Phase2Schedule::kInterleaved;
  /// Phase-2 steps taken on a model copy by the end-of-stage probe; 0 disables it.
  std::size_t probe_steps = 10;

  /// Throws ConfigError on non-positive rates or sizes, negative weights.
  void validate() const;
};

enum class Phase { kPhase1, kPhase2 };

struct StepEvent {
  std::size_t stage = 0;  // 1-based
  std::size_t epoch = 0;  // 1-based
  std::size_t step = 0;   // 1-based within the stage and phase
  Phase phase = Phase::kPhase1;
  double loss = 0.0;
  double omega_c = 0.0;
  double omega_s = 0.0;
};

/// Hooks fired around every optimizer step of every strategy.
class TrainingObserver {
 public:
  virtual ~TrainingObserver() = default;
  virtual void before_step(Phase, const DualEncoderModel&) {}
  virtual void after_step(const StepEvent&, const DualEncoderModel&) {}
};

using ConsolidationTerms = DualEncoderModel::ConsolidationTerms;

/// Squared distances between the model's and the snapshot's aligned
/// embeddings on one note. Throws StageError when there is no snapshot.
ConsolidationTerms consolidation_loss(const Note& note, const DualEncoderModel& model,
                                      const EncoderSnapshot* snapshot);

/// Mean of alpha * omega_c + beta * omega_s over a batch.
double consolidation_objective(std::span<const Note* const> batch, const DualEncoderModel& model,
                               const EncoderSnapshot& snapshot, double alpha, double beta);

/// One SGD step on the mean cross-entropy of the batch with the alignment
/// layers frozen. Returns the mean loss before the update.
double phase1_step(DualEncoderModel& model, std::span<const Note* const> batch, double lr);

/// One SGD step of the alignment layers only, on the mean of
/// alpha * omega_c + beta * omega_s. Returns the mean terms before the update.
ConsolidationTerms phase2_step(DualEncoderModel& model, std::span<const Note* const> batch,
                               const EncoderSnapshot* snapshot, double alpha, double beta,
                               double lr_c, double lr_s);

/// Independent random streams of one run. Keeping each consumer on its own
/// stream means optional components never perturb the others' draws.
struct RunStreams {
  explicit RunStreams(const RngStream& root);
  RngStream init;
  RngStream shuffle;
  RngStream replay;
  RngStream phase2;
  RngStream memory;
  RngStream probe;
  RngStream fisher;
  RngStream eval;
};

/// Mean alpha-beta weighted consolidation on one frozen replay batch before
/// and after a few phase-2 steps applied to a copy of the model.
struct ConsolidationProbe {
  double before = 0.0;
  double after = 0.0;
};

struct StageTraining {
  std::size_t phase1_steps = 0;
  std::size_t phase2_steps = 0;
  double mean_loss = 0.0;  // phase-1 mean over the last epoch
  std::optional<ConsolidationProbe> probe;
};

/// Iterates a shuffled training set in batches; the final batch may be short.
std::vector<std::vector<const Note*>> make_batches(std::span<const Note> notes, std::size_t batch,
                                                   RngStream& rng);

/// Two-phase trainer with episodic replay and embedding consolidation.
class E2mcTrainer {
 public:
  explicit E2mcTrainer(E2mcConfig config);

  const E2mcConfig& config() const { return config_; }
  const EpisodicMemory& memory() const { return memory_; }
  const EncoderSnapshot* snapshot() const { return snapshot_ ? &*snapshot_ : nullptr; }
  void add_observer(TrainingObserver* observer) { observers_.push_back(observer); }

  /// Trains stage k on task: replay, phase 1, phase 2, memory write, snapshot.
  /// The classifier must already cover the task's labels.
  StageTraining train_task(DualEncoderModel& model, const Task& task, std::size_t stage,
                           RunStreams& streams);

  /// Probe on a frozen batch drawn from memory; empty before stage 2.
  std::optional<ConsolidationProbe> probe(const DualEncoderModel& model, RngStream& rng) const;

 private:
  void notify_before(Phase phase, const DualEncoderModel& model);
  void notify_after(const StepEvent& event, const DualEncoderModel& model);

  E2mcConfig config_;
  EpisodicMemory memory_;
  std::optional<EncoderSnapshot> snapshot_;
  std::vector<TrainingObserver*> observers_;
};

}  // namespace lldx
